"""Rank-aware evaluation metrics and the per-query TSV report.

All metrics follow the same evaluation scope: a query contributes only when
it appears in both the run and the qrels (recall additionally requires at
least one doc with grade >= 1). Unjudged docs count as grade 0. The mean is
the unweighted average over contributing queries, 0.0 if there are none.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import BadCutoffError
from .types import Qrels, Run, ScoredDoc


def _check_cutoff(k: int) -> None:
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise BadCutoffError(f"cutoff must be a positive integer, got {k!r}")


def _dcg(grades: Sequence[int]) -> float:
    return sum(grade / math.log2(position + 1) for position, grade in enumerate(grades, 1))


def ndcg_at_k(run: Run, qrels: Qrels, k: int) -> tuple[dict[str, float], float]:
    """nDCG@k with linear gain; ideal DCG uses the judged grades only.

    Returns (per-query values, mean). Queries whose ideal DCG is zero score
    0.0 by convention.
    """
    _check_cutoff(k)
    per_query: dict[str, float] = {}
    for query_id in run.query_ids:
        judged = qrels.query_grades(query_id)
        if not judged:
            continue
        head = run.ranking(query_id)[:k]
        dcg = _dcg([qrels.grade(query_id, doc.doc_id) for doc in head])
        ideal = _dcg(sorted(judged.values(), reverse=True)[:k])
        per_query[query_id] = dcg / ideal if ideal > 0 else 0.0
    return per_query, _mean(per_query)


def mrr_at_k(run: Run, qrels: Qrels, k: int) -> tuple[dict[str, float], float]:
    """Reciprocal rank of the first doc with grade >= 1 in the top k."""
    _check_cutoff(k)
    per_query: dict[str, float] = {}
    for query_id in run.query_ids:
        judged = qrels.query_grades(query_id)
        if not judged:
            continue
        value = 0.0
        for doc in run.ranking(query_id)[:k]:
            if qrels.grade(query_id, doc.doc_id) >= 1:
                value = 1.0 / doc.rank
                break
        per_query[query_id] = value
    return per_query, _mean(per_query)


def recall_at_k(run: Run, qrels: Qrels, k: int) -> tuple[dict[str, float], float]:
    """Fraction of relevant docs (grade >= 1) retrieved in the top k.

    Queries with no relevant doc in the qrels are excluded entirely.
    """
    _check_cutoff(k)
    per_query: dict[str, float] = {}
    for query_id in run.query_ids:
        judged = qrels.query_grades(query_id)
        relevant = {doc_id for doc_id, grade in judged.items() if grade >= 1}
        if not relevant:
            continue
        head = run.ranking(query_id)[:k]
        hits = sum(1 for doc in head if doc.doc_id in relevant)
        per_query[query_id] = hits / len(relevant)
    return per_query, _mean(per_query)


def _mean(per_query: Mapping[str, float]) -> float:
    if not per_query:
        return 0.0
    return sum(per_query.values()) / len(per_query)


_METRIC_FNS: dict[str, Callable[[Run, Qrels, int], tuple[dict[str, float], float]]] = {
    "ndcg": ndcg_at_k,
    "mrr": mrr_at_k,
    "recall": recall_at_k,
}

_CANONICAL = {"ndcg": "nDCG", "mrr": "MRR", "recall": "Recall"}

_METRIC_RE = re.compile(r"^(ndcg|mrr|recall)@(\d+)$", re.IGNORECASE)


@dataclass(frozen=True)
class MetricSpec:
    """A parsed metric name such as nDCG@10."""

    family: str
    k: int

    @classmethod
    def parse(cls, name: str) -> "MetricSpec":
        match = _METRIC_RE.match(name.strip())
        if not match:
            raise ValueError(
                f"unknown metric {name!r}; expected nDCG@k, MRR@k, or Recall@k"
            )
        k = int(match.group(2))
        _check_cutoff(k)
        return cls(family=match.group(1).lower(), k=k)

    @property
    def display(self) -> str:
        return f"{_CANONICAL[self.family]}@{self.k}"

    def compute(self, run: Run, qrels: Qrels) -> tuple[dict[str, float], float]:
        return _METRIC_FNS[self.family](run, qrels, self.k)


def evaluate(run: Run, qrels: Qrels, metric_names: Sequence[str]) -> list[tuple[str, dict[str, float], float]]:
    """Compute each named metric; returns (display name, per-query, mean)."""
    out = []
    for name in metric_names:
        spec = MetricSpec.parse(name)
        per_query, mean = spec.compute(run, qrels)
        out.append((spec.display, per_query, mean))
    return out


def render_report(results: list[tuple[str, dict[str, float], float]]) -> str:
    """TSV report: one `metric<TAB>query_id<TAB>value` line per query, then
    a `metric<TAB>all<TAB>mean` summary line per metric."""
    lines = []
    for name, per_query, mean in results:
        for query_id, value in per_query.items():
            lines.append(f"{name}\t{query_id}\t{value:.6f}\n")
        lines.append(f"{name}\tall\t{mean:.6f}\n")
    return "".join(lines)


def write_report(results: list[tuple[str, dict[str, float], float]], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(results), encoding="utf-8")
