"""Re-ranking: re-score the top of an existing run with another model.

Only the top `depth` entries per query are re-scored; anything below is
dropped. The output tag is `<input_tag>+<model_name>`. Re-ranking with the
same model and depth twice is a fixed point, because scores are recomputed
identically and the canonical tie rule is deterministic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Mapping

from .errors import MissingTextError
from .models import Model
from .types import Run, ScoredDoc, rank_documents


def re_rank(
    run: Run,
    queries: Mapping[str, str],
    docs: Mapping[str, str],
    model: Model,
    depth: int | None = None,
    threads: int = 1,
) -> Run:
    """Re-score the top `depth` docs of each query with `model`.

    `queries` and `docs` map ids to raw text; a missing id is an error, not
    a silent skip. `depth=None` re-ranks entire rankings.
    """
    if depth is not None and depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    query_ids = run.query_ids
    jobs: list[tuple[str, str, list[ScoredDoc]]] = []
    for query_id in query_ids:
        if query_id not in queries:
            raise MissingTextError(query_id, kind="query")
        head = list(run.ranking(query_id)[: depth if depth is not None else None])
        for doc in head:
            if doc.doc_id not in docs:
                raise MissingTextError(doc.doc_id, kind="doc")
        jobs.append((query_id, queries[query_id], head))

    def score_one(job: tuple[str, str, list[ScoredDoc]]) -> tuple[ScoredDoc, ...]:
        query_id, query_text, head = job
        if not head:
            return ()
        doc_ids = [doc.doc_id for doc in head]
        scores = model.score(query_text, [docs[doc_id] for doc_id in doc_ids])
        return rank_documents(zip(doc_ids, scores))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rescored = list(pool.map(score_one, jobs))
    else:
        rescored = [score_one(job) for job in jobs]
    rankings = {query_id: ranking for (query_id, _, _), ranking in zip(jobs, rescored)}
    return Run(tag=f"{run.tag}+{model.name}", rankings=rankings)
