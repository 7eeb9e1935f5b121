"""Reading and writing the on-disk data formats.

Formats:

* docs / queries: TSV (`id<TAB>text`, extra tabs belong to the text) or
  JSONL (one object per line with `doc_id`/`query_id` and `text`).
* training tuples: TSV (`query<TAB>positive<TAB>negative...`), labels 1 for
  the first doc and 0 for the rest.
* runs: 6-column whitespace-separated lines
  `query_id Q0 doc_id rank score tag` with scores printed to 6 significant
  digits.
* qrels: 4-column whitespace-separated lines `query_id 0 doc_id grade`.

Blank lines are skipped everywhere; malformed lines raise ParseError with
their 1-based line number. write(read(file)) reproduces a well-formed file
byte-for-byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import (
    DuplicateDocError,
    DuplicateQueryError,
    InsufficientDocsError,
    MissingTextError,
    ParseError,
)
from .rng import SplitMix64, salt
from .types import DocRecord, QueryRecord, Qrels, Run, TrainSample

_SAMPLE_SALT = salt(b"tuple-sampling")


class DatasetKind(str, Enum):
    DOC = "doc"
    QUERY = "query"
    TUPLE = "tuple"
    RUN = "run"


class DataFormat(str, Enum):
    TSV = "tsv"
    JSONL = "jsonl"
    TREC_RUN = "trec_run"
    TREC_QRELS = "trec_qrels"


_ALLOWED_FORMATS = {
    DatasetKind.DOC: {DataFormat.TSV, DataFormat.JSONL},
    DatasetKind.QUERY: {DataFormat.TSV, DataFormat.JSONL},
    DatasetKind.TUPLE: {DataFormat.TSV},
    DatasetKind.RUN: {DataFormat.TREC_RUN},
}

_DEFAULT_FORMATS = {
    DatasetKind.DOC: DataFormat.TSV,
    DatasetKind.QUERY: DataFormat.TSV,
    DatasetKind.TUPLE: DataFormat.TSV,
    DatasetKind.RUN: DataFormat.TREC_RUN,
}


@dataclass(frozen=True)
class DatasetSpec:
    """What to read, from where, in which format."""

    kind: DatasetKind
    path: Path
    format: DataFormat | None = None

    def __post_init__(self):
        kind = DatasetKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "path", Path(self.path))
        fmt = DataFormat(self.format) if self.format is not None else _DEFAULT_FORMATS[kind]
        if fmt not in _ALLOWED_FORMATS[kind]:
            raise ValueError(f"format {fmt.value!r} is not valid for {kind.value} datasets")
        object.__setattr__(self, "format", fmt)


def _lines(path: Path) -> Iterator[tuple[int, str]]:
    """Non-blank lines with 1-based numbers; one trailing CR/LF is stripped."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for line_no, raw in enumerate(handle, 1):
            if raw.endswith("\n"):
                raw = raw[:-1]
            if raw.endswith("\r"):
                raw = raw[:-1]
            if not raw.strip():
                continue
            yield line_no, raw


def _id_text_rows(spec: DatasetSpec, id_field: str) -> Iterator[tuple[int, str, str]]:
    path = str(spec.path)
    for line_no, line in _lines(spec.path):
        if spec.format is DataFormat.TSV:
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise ParseError("expected 'id<TAB>text'", line_no, path)
            yield line_no, parts[0], parts[1]
        else:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line_no, path) from exc
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", line_no, path)
            if not isinstance(obj.get(id_field), str) or not isinstance(obj.get("text"), str):
                raise ParseError(f"object needs string fields {id_field!r} and 'text'", line_no, path)
            yield line_no, obj[id_field], obj["text"]


def read_docs(spec: DatasetSpec) -> Iterator[DocRecord]:
    """Stream DocRecords; duplicate ids are an error."""
    if spec.kind is not DatasetKind.DOC:
        raise ValueError(f"expected a doc dataset, got {spec.kind.value}")
    seen: set[str] = set()
    for line_no, doc_id, text in _id_text_rows(spec, "doc_id"):
        if doc_id in seen:
            raise DuplicateDocError(f"{spec.path}:{line_no}: duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        try:
            yield DocRecord(doc_id=doc_id, text=text)
        except ValueError as exc:
            raise ParseError(str(exc), line_no, str(spec.path)) from exc


def read_queries(spec: DatasetSpec) -> Iterator[QueryRecord]:
    """Stream QueryRecords; duplicate ids are an error."""
    if spec.kind is not DatasetKind.QUERY:
        raise ValueError(f"expected a query dataset, got {spec.kind.value}")
    seen: set[str] = set()
    for line_no, query_id, text in _id_text_rows(spec, "query_id"):
        if query_id in seen:
            raise DuplicateQueryError(f"{spec.path}:{line_no}: duplicate query_id {query_id!r}")
        seen.add(query_id)
        try:
            yield QueryRecord(query_id=query_id, text=text)
        except ValueError as exc:
            raise ParseError(str(exc), line_no, str(spec.path)) from exc


def read_tuples(spec: DatasetSpec) -> Iterator[TrainSample]:
    """Stream TrainSamples from `query<TAB>positive<TAB>negative...` lines.

    Ids are synthesized from line numbers (q<line>, d<line>_<i>); the first
    doc is labeled 1.0, the rest 0.0.
    """
    if spec.kind is not DatasetKind.TUPLE:
        raise ValueError(f"expected a tuple dataset, got {spec.kind.value}")
    for line_no, line in _lines(spec.path):
        parts = line.split("\t")
        if len(parts) < 3:
            raise ParseError("expected query, positive, and at least one negative", line_no, str(spec.path))
        query = QueryRecord(query_id=f"q{line_no}", text=parts[0])
        docs = tuple(
            DocRecord(doc_id=f"d{line_no}_{i}", text=text) for i, text in enumerate(parts[1:])
        )
        labels = (1.0,) + (0.0,) * (len(docs) - 1)
        yield TrainSample(query=query, docs=docs, labels=labels)


def read_run(path: Path) -> Run:
    """Parse a 6-column run file; the tag is taken from the first line."""
    path = Path(path)
    tag: str | None = None
    scores: dict[str, list[tuple[str, float]]] = {}
    seen: set[tuple[str, str]] = set()
    for line_no, line in _lines(path):
        fields = line.split()
        if len(fields) != 6:
            raise ParseError(f"expected 6 whitespace-separated columns, got {len(fields)}", line_no, str(path))
        query_id, _, doc_id, rank_str, score_str, line_tag = fields
        try:
            int(rank_str)
        except ValueError as exc:
            raise ParseError(f"rank {rank_str!r} is not an integer", line_no, str(path)) from exc
        try:
            score = float(score_str)
        except ValueError as exc:
            raise ParseError(f"score {score_str!r} is not a number", line_no, str(path)) from exc
        if tag is None:
            tag = line_tag
        if (query_id, doc_id) in seen:
            raise ParseError(f"duplicate (query, doc) pair {query_id!r}/{doc_id!r}", line_no, str(path))
        seen.add((query_id, doc_id))
        scores.setdefault(query_id, []).append((doc_id, score))
    if tag is None:
        raise ParseError("run file has no data lines", 1, str(path))
    try:
        return Run.from_scores(tag, scores)
    except ValueError as exc:
        raise ParseError(str(exc), 1, str(path)) from exc


def format_score(score: float) -> str:
    """Run-file score formatting: 6 significant digits."""
    return format(score, ".6g")


def write_run(run: Run, path: Path) -> None:
    """Write a run in the 6-column format, queries and ranks in order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for query_id in run.query_ids:
        for doc in run.ranking(query_id):
            lines.append(
                f"{query_id} Q0 {doc.doc_id} {doc.rank} {format_score(doc.score)} {run.tag}\n"
            )
    path.write_text("".join(lines), encoding="utf-8")


def read_qrels(path: Path) -> Qrels:
    """Parse 4-column qrels; grades are non-negative integers."""
    path = Path(path)
    grades: dict[tuple[str, str], int] = {}
    for line_no, line in _lines(path):
        fields = line.split()
        if len(fields) != 4:
            raise ParseError(f"expected 4 whitespace-separated columns, got {len(fields)}", line_no, str(path))
        query_id, _, doc_id, grade_str = fields
        try:
            grade = int(grade_str)
        except ValueError as exc:
            raise ParseError(f"grade {grade_str!r} is not an integer", line_no, str(path)) from exc
        if grade < 0:
            raise ParseError(f"grade must be non-negative, got {grade}", line_no, str(path))
        if (query_id, doc_id) in grades:
            raise ParseError(f"duplicate judgment for {query_id!r}/{doc_id!r}", line_no, str(path))
        grades[(query_id, doc_id)] = grade
    try:
        return Qrels(grades)
    except ValueError as exc:
        raise ParseError(str(exc), 1, str(path)) from exc


def write_qrels(qrels: Qrels, path: Path) -> None:
    """Write qrels in the 4-column format, in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{query_id} 0 {doc_id} {grade}\n" for (query_id, doc_id), grade in qrels.grades.items()
    ]
    path.write_text("".join(lines), encoding="utf-8")


def tuples_from_run(
    run: Run,
    qrels: Qrels,
    queries: Mapping[str, str],
    docs: Mapping[str, str],
    n: int,
    seed: int,
) -> Iterator[TrainSample]:
    """Sample n-tuples (one positive, n-1 negatives) from a run's rankings.

    Positives are drawn uniformly from ranked docs with grade >= 1,
    negatives without replacement from the remaining ranked docs; labels are
    the grades (unjudged docs count as 0). Queries that cannot supply a
    positive or enough negatives are skipped; producing no tuples at all is
    an error. Texts come from the given lookups.
    """
    if n < 2:
        raise ValueError(f"tuple size must be >= 2, got {n}")
    rng = SplitMix64(seed ^ _SAMPLE_SALT)
    produced = 0
    for query_id in run.query_ids:
        ranking = run.ranking(query_id)
        positives = [doc.doc_id for doc in ranking if qrels.grade(query_id, doc.doc_id) >= 1]
        negatives = [doc.doc_id for doc in ranking if qrels.grade(query_id, doc.doc_id) < 1]
        if not positives or len(negatives) < n - 1:
            continue
        pos_id = positives[rng.randint(len(positives))]
        neg_ids = rng.sample(negatives, n - 1)
        if query_id not in queries:
            raise MissingTextError(query_id, kind="query")
        for doc_id in [pos_id, *neg_ids]:
            if doc_id not in docs:
                raise MissingTextError(doc_id, kind="doc")
        sample_docs = tuple(
            DocRecord(doc_id=doc_id, text=docs[doc_id]) for doc_id in [pos_id, *neg_ids]
        )
        labels = tuple(float(qrels.grade(query_id, doc_id)) for doc_id in [pos_id, *neg_ids])
        produced += 1
        yield TrainSample(
            query=QueryRecord(query_id=query_id, text=queries[query_id]),
            docs=sample_docs,
            labels=labels,
        )
    if produced == 0:
        raise InsufficientDocsError(
            "no query in the run could supply one positive and enough negatives"
        )
