import numpy as np
import pytest

from rankforge.errors import DuplicateDocError
from rankforge.types import (
    DenseEmbedding,
    DocRecord,
    MultiEmbedding,
    Qrels,
    QueryRecord,
    Run,
    ScoredDoc,
    SparseEmbedding,
    TrainSample,
    as_score,
    rank_documents,
)

from oracles import rank_ref


def test_record_rejects_bad_ids():
    for bad in ("", "has space", "tab\tid", "new\nline"):
        with pytest.raises(ValueError):
            DocRecord(bad, "text")
        with pytest.raises(ValueError):
            QueryRecord(bad, "text")
    DocRecord("ok-id_1", "")  # empty text is allowed at the record level


def test_as_score_rounds_to_float32():
    assert as_score(1.0) == 1.0
    assert isinstance(as_score(0.1), float)
    assert as_score(0.1) == float(np.float32(0.1))
    with pytest.raises(ValueError):
        as_score(float("nan"))
    with pytest.raises(ValueError):
        as_score(float("inf"))


def test_dense_embedding_checks():
    emb = DenseEmbedding(np.ones(4, dtype=np.float32))
    assert emb.dim == 4
    assert emb == DenseEmbedding(np.ones(4, dtype=np.float32))
    assert emb != DenseEmbedding(np.zeros(4, dtype=np.float32))
    with pytest.raises(ValueError):
        DenseEmbedding(np.ones((2, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        DenseEmbedding(np.array([np.nan], dtype=np.float32))


def test_multi_embedding_checks():
    emb = MultiEmbedding(np.ones((3, 4), dtype=np.float32))
    assert emb.vectors.shape == (3, 4)
    with pytest.raises(ValueError):
        MultiEmbedding(np.ones(4, dtype=np.float32))
    with pytest.raises(ValueError):
        MultiEmbedding(np.ones((0, 4), dtype=np.float32))


def test_sparse_embedding_invariants():
    emb = SparseEmbedding(
        np.array([1, 5, 9], dtype=np.int64), np.array([0.5, 1.0, 2.0], dtype=np.float32)
    )
    assert emb.nnz == 3
    with pytest.raises(ValueError):
        SparseEmbedding(np.array([5, 1], dtype=np.int64), np.array([1, 1], dtype=np.float32))
    with pytest.raises(ValueError):
        SparseEmbedding(np.array([1, 1], dtype=np.int64), np.array([1, 1], dtype=np.float32))
    with pytest.raises(ValueError):
        SparseEmbedding(np.array([1], dtype=np.int64), np.array([0.0], dtype=np.float32))
    with pytest.raises(ValueError):
        SparseEmbedding(np.array([1], dtype=np.int64), np.array([-1.0], dtype=np.float32))


def test_sparse_embedding_mapping_round_trip():
    emb = SparseEmbedding.from_mapping({9: 2.0, 1: 0.5, 4: 1.25})
    assert emb.term_ids.tolist() == [1, 4, 9]
    assert emb.to_mapping() == {1: 0.5, 4: 1.25, 9: 2.0}
    # weights that round to zero in float32 are dropped
    tiny = SparseEmbedding.from_mapping({0: 1e-60, 1: 1.0})
    assert tiny.term_ids.tolist() == [1]


def test_rank_documents_matches_reference_under_ties():
    rng = np.random.RandomState(17)
    for _ in range(100):
        n = int(rng.randint(1, 30))
        # coarse grid forces plenty of exact ties
        scores = rng.randint(0, 4, size=n).astype(np.float64) / 2.0
        pairs = [(f"doc{i:03d}", float(scores[i])) for i in range(n)]
        rng.shuffle(pairs)
        got = [(sd.doc_id, sd.score, sd.rank) for sd in rank_documents(pairs)]
        assert got == rank_ref(pairs)


def test_scored_doc_fields():
    sd = ScoredDoc("d1", 0.5, 1)
    assert (sd.doc_id, sd.score, sd.rank) == ("d1", 0.5, 1)


def test_run_validates_rank_sequence():
    with pytest.raises(ValueError):
        Run("tag", {"q1": (ScoredDoc("d1", 1.0, 2),)})
    with pytest.raises(ValueError):
        Run(
            "tag",
            {"q1": (ScoredDoc("d1", 1.0, 1), ScoredDoc("d2", 2.0, 2))},
        )  # scores must be non-increasing
    with pytest.raises(DuplicateDocError):
        Run(
            "tag",
            {"q1": (ScoredDoc("d1", 1.0, 1), ScoredDoc("d1", 1.0, 2))},
        )


def test_run_validates_tie_order():
    with pytest.raises(ValueError):
        Run(
            "tag",
            {"q1": (ScoredDoc("db", 1.0, 1), ScoredDoc("da", 1.0, 2))},
        )
    run = Run("tag", {"q1": (ScoredDoc("da", 1.0, 1), ScoredDoc("db", 1.0, 2))})
    assert len(run) == 1


def test_run_rejects_bad_tag():
    with pytest.raises(ValueError):
        Run("has space", {})
    with pytest.raises(ValueError):
        Run("", {})


def test_run_from_scores_applies_tie_rule():
    run = Run.from_scores("tag", {"q1": [("db", 1.0), ("da", 1.0), ("dc", 2.0)]})
    assert [sd.doc_id for sd in run.rankings["q1"]] == ["dc", "da", "db"]
    assert [sd.rank for sd in run.rankings["q1"]] == [1, 2, 3]


def test_qrels_lookup():
    qrels = Qrels({("q1", "d1"): 2, ("q1", "d2"): 0, ("q2", "d1"): 1})
    assert qrels.grade("q1", "d1") == 2
    assert qrels.grade("q1", "missing") == 0  # unjudged reads as grade 0
    assert qrels.query_grades("q1") == {"d1": 2, "d2": 0}
    assert qrels.query_grades("zzz") == {}
    with pytest.raises(ValueError):
        Qrels({("q1", "d1"): -1})


def test_train_sample_preference():
    q = QueryRecord("q1", "text")
    docs = (DocRecord("d1", "a"), DocRecord("d2", "b"))
    assert TrainSample(q, docs, (1.0, 0.0)).has_preference
    assert not TrainSample(q, docs, (1.0, 1.0)).has_preference
    with pytest.raises(ValueError):
        TrainSample(q, docs, (1.0,))
    with pytest.raises(ValueError):
        TrainSample(q, (), ())


def test_package_exports_resolve():
    import rankforge

    assert rankforge.__all__
    for name in rankforge.__all__:
        assert getattr(rankforge, name) is not None, name
