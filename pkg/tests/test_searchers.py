import numpy as np
import pytest

from rankforge.encoders import BiEncoderConfig, encode_bi
from rankforge.errors import ConfigConflictError, DuplicateQueryError
from rankforge.indexes import build_index
from rankforge.models import new_bi_encoder
from rankforge.searchers import (
    SearchConfig,
    batch_search,
    search_dense,
    search_multi,
    search_sparse,
)
from rankforge.similarity import score_pairs
from rankforge.types import DocRecord, QueryRecord

from oracles import random_text, topk_ref

VOCAB = [f"w{i}" for i in range(24)]


def _dense_model(seed=1, similarity="dot"):
    return new_bi_encoder(
        BiEncoderConfig(similarity_function=similarity, embedding_dim=8, seed=seed),
        backbone_dim=8,
    )


def _sparse_model(seed=2):
    return new_bi_encoder(
        BiEncoderConfig(output_kind="sparse", sparsification="log1p_relu", vocab_size=32, seed=seed),
        backbone_dim=8,
    )


def _multi_model(seed=3):
    return new_bi_encoder(
        BiEncoderConfig(
            output_kind="multi_vector", query_pooling="none", doc_pooling="none",
            embedding_dim=8, seed=seed,
        ),
        backbone_dim=8,
    )


def _corpus(rng, n):
    return [DocRecord(f"d{i:03d}", random_text(rng, VOCAB, 6)) for i in range(n)]


def _brute_force(query_text, docs, model, k):
    scores = score_pairs(query_text, [d.text for d in docs], model.config, model.params)
    return topk_ref([(d.doc_id, float(s)) for d, s in zip(docs, scores)], k)


def test_search_config_validation():
    assert SearchConfig(k=5).resolved_candidate_k == 50
    assert SearchConfig(k=5, candidate_k=7).resolved_candidate_k == 7
    with pytest.raises(ValueError):
        SearchConfig(k=0)
    with pytest.raises(ValueError):
        SearchConfig(k=5, candidate_k=4)  # candidate pool cannot be under k


def test_dense_search_known_example():
    model = _dense_model()
    docs = [DocRecord("doc1", "x"), DocRecord("doc2", "x"), DocRecord("doc3", "x")]
    index = build_index(docs, model)
    # overwrite the stored matrix with the frozen example embeddings
    object.__setattr__(index, "matrix", np.array([[2.0], [1.0], [3.0]], dtype=np.float32)[:, :])
    object.__setattr__(index, "doc_ids", ("doc1", "doc2", "doc3"))
    from rankforge.types import DenseEmbedding

    hits = search_dense(index, DenseEmbedding(np.array([1.0], dtype=np.float32)), SearchConfig(k=2))
    got = [(h.doc_id, h.score, h.rank) for h in hits]
    assert got == [("doc3", 3.0, 1), ("doc1", 2.0, 2)]


def test_dense_search_matches_brute_force():
    rng = np.random.RandomState(4)
    for trial in range(30):
        docs = _corpus(rng, int(rng.randint(1, 40)))
        similarity = "cosine" if trial % 2 else "dot"
        model = _dense_model(seed=trial, similarity=similarity)
        index = build_index(docs, model)
        k = int(rng.randint(1, len(docs) + 3))
        query = random_text(rng, VOCAB, 4)
        emb = encode_bi(query, model.config, model.params, side="query")
        hits = search_dense(index, emb, SearchConfig(k=k))
        got = [(h.doc_id, h.score, h.rank) for h in hits]
        assert got == _brute_force(query, docs, model, k)


def test_sparse_search_matches_brute_force_and_skips_zero_overlap():
    rng = np.random.RandomState(5)
    for trial in range(30):
        docs = _corpus(rng, int(rng.randint(1, 40)))
        model = _sparse_model(seed=trial)
        index = build_index(docs, model)
        k = int(rng.randint(1, len(docs) + 3))
        query = random_text(rng, VOCAB, 4)
        emb = encode_bi(query, model.config, model.params, side="query")
        hits = search_sparse(index, emb, SearchConfig(k=k))
        got = [(h.doc_id, h.score, h.rank) for h in hits]
        # brute force over docs with any term overlap; zero-overlap docs
        # are unreachable through an inverted index
        scores = score_pairs(query, [d.text for d in docs], model.config, model.params)
        reachable = []
        qterms = set(emb.term_ids.tolist())
        for d, s in zip(docs, scores):
            demb = encode_bi(d.text, model.config, model.params, side="doc")
            if qterms & set(demb.term_ids.tolist()):
                reachable.append((d.doc_id, float(s)))
        assert got == topk_ref(reachable, k)


def test_multi_search_full_candidates_matches_brute_force():
    # candidate_k counts token vectors, so candidate_k == total_vectors
    # makes stage 1 exhaustive and the result exact
    rng = np.random.RandomState(6)
    for trial in range(30):
        docs = _corpus(rng, int(rng.randint(1, 25)))
        model = _multi_model(seed=trial)
        index = build_index(docs, model)
        k = int(rng.randint(1, len(docs) + 2))
        query = random_text(rng, VOCAB, 4)
        emb = encode_bi(query, model.config, model.params, side="query")
        hits = search_multi(index, emb, SearchConfig(k=k, candidate_k=index.total_vectors))
        got = [(h.doc_id, h.score, h.rank) for h in hits]
        assert got == _brute_force(query, docs, model, k)


def test_multi_search_narrow_candidates_is_subset_of_corpus():
    rng = np.random.RandomState(8)
    docs = _corpus(rng, 30)
    model = _multi_model()
    index = build_index(docs, model)
    query = random_text(rng, VOCAB, 4)
    emb = encode_bi(query, model.config, model.params, side="query")
    hits = search_multi(index, emb, SearchConfig(k=3, candidate_k=5))
    assert len(hits) <= 3
    ids = {d.doc_id for d in docs}
    assert all(h.doc_id in ids for h in hits)
    assert [h.rank for h in hits] == list(range(1, len(hits) + 1))


def test_heap_tie_break_prefers_lower_doc_id():
    # many identical docs force equal scores; ties resolve by doc id
    model = _dense_model()
    docs = [DocRecord(f"d{i}", "same text here") for i in (5, 3, 9, 1, 7)]
    index = build_index(docs, model)
    emb = encode_bi("same text", model.config, model.params, side="query")
    hits = search_dense(index, emb, SearchConfig(k=3))
    assert [h.doc_id for h in hits] == ["d1", "d3", "d5"]
    assert len({h.score for h in hits}) == 1


def test_batch_search_produces_run_and_skips_empty_queries():
    rng = np.random.RandomState(9)
    docs = _corpus(rng, 10)
    model = _dense_model()
    index = build_index(docs, model)
    queries = [
        QueryRecord("q1", random_text(rng, VOCAB, 3)),
        QueryRecord("q2", "..."),
        QueryRecord("q3", random_text(rng, VOCAB, 3)),
    ]
    result = batch_search(index, queries, model, SearchConfig(k=4))
    assert result.skipped == ("q2",)
    assert set(result.run.rankings) == {"q1", "q3"}
    assert result.run.tag == model.name
    for docs_ranked in result.run.rankings.values():
        assert [d.rank for d in docs_ranked] == list(range(1, len(docs_ranked) + 1))


def test_batch_search_rejects_duplicate_query_ids():
    rng = np.random.RandomState(10)
    docs = _corpus(rng, 5)
    model = _dense_model()
    index = build_index(docs, model)
    queries = [QueryRecord("q1", "alpha"), QueryRecord("q1", "beta")]
    with pytest.raises(DuplicateQueryError):
        batch_search(index, queries, model, SearchConfig(k=2))


def test_batch_search_rejects_model_index_mismatch():
    rng = np.random.RandomState(11)
    docs = _corpus(rng, 5)
    dense_index = build_index(docs, _dense_model())
    with pytest.raises(ConfigConflictError):
        batch_search(dense_index, [QueryRecord("q1", "alpha")], _sparse_model(), SearchConfig(k=2))
    sparse_index = build_index(docs, _sparse_model())
    with pytest.raises(ConfigConflictError):
        batch_search(sparse_index, [QueryRecord("q1", "alpha")], _multi_model(), SearchConfig(k=2))


def test_batch_search_rejects_dim_conflicts():
    rng = np.random.RandomState(12)
    docs = _corpus(rng, 5)
    index = build_index(docs, _dense_model())
    other = new_bi_encoder(BiEncoderConfig(embedding_dim=16, seed=1), backbone_dim=8)
    with pytest.raises(ConfigConflictError):
        batch_search(index, [QueryRecord("q1", "alpha")], other, SearchConfig(k=2))


def test_batch_search_threads_do_not_change_run():
    rng = np.random.RandomState(13)
    docs = _corpus(rng, 25)
    model = _dense_model()
    index = build_index(docs, model)
    queries = [QueryRecord(f"q{i}", random_text(rng, VOCAB, 4)) for i in range(12)]
    one = batch_search(index, queries, model, SearchConfig(k=5), threads=1)
    four = batch_search(index, queries, model, SearchConfig(k=5), threads=4)
    assert one.run == four.run
