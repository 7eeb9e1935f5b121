import numpy as np
import pytest

from rankforge.errors import BadCutoffError
from rankforge.metrics import (
    MetricSpec,
    evaluate,
    mrr_at_k,
    ndcg_at_k,
    recall_at_k,
    render_report,
    write_report,
)
from rankforge.types import Qrels, Run

from oracles import mrr_ref, ndcg_ref, recall_ref


def _run_from(rankings):
    scores = {
        qid: [(doc_id, float(len(docs) - i)) for i, doc_id in enumerate(docs)]
        for qid, docs in rankings.items()
    }
    return Run.from_scores("tag", scores)


def test_ndcg_hand_example():
    # ranked grades (1, 3, 0): dcg = 1 + 3/log2(3) ~ 2.8928
    # ideal grades (3, 1):     idcg = 3 + 1/log2(3) ~ 3.6309
    run = _run_from({"q1": ["d2", "d1", "d3"]})
    qrels = Qrels({("q1", "d1"): 3, ("q1", "d2"): 1})
    per_query, mean = ndcg_at_k(run, qrels, 10)
    assert per_query["q1"] == pytest.approx(0.796708, abs=1e-4)
    assert mean == pytest.approx(0.796708, abs=1e-4)


def test_ndcg_zero_when_no_positive_grades():
    run = _run_from({"q1": ["d1", "d2"]})
    qrels = Qrels({("q1", "d1"): 0, ("q1", "d2"): 0})
    per_query, mean = ndcg_at_k(run, qrels, 2)
    assert per_query["q1"] == 0.0
    assert mean == 0.0


def test_unjudged_queries_are_skipped():
    run = _run_from({"q1": ["d1"], "q2": ["d1"]})
    qrels = Qrels({("q1", "d1"): 1})
    per_query, mean = ndcg_at_k(run, qrels, 1)
    assert set(per_query) == {"q1"}
    per_query, _ = mrr_at_k(run, qrels, 1)
    assert set(per_query) == {"q1"}


def test_recall_excludes_queries_without_relevant_docs():
    run = _run_from({"q1": ["d1", "d2"], "q2": ["d1"]})
    qrels = Qrels({("q1", "d2"): 1, ("q2", "d1"): 0})
    per_query, mean = recall_at_k(run, qrels, 2)
    assert set(per_query) == {"q1"}
    assert per_query["q1"] == 1.0
    assert mean == 1.0


def test_empty_evaluation_sets_mean_zero():
    run = _run_from({"q1": ["d1"]})
    qrels = Qrels({("other", "d1"): 1})
    for metric in (ndcg_at_k, mrr_at_k, recall_at_k):
        per_query, mean = metric(run, qrels, 5)
        assert per_query == {}
        assert mean == 0.0


def test_metrics_match_reference_evaluator():
    rng = np.random.RandomState(3)
    for _ in range(100):
        n_docs = int(rng.randint(1, 20))
        n_queries = int(rng.randint(1, 5))
        k = int(rng.randint(1, 12))
        rankings = {}
        judgments = {}
        for qi in range(n_queries):
            qid = f"q{qi}"
            docs = [f"d{j}" for j in range(n_docs)]
            rng.shuffle(docs)
            rankings[qid] = docs
            for doc_id in docs:
                if rng.rand() < 0.6:
                    judgments[(qid, doc_id)] = int(rng.randint(0, 4))
        run = _run_from(rankings)
        qrels = Qrels(judgments)
        got_ndcg, mean_ndcg = ndcg_at_k(run, qrels, k)
        got_mrr, _ = mrr_at_k(run, qrels, k)
        got_recall, _ = recall_at_k(run, qrels, k)
        for qid, docs in rankings.items():
            grades = {d: g for (q, d), g in judgments.items() if q == qid}
            if not grades:
                assert qid not in got_ndcg
                continue
            assert got_ndcg[qid] == pytest.approx(ndcg_ref(docs, grades, k), abs=1e-9)
            assert got_mrr[qid] == pytest.approx(mrr_ref(docs, grades, k), abs=1e-9)
            expected_recall = recall_ref(docs, grades, k)
            if expected_recall is None:
                assert qid not in got_recall
            else:
                assert got_recall[qid] == pytest.approx(expected_recall, abs=1e-9)
        if got_ndcg:
            assert mean_ndcg == pytest.approx(sum(got_ndcg.values()) / len(got_ndcg), abs=1e-12)


def test_metric_spec_parsing():
    spec = MetricSpec.parse("ndcg@10")
    assert spec.family == "ndcg"
    assert spec.k == 10
    assert spec.display == "nDCG@10"
    assert MetricSpec.parse("MRR@5").display == "MRR@5"
    assert MetricSpec.parse("Recall@100").display == "Recall@100"
    with pytest.raises(BadCutoffError):
        MetricSpec.parse("ndcg@0")
    for bad in ("ndcg", "ndcg@", "map@10", "ndcg@-3", "ndcg@3.5"):
        with pytest.raises(ValueError):
            MetricSpec.parse(bad)


def test_bad_cutoff_rejected_by_metric_functions():
    run = _run_from({"q1": ["d1"]})
    qrels = Qrels({("q1", "d1"): 1})
    for metric in (ndcg_at_k, mrr_at_k, recall_at_k):
        for bad in (0, -1, True):
            with pytest.raises(BadCutoffError):
                metric(run, qrels, bad)


def test_evaluate_and_report_format(tmp_path):
    run = _run_from({"q1": ["d1", "d2"], "q2": ["d2", "d1"]})
    qrels = Qrels({("q1", "d1"): 2, ("q2", "d1"): 1})
    results = evaluate(run, qrels, ["ndcg@2", "mrr@2"])
    assert [name for name, _, _ in results] == ["nDCG@2", "MRR@2"]
    report = render_report(results)
    lines = report.splitlines()
    assert lines[0] == "nDCG@2\tq1\t1.000000"
    assert lines[1] == "nDCG@2\tq2\t0.630930"
    assert lines[2] == "nDCG@2\tall\t0.815465"
    assert lines[-1] == "MRR@2\tall\t0.750000"
    assert "MRR@2\tq2\t0.500000" in lines
    out = tmp_path / "report.tsv"
    write_report(results, out)
    assert out.read_text() == report
