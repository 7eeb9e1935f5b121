"""Regenerate the committed binary fixtures under tests/fixtures/.

Fixtures are produced entirely by the package's own writers from fixed
seeds, so the round-trip tests can assert that a load/save cycle
reproduces the committed bytes exactly. Running this script twice in a
row must produce identical output.
"""

from __future__ import annotations

import shutil
from pathlib import Path

from rankforge import (
    BiEncoderConfig,
    CrossEncoderConfig,
    SearchConfig,
    batch_search,
    build_index,
    new_bi_encoder,
    new_cross_encoder,
    save_index,
    save_model,
)
from rankforge.datasets import write_qrels, write_run
from rankforge.types import DocRecord, QueryRecord, Qrels

DOCS = [
    DocRecord("fd0", "alpha beta gamma"),
    DocRecord("fd1", "beta gamma delta"),
    DocRecord("fd2", "gamma delta epsilon zeta"),
    DocRecord("fd3", "alpha"),
    DocRecord("fd4", "zeta eta theta alpha beta"),
    DocRecord("fd5", "iota kappa"),
    DocRecord("fd6", "delta delta beta"),
    DocRecord("fd7", "theta iota alpha gamma"),
]

QUERIES = [
    QueryRecord("fq0", "alpha beta"),
    QueryRecord("fq1", "gamma delta"),
    QueryRecord("fq2", "kappa theta"),
]


def main() -> None:
    root = Path(__file__).resolve().parents[1] / "tests" / "fixtures"
    if root.exists():
        shutil.rmtree(root)
    root.mkdir(parents=True)

    dense = new_bi_encoder(
        BiEncoderConfig(similarity_function="cosine", embedding_dim=16, seed=5),
        backbone_dim=32,
        name="fixture-dense",
    )
    sparse = new_bi_encoder(
        BiEncoderConfig(
            output_kind="sparse", sparsification="log1p_relu", vocab_size=64, seed=6
        ),
        backbone_dim=32,
        name="fixture-sparse",
    )
    multi = new_bi_encoder(
        BiEncoderConfig(
            output_kind="multi_vector",
            query_pooling="none",
            doc_pooling="none",
            embedding_dim=8,
            seed=9,
        ),
        backbone_dim=32,
        name="fixture-multi",
    )
    cross = new_cross_encoder(
        CrossEncoderConfig(embedding_dim=16, seed=21), backbone_dim=32, name="fixture-cross"
    )

    for model, sub in [(dense, "dense_index"), (sparse, "sparse_index"), (multi, "multi_index")]:
        save_index(build_index(DOCS, model), root / sub)

    save_model(dense, root / "bi_model")
    save_model(cross, root / "cross_model")

    index = build_index(DOCS, dense)
    result = batch_search(index, QUERIES, dense, SearchConfig(k=5))
    write_run(result.run, root / "sample.run")

    qrels = Qrels(
        {
            ("fq0", "fd0"): 2,
            ("fq0", "fd3"): 1,
            ("fq0", "fd5"): 0,
            ("fq1", "fd1"): 3,
            ("fq1", "fd2"): 1,
            ("fq2", "fd5"): 2,
            ("fq2", "fd7"): 1,
        }
    )
    write_qrels(qrels, root / "sample.qrels")

    print(f"wrote fixtures to {root}")


if __name__ == "__main__":
    main()
