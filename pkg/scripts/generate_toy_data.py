"""Regenerate the committed toy corpus under data/toy/.

The corpus is a 64-document synthetic collection where document i carries
four signature tokens s{i}a..s{i}d. Training queries drop the last token,
held-out evaluation queries drop the first, so evaluation measures transfer
to unseen query strings over the same vocabulary. Output is deterministic;
running this script twice produces identical bytes.
"""

from __future__ import annotations

from pathlib import Path

N_DOCS = 64
N_QUERIES = 16
N_NEGATIVES = 7


def doc_id(i: int) -> str:
    return f"d{i:02d}"


def doc_text(i: int) -> str:
    return f"s{i}a s{i}b s{i}c s{i}d"


def train_query_text(i: int) -> str:
    return f"s{i}a s{i}b s{i}c"


def eval_query_text(i: int) -> str:
    return f"s{i}b s{i}c s{i}d"


def negative_indices(i: int) -> list[int]:
    # fixed stride pattern; never collides with i because 7j+5 != 0 (mod 64)
    return [(i + 7 * j + 5) % N_DOCS for j in range(1, N_NEGATIVES + 1)]


def main() -> None:
    out = Path(__file__).resolve().parents[1] / "data" / "toy"
    out.mkdir(parents=True, exist_ok=True)

    docs = [f"{doc_id(i)}\t{doc_text(i)}\n" for i in range(N_DOCS)]
    (out / "docs.tsv").write_text("".join(docs), encoding="utf-8")

    queries = [f"q{i}\t{eval_query_text(i)}\n" for i in range(N_QUERIES)]
    (out / "queries.tsv").write_text("".join(queries), encoding="utf-8")

    qrels = [f"q{i} 0 {doc_id(i)} 2\n" for i in range(N_QUERIES)]
    (out / "qrels.txt").write_text("".join(qrels), encoding="utf-8")

    tuples = []
    for i in range(N_DOCS):
        cells = [train_query_text(i), doc_text(i)]
        cells += [doc_text(j) for j in negative_indices(i)]
        tuples.append("\t".join(cells) + "\n")
    (out / "tuples.tsv").write_text("".join(tuples), encoding="utf-8")

    print(f"wrote {len(docs)} docs, {len(queries)} queries, "
          f"{len(qrels)} qrels, {len(tuples)} tuples to {out}")


if __name__ == "__main__":
    main()
