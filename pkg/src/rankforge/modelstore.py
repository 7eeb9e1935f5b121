"""Model persistence: a directory with `model.txt` and `tensors.bin`.

`model.txt` holds the config as ordered `key: value` lines; `tensors.bin`
holds the parameters. Saving the same model twice produces byte-identical
files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .binio import read_array_file, read_kv_file, write_array_file, write_kv_file
from .encoders import BiEncoderConfig, CrossEncoderConfig, ProjectionParams
from .errors import CorruptModelError
from .models import BiEncoder, CrossEncoder, Model

_MAGIC = b"TNSR0001"
_FORMAT_VERSION = "1"

MODEL_FILE = "model.txt"
TENSORS_FILE = "tensors.bin"


def save_model(model: Model, model_dir: Path) -> None:
    """Write a model directory (created if needed; files are overwritten)."""
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    items: list[tuple[str, str]] = [("format_version", _FORMAT_VERSION)]
    if isinstance(model, BiEncoder):
        cfg = model.config
        items += [
            ("kind", "bi_encoder"),
            ("name", model.name),
            ("backbone_dim", str(model.params.backbone_dim)),
            ("similarity_function", cfg.similarity_function.value),
            ("query_pooling", cfg.query_pooling.value),
            ("doc_pooling", cfg.doc_pooling.value),
            ("embedding_dim", str(cfg.embedding_dim)),
            ("output_kind", cfg.output_kind.value),
            ("sparsification", cfg.sparsification.value),
            ("vocab_size", str(cfg.vocab_size)),
            ("seed", str(cfg.seed)),
        ]
    else:
        cfg = model.config
        items += [
            ("kind", "cross_encoder"),
            ("name", model.name),
            ("backbone_dim", str(model.params.backbone_dim)),
            ("scoring_mode", cfg.scoring_mode.value),
            ("embedding_dim", str(cfg.embedding_dim)),
            ("seed", str(cfg.seed)),
        ]
    write_kv_file(model_dir / MODEL_FILE, items)
    arrays: list[tuple[str, np.ndarray]] = [
        ("WEIGHT", model.params.weight),
        ("BIAS", model.params.bias),
    ]
    if model.params.has_head:
        arrays.append(("HEADW", model.params.head_weights))
        arrays.append(("HEADB", np.array([model.params.head_bias], dtype=np.float32)))
    write_array_file(model_dir / TENSORS_FILE, _MAGIC, arrays)


def _require(meta: dict[str, str], key: str, path: Path) -> str:
    if key not in meta:
        raise CorruptModelError(f"{path}: missing key {key!r}")
    return meta[key]


def load_model(model_dir: Path) -> Model:
    """Load a model directory; raises CorruptModelError on any inconsistency."""
    model_dir = Path(model_dir)
    meta_path = model_dir / MODEL_FILE
    tensors_path = model_dir / TENSORS_FILE
    if not meta_path.is_file() or not tensors_path.is_file():
        raise CorruptModelError(f"{model_dir} is not a model directory")
    try:
        meta = read_kv_file(meta_path)
        tensors = read_array_file(tensors_path, _MAGIC)
    except ValueError as exc:
        raise CorruptModelError(str(exc)) from exc
    if meta.get("format_version") != _FORMAT_VERSION:
        raise CorruptModelError(f"{meta_path}: unsupported format_version")
    kind = _require(meta, "kind", meta_path)
    try:
        name = _require(meta, "name", meta_path)
        backbone_dim = int(_require(meta, "backbone_dim", meta_path))
        if kind == "bi_encoder":
            config = BiEncoderConfig(
                similarity_function=_require(meta, "similarity_function", meta_path),
                query_pooling=_require(meta, "query_pooling", meta_path),
                doc_pooling=_require(meta, "doc_pooling", meta_path),
                embedding_dim=int(_require(meta, "embedding_dim", meta_path)),
                output_kind=_require(meta, "output_kind", meta_path),
                sparsification=_require(meta, "sparsification", meta_path),
                vocab_size=int(_require(meta, "vocab_size", meta_path)),
                seed=int(_require(meta, "seed", meta_path)),
            )
            params = ProjectionParams(weight=tensors["WEIGHT"], bias=tensors["BIAS"])
            if set(tensors) != {"WEIGHT", "BIAS"}:
                raise CorruptModelError(f"{tensors_path}: unexpected tensor sections")
            model: Model = BiEncoder(config=config, params=params, name=name)
        elif kind == "cross_encoder":
            config = CrossEncoderConfig(
                scoring_mode=_require(meta, "scoring_mode", meta_path),
                embedding_dim=int(_require(meta, "embedding_dim", meta_path)),
                seed=int(_require(meta, "seed", meta_path)),
            )
            if set(tensors) != {"WEIGHT", "BIAS", "HEADW", "HEADB"}:
                raise CorruptModelError(f"{tensors_path}: unexpected tensor sections")
            if tensors["HEADB"].shape != (1,):
                raise CorruptModelError(f"{tensors_path}: HEADB must hold one scalar")
            params = ProjectionParams(
                weight=tensors["WEIGHT"],
                bias=tensors["BIAS"],
                head_weights=tensors["HEADW"],
                head_bias=float(tensors["HEADB"][0]),
            )
            model = CrossEncoder(config=config, params=params, name=name)
        else:
            raise CorruptModelError(f"{meta_path}: unknown kind {kind!r}")
    except CorruptModelError:
        raise
    except (KeyError, ValueError) as exc:
        raise CorruptModelError(f"{model_dir}: {exc}") from exc
    if params.backbone_dim != backbone_dim:
        raise CorruptModelError(
            f"{model_dir}: backbone_dim {backbone_dim} does not match tensors"
        )
    return model
