"""YAML pipeline configuration: schema, merging, overrides, serialization.

A pipeline config is a nested mapping with `class_path`/`init_args` blocks
for the polymorphic pieces (model, datasets, trainer callbacks) and flat
blocks for the singletons (data, trainer). Multiple YAML files merge
mapping-wise with later files winning; `--dotted.key=value` overrides win
over files. Every command serializes the fully resolved result as
`effective-config.yaml` next to its primary output.
"""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Any, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigValidationError


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())


class ConfigBlock(StrictModel):
    class_path: Literal["BiEncoderConfig", "CrossEncoderConfig"]
    init_args: dict[str, Any] = Field(default_factory=dict)


class ModelArgs(StrictModel):
    model_dir: str | None = None
    name: str | None = None
    backbone_dim: int = 64
    config: ConfigBlock | None = None


class ModelBlock(StrictModel):
    class_path: Literal["BiEncoder", "CrossEncoder"]
    init_args: ModelArgs = Field(default_factory=ModelArgs)


class DatasetArgs(StrictModel):
    path: str
    format: str | None = None
    sample_n: int | None = None
    sample_seed: int | None = None


class DatasetBlock(StrictModel):
    class_path: Literal["DocDataset", "QueryDataset", "TupleDataset", "RunDataset"]
    init_args: DatasetArgs


class DataBlock(StrictModel):
    train_dataset: DatasetBlock | None = None
    doc_dataset: DatasetBlock | None = None
    query_dataset: DatasetBlock | None = None
    run_dataset: DatasetBlock | None = None
    qrels_path: str | None = None


class IndexActionArgs(StrictModel):
    index_dir: str


class SearchActionArgs(StrictModel):
    index_dir: str
    run_path: str
    k: int = 10
    candidate_k: int | None = None
    evaluation_metrics: list[str] = Field(default_factory=list)
    report_path: str | None = None


class ReRankActionArgs(StrictModel):
    run_path: str
    depth: int | None = None
    evaluation_metrics: list[str] = Field(default_factory=list)
    report_path: str | None = None


class IndexCallback(StrictModel):
    class_path: Literal["IndexAction"]
    init_args: IndexActionArgs


class SearchCallback(StrictModel):
    class_path: Literal["SearchAction"]
    init_args: SearchActionArgs


class ReRankCallback(StrictModel):
    class_path: Literal["ReRankAction"]
    init_args: ReRankActionArgs


CallbackBlock = Annotated[
    Union[IndexCallback, SearchCallback, ReRankCallback],
    Field(discriminator="class_path"),
]


class TrainerBlock(StrictModel):
    loss: str | None = None
    temperature: float = 1.0
    learning_rate: float = 0.001
    epochs: int = 1
    batch_size: int = 1
    seed: int | None = None
    output_dir: str | None = None
    callbacks: list[CallbackBlock] = Field(default_factory=list)


class PipelineConfig(StrictModel):
    seed: int = 0
    threads: int = 1
    model: ModelBlock | None = None
    data: DataBlock = Field(default_factory=DataBlock)
    trainer: TrainerBlock = Field(default_factory=TrainerBlock)


def _deep_merge(base: dict, extra: dict) -> dict:
    """Mapping-wise merge; scalars and lists in `extra` replace `base`."""
    out = dict(base)
    for key, value in extra.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config_files(paths: list[str | Path]) -> dict:
    """Parse and merge YAML files in order; later files win key-by-key."""
    merged: dict = {}
    for path in paths:
        path = Path(path)
        if not path.is_file():
            raise ConfigValidationError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigValidationError(f"{path}: invalid YAML: {exc}") from exc
        if raw is None:
            continue
        if not isinstance(raw, dict):
            raise ConfigValidationError(f"{path}: top level must be a mapping")
        merged = _deep_merge(merged, raw)
    return merged


def parse_override(text: str) -> tuple[str, Any]:
    """Split `dotted.key=value`; the value is parsed as YAML."""
    if "=" not in text:
        raise ConfigValidationError(f"override {text!r} must look like key=value")
    key, _, raw_value = text.partition("=")
    key = key.strip().lstrip("-")
    if not key:
        raise ConfigValidationError(f"override {text!r} has an empty key")
    try:
        value = yaml.safe_load(raw_value) if raw_value != "" else ""
    except yaml.YAMLError as exc:
        raise ConfigValidationError(f"override {key}: invalid value {raw_value!r}") from exc
    return key, value


def set_config_path(root: dict, dotted: str, value: Any) -> None:
    """Set a dotted key, descending transparently through `init_args`.

    `model.config.embedding_dim` and
    `model.init_args.config.init_args.embedding_dim` address the same slot.
    List elements are addressed by integer position
    (`trainer.callbacks.0.k`). Missing mapping levels are created.
    """
    parts = dotted.split(".")
    cur: Any = root
    for i, part in enumerate(parts):
        where = ".".join(parts[: i + 1])
        last = i == len(parts) - 1
        if isinstance(cur, list):
            if not part.lstrip("-").isdigit():
                raise ConfigValidationError(f"expected a list index, got {part!r}", where)
            idx = int(part)
            if not 0 <= idx < len(cur):
                raise ConfigValidationError(f"list index {idx} out of range", where)
            if last:
                cur[idx] = value
                return
            cur = cur[idx]
            continue
        if not isinstance(cur, dict):
            raise ConfigValidationError("cannot descend into a scalar", ".".join(parts[:i]))
        if part == "init_args" and part not in cur:
            if last:
                raise ConfigValidationError("cannot assign to init_args directly", where)
            continue
        if last:
            target = cur
            if part not in cur and isinstance(cur.get("init_args"), dict):
                target = cur["init_args"]
            target[part] = value
            return
        if part in cur:
            cur = cur[part]
        elif isinstance(cur.get("init_args"), dict) and part in cur["init_args"]:
            cur = cur["init_args"][part]
        else:
            nxt: dict = {}
            cur[part] = nxt
            cur = nxt


def validate_config(raw: dict) -> PipelineConfig:
    """Validate a merged mapping; failures name the offending key path."""
    try:
        return PipelineConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        key_path = ".".join(str(piece) for piece in first["loc"])
        raise ConfigValidationError(first["msg"], key_path or None) from exc


def resolve_config(
    config_paths: list[str | Path],
    overrides: list[str] | None = None,
    seed: int | None = None,
    threads: int | None = None,
) -> PipelineConfig:
    """Files, then dotted overrides, then explicit seed/threads flags."""
    raw = load_config_files(config_paths)
    for text in overrides or []:
        key, value = parse_override(text)
        set_config_path(raw, key, value)
    if seed is not None:
        raw["seed"] = seed
    if threads is not None:
        raw["threads"] = threads
    return validate_config(raw)


def dump_effective_config(config: PipelineConfig) -> str:
    """Canonical YAML of the resolved config: sorted keys, no timestamps,
    paths exactly as configured."""
    data = config.model_dump(mode="json", exclude_none=True)
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=False)


EFFECTIVE_CONFIG_NAME = "effective-config.yaml"


def write_effective_config(config: PipelineConfig, directory: Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = directory / EFFECTIVE_CONFIG_NAME
    out.write_text(dump_effective_config(config), encoding="utf-8")
    return out
