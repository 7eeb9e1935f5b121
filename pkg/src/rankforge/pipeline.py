"""Stage runners: fit, index, search, re_rank as config-driven operations.

Each runner materializes what it needs from a validated PipelineConfig,
executes the stage, writes its outputs plus an effective-config.yaml, and
returns a summary object (also used as the HTTP response schema). Existing
primary outputs are only overwritten when `force` is set.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from pydantic import BaseModel

from .config import (
    DatasetBlock,
    ModelBlock,
    PipelineConfig,
    write_effective_config,
)
from .datasets import (
    DataFormat,
    DatasetKind,
    DatasetSpec,
    read_docs,
    read_qrels,
    read_queries,
    read_run,
    read_tuples,
    tuples_from_run,
    write_run,
)
from .encoders import BiEncoderConfig, CrossEncoderConfig, ScoringMode
from .errors import ConfigConflictError, ConfigValidationError
from .indexes import build_index, load_index, save_index
from .metrics import evaluate, render_report, write_report
from .models import BiEncoder, CrossEncoder, Model, new_bi_encoder, new_cross_encoder
from .modelstore import load_model, save_model
from .reranking import re_rank
from .searchers import SearchConfig, batch_search
from .training import FitResult, LossKind, TrainConfig, fit
from .types import Run

DEFAULT_SAMPLE_N = 4


class FitOutcome(BaseModel):
    model_dir: str
    steps: int
    epochs: int
    final_loss: float
    loss_trace_path: str
    sample_count: int


class IndexOutcome(BaseModel):
    index_dir: str
    kind: str
    doc_count: int


class SearchOutcome(BaseModel):
    run_path: str
    query_count: int
    skipped_queries: list[str]
    metric_means: dict[str, float]
    report: str | None = None
    report_path: str | None = None


class ReRankOutcome(BaseModel):
    run_path: str
    query_count: int
    depth: int | None
    tag: str
    metric_means: dict[str, float]
    report: str | None = None
    report_path: str | None = None


def _require(value, key_path: str, what: str):
    if value is None:
        raise ConfigValidationError(f"{what} is required", key_path)
    return value


def _check_overwrite_dir(path: Path, force: bool, key_path: str) -> None:
    if path.exists() and any(path.iterdir() if path.is_dir() else [path]) and not force:
        raise ConfigValidationError(
            f"output {path} already exists; pass --force to overwrite", key_path
        )


def _check_overwrite_file(path: Path, force: bool, key_path: str) -> None:
    if path.exists() and not force:
        raise ConfigValidationError(
            f"output {path} already exists; pass --force to overwrite", key_path
        )


def _dataset_spec(block: DatasetBlock, kind: DatasetKind, key_path: str) -> DatasetSpec:
    expected = {
        DatasetKind.DOC: "DocDataset",
        DatasetKind.QUERY: "QueryDataset",
        DatasetKind.TUPLE: "TupleDataset",
        DatasetKind.RUN: "RunDataset",
    }[kind]
    if block.class_path != expected:
        raise ConfigValidationError(
            f"expected a {expected} block, got {block.class_path}", key_path
        )
    try:
        return DatasetSpec(
            kind=kind,
            path=Path(block.init_args.path),
            format=DataFormat(block.init_args.format) if block.init_args.format else None,
        )
    except ValueError as exc:
        raise ConfigValidationError(str(exc), key_path) from exc


def materialize_model(block: ModelBlock | None, default_seed: int) -> Model:
    """Load a model directory or build a fresh model from its config block."""
    block = _require(block, "model", "a model block")
    args = block.init_args
    if args.model_dir is not None:
        model = load_model(Path(args.model_dir))
        loaded_kind = "BiEncoder" if isinstance(model, BiEncoder) else "CrossEncoder"
        if loaded_kind != block.class_path:
            raise ConfigValidationError(
                f"model directory holds a {loaded_kind}, config says {block.class_path}",
                "model.class_path",
            )
        if args.name is not None:
            model = replace(model, name=args.name)
        return model
    config_block = _require(args.config, "model.init_args.config", "a config block (or model_dir)")
    raw = dict(config_block.init_args)
    raw.setdefault("seed", default_seed)
    if block.class_path == "BiEncoder":
        if config_block.class_path != "BiEncoderConfig":
            raise ConfigValidationError(
                "BiEncoder requires a BiEncoderConfig", "model.init_args.config.class_path"
            )
        try:
            config = BiEncoderConfig(**raw)
        except (TypeError, ValueError) as exc:
            raise ConfigValidationError(str(exc), "model.init_args.config.init_args") from exc
        return new_bi_encoder(config, args.backbone_dim, args.name or "bi-encoder")
    if config_block.class_path != "CrossEncoderConfig":
        raise ConfigValidationError(
            "CrossEncoder requires a CrossEncoderConfig", "model.init_args.config.class_path"
        )
    try:
        config = CrossEncoderConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(str(exc), "model.init_args.config.init_args") from exc
    return new_cross_encoder(config, args.backbone_dim, args.name or "cross-encoder")


def _read_lookup(block: DatasetBlock | None, kind: DatasetKind, key_path: str) -> dict[str, str]:
    block = _require(block, key_path, f"a {kind.value} dataset")
    spec = _dataset_spec(block, kind, key_path)
    if kind is DatasetKind.DOC:
        return {record.doc_id: record.text for record in read_docs(spec)}
    return {record.query_id: record.text for record in read_queries(spec)}


def _training_samples(config: PipelineConfig, default_seed: int) -> list:
    block = _require(config.data.train_dataset, "data.train_dataset", "a training dataset")
    if block.class_path == "TupleDataset":
        spec = _dataset_spec(block, DatasetKind.TUPLE, "data.train_dataset")
        return list(read_tuples(spec))
    if block.class_path == "RunDataset":
        spec = _dataset_spec(block, DatasetKind.RUN, "data.train_dataset")
        qrels_path = _require(config.data.qrels_path, "data.qrels_path", "a qrels path")
        run = read_run(spec.path)
        qrels = read_qrels(Path(qrels_path))
        queries = _read_lookup(config.data.query_dataset, DatasetKind.QUERY, "data.query_dataset")
        docs = _read_lookup(config.data.doc_dataset, DatasetKind.DOC, "data.doc_dataset")
        n = block.init_args.sample_n or DEFAULT_SAMPLE_N
        seed = block.init_args.sample_seed if block.init_args.sample_seed is not None else default_seed
        return list(tuples_from_run(run, qrels, queries, docs, n=n, seed=seed))
    raise ConfigValidationError(
        "training data must be a TupleDataset or a RunDataset", "data.train_dataset.class_path"
    )


def _resolve_loss(config: PipelineConfig, model: Model) -> LossKind:
    if config.trainer.loss is not None:
        try:
            return LossKind(config.trainer.loss)
        except ValueError as exc:
            raise ConfigValidationError(str(exc), "trainer.loss") from exc
    if isinstance(model, CrossEncoder) and model.config.scoring_mode is ScoringMode.LISTWISE:
        return LossKind.LISTWISE_CE
    return LossKind.INFONCE


def _write_loss_trace(result: FitResult, model_dir: Path) -> Path:
    trace_path = model_dir.parent / f"{model_dir.name}.loss.csv"
    lines = ["epoch,mean_loss\n"]
    lines += [f"{epoch},{loss:.12g}\n" for epoch, loss in enumerate(result.loss_trace, 1)]
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    trace_path.write_text("".join(lines), encoding="utf-8")
    return trace_path


def run_fit(config: PipelineConfig, force: bool = False) -> FitOutcome:
    """Fine-tune the configured model and save it to trainer.output_dir."""
    output_dir = Path(_require(config.trainer.output_dir, "trainer.output_dir", "an output directory"))
    _check_overwrite_dir(output_dir, force, "trainer.output_dir")
    model = materialize_model(config.model, config.seed)
    samples = _training_samples(config, config.seed)
    try:
        train_config = TrainConfig(
            loss=_resolve_loss(config, model),
            temperature=config.trainer.temperature,
            learning_rate=config.trainer.learning_rate,
            epochs=config.trainer.epochs,
            batch_size=config.trainer.batch_size,
            seed=config.trainer.seed if config.trainer.seed is not None else config.seed,
        )
    except ValueError as exc:
        raise ConfigValidationError(str(exc), "trainer") from exc
    result = fit(samples, model.config, model.params, train_config)
    trained = replace(model, params=result.params)
    save_model(trained, output_dir)
    trace_path = _write_loss_trace(result, output_dir)
    write_effective_config(config, output_dir)
    return FitOutcome(
        model_dir=str(output_dir),
        steps=result.steps,
        epochs=len(result.loss_trace),
        final_loss=result.loss_trace[-1],
        loss_trace_path=str(trace_path),
        sample_count=len(samples),
    )


def _single_callback(config: PipelineConfig, class_path: str, command: str):
    found = [cb for cb in config.trainer.callbacks if cb.class_path == class_path]
    if len(found) != 1:
        raise ConfigValidationError(
            f"the {command} command needs exactly one {class_path} block, found {len(found)}",
            "trainer.callbacks",
        )
    return found[0].init_args


def run_index(config: PipelineConfig, force: bool = False) -> IndexOutcome:
    """Encode the doc dataset and save the index."""
    args = _single_callback(config, "IndexAction", "index")
    index_dir = Path(args.index_dir)
    _check_overwrite_dir(index_dir, force, "trainer.callbacks")
    model = materialize_model(config.model, config.seed)
    if not isinstance(model, BiEncoder):
        raise ConfigConflictError("indexing requires a bi-encoder model")
    block = _require(config.data.doc_dataset, "data.doc_dataset", "a doc dataset")
    spec = _dataset_spec(block, DatasetKind.DOC, "data.doc_dataset")
    index = build_index(read_docs(spec), model, threads=config.threads)
    save_index(index, index_dir)
    write_effective_config(config, index_dir)
    return IndexOutcome(index_dir=str(index_dir), kind=index.kind, doc_count=len(index.doc_ids))


def _evaluate_run(run: Run, config: PipelineConfig, metric_names, report_path, key_path: str):
    if not metric_names:
        return {}, None, None
    qrels_path = _require(config.data.qrels_path, "data.qrels_path", "a qrels path")
    try:
        results = evaluate(run, read_qrels(Path(qrels_path)), metric_names)
    except ValueError as exc:
        raise ConfigValidationError(str(exc), key_path) from exc
    report_text = render_report(results)
    written: str | None = None
    if report_path is not None:
        write_report(results, Path(report_path))
        written = str(report_path)
    means = {name: mean for name, _, mean in results}
    return means, report_text, written


def run_search(config: PipelineConfig, force: bool = False) -> SearchOutcome:
    """Retrieve for the query dataset against a saved index, write a run."""
    args = _single_callback(config, "SearchAction", "search")
    run_path = Path(args.run_path)
    _check_overwrite_file(run_path, force, "trainer.callbacks")
    if args.report_path is not None:
        _check_overwrite_file(Path(args.report_path), force, "trainer.callbacks")
    index = load_index(Path(args.index_dir))
    model = materialize_model(config.model, config.seed)
    if not isinstance(model, BiEncoder):
        raise ConfigConflictError("first-stage search requires a bi-encoder model")
    block = _require(config.data.query_dataset, "data.query_dataset", "a query dataset")
    spec = _dataset_spec(block, DatasetKind.QUERY, "data.query_dataset")
    try:
        search_config = SearchConfig(k=args.k, candidate_k=args.candidate_k)
    except ValueError as exc:
        raise ConfigValidationError(str(exc), "trainer.callbacks") from exc
    result = batch_search(index, read_queries(spec), model, search_config, threads=config.threads)
    write_run(result.run, run_path)
    write_effective_config(config, run_path.parent)
    means, report_text, report_written = _evaluate_run(
        result.run, config, args.evaluation_metrics, args.report_path, "trainer.callbacks"
    )
    return SearchOutcome(
        run_path=str(run_path),
        query_count=len(result.run),
        skipped_queries=list(result.skipped),
        metric_means=means,
        report=report_text,
        report_path=report_written,
    )


def run_re_rank(config: PipelineConfig, force: bool = False) -> ReRankOutcome:
    """Re-score the top of an existing run and write the re-ranked run."""
    args = _single_callback(config, "ReRankAction", "re_rank")
    out_path = Path(args.run_path)
    _check_overwrite_file(out_path, force, "trainer.callbacks")
    if args.report_path is not None:
        _check_overwrite_file(Path(args.report_path), force, "trainer.callbacks")
    block = _require(config.data.run_dataset, "data.run_dataset", "an input run dataset")
    spec = _dataset_spec(block, DatasetKind.RUN, "data.run_dataset")
    run = read_run(spec.path)
    queries = _read_lookup(config.data.query_dataset, DatasetKind.QUERY, "data.query_dataset")
    docs = _read_lookup(config.data.doc_dataset, DatasetKind.DOC, "data.doc_dataset")
    model = materialize_model(config.model, config.seed)
    reranked = re_rank(run, queries, docs, model, depth=args.depth, threads=config.threads)
    write_run(reranked, out_path)
    write_effective_config(config, out_path.parent)
    means, report_text, report_written = _evaluate_run(
        reranked, config, args.evaluation_metrics, args.report_path, "trainer.callbacks"
    )
    return ReRankOutcome(
        run_path=str(out_path),
        query_count=len(reranked),
        depth=args.depth,
        tag=reranked.tag,
        metric_means=means,
        report=report_text,
        report_path=report_written,
    )
