"""HTTP service exposing the pipeline stages.

The service wraps the same stage runners the CLI uses. Requests carry a full
pipeline config (the parsed YAML mapping) plus a `force` flag; responses are
the stage outcome schemas. Domain errors map to HTTP 4xx with the error
category, so clients can react programmatically.
"""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .config import ModelBlock, validate_config
from .datasets import read_qrels, read_run
from .errors import ConfigValidationError, RankForgeError
from .metrics import evaluate
from .pipeline import (
    FitOutcome,
    IndexOutcome,
    ReRankOutcome,
    SearchOutcome,
    materialize_model,
    run_fit,
    run_index,
    run_re_rank,
    run_search,
)


class StageRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    config: dict[str, Any] = Field(default_factory=dict)
    force: bool = False


class ScoreRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model: ModelBlock
    query: str
    docs: list[str] = Field(min_length=1)
    seed: int = 0


class ScoreResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_name: str
    scores: list[float]


class EvaluateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    run_path: str
    qrels_path: str
    metrics: list[str] = Field(min_length=1)


class EvaluateResponse(BaseModel):
    metric_means: dict[str, float]
    per_query: dict[str, dict[str, float]]


class HealthResponse(BaseModel):
    status: str
    version: str


def create_app() -> FastAPI:
    app = FastAPI(title="rankforge", version=__version__)

    @app.exception_handler(RankForgeError)
    async def handle_domain_error(request: Request, exc: RankForgeError) -> JSONResponse:
        status = 422 if isinstance(exc, ConfigValidationError) else 400
        return JSONResponse(
            status_code=status,
            content={"category": exc.category, "message": str(exc)},
        )

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/fit", response_model=FitOutcome)
    async def fit_stage(request: StageRequest) -> FitOutcome:
        return run_fit(validate_config(request.config), force=request.force)

    @app.post("/index", response_model=IndexOutcome)
    async def index_stage(request: StageRequest) -> IndexOutcome:
        return run_index(validate_config(request.config), force=request.force)

    @app.post("/search", response_model=SearchOutcome)
    async def search_stage(request: StageRequest) -> SearchOutcome:
        return run_search(validate_config(request.config), force=request.force)

    @app.post("/re_rank", response_model=ReRankOutcome)
    async def re_rank_stage(request: StageRequest) -> ReRankOutcome:
        return run_re_rank(validate_config(request.config), force=request.force)

    @app.post("/score", response_model=ScoreResponse)
    async def score(request: ScoreRequest) -> ScoreResponse:
        model = materialize_model(request.model, request.seed)
        return ScoreResponse(model_name=model.name, scores=model.score(request.query, request.docs))

    @app.post("/evaluate", response_model=EvaluateResponse)
    async def evaluate_run(request: EvaluateRequest) -> EvaluateResponse:
        run = read_run(request.run_path)
        qrels = read_qrels(request.qrels_path)
        try:
            results = evaluate(run, qrels, request.metrics)
        except ValueError as exc:
            raise ConfigValidationError(str(exc), "metrics") from exc
        return EvaluateResponse(
            metric_means={name: mean for name, _, mean in results},
            per_query={name: per_query for name, per_query, _ in results},
        )

    return app
