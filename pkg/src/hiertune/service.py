"""HTTP service wrapping the tuner: experiments, sweeps, tree dumps, validation.

The CLI is a thin client of this app (in-process by default); remote
deployments run it under uvicorn. Request and response bodies mirror the
JSON documents used on disk, so a saved config file is a valid request
payload.
"""

from __future__ import annotations

from typing import Any, Literal, Optional, Union

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import experiments
from .errors import HierTuneError
from .hierarchy import build_tree
from .objectives import builtin_objective
from .space import SearchSpace, validate_assignment

ValueT = Union[float, str]


class ParamModel(BaseModel):
    name: str
    kind: Literal["real", "nominal"]
    lo: Optional[float] = None
    hi: Optional[float] = None
    scale: Literal["linear", "log10"] = "linear"
    values: Optional[list[str]] = None

    def to_document(self) -> dict[str, Any]:
        if self.kind == "real":
            return {"name": self.name, "kind": "real", "lo": self.lo, "hi": self.hi, "scale": self.scale}
        return {"name": self.name, "kind": "nominal", "values": self.values or []}


class SpaceModel(BaseModel):
    params: list[ParamModel]
    objective: list[str]
    fixed: dict[str, ValueT] = Field(default_factory=dict)

    def to_space(self) -> SearchSpace:
        return SearchSpace.from_document(
            {
                "params": [p.to_document() for p in self.params],
                "objective": self.objective,
                "fixed": self.fixed,
            }
        )


class ExperimentRequest(BaseModel):
    objective: str
    methods: list[str] = ["grat"]
    eta: int = 10
    omega: int = 3
    c: int = 2
    iterations: int = 15
    trials: int = 1
    seed: int = 0
    budget_mode: Literal["formula", "measured"] = "formula"
    omega_policy: str = "fixed"
    workers: int = 1
    space: Optional[SpaceModel] = None
    initial: Optional[dict[str, ValueT]] = None
    patience: Optional[int] = None
    target: Optional[float] = None
    trace: bool = False

    def to_config(self) -> experiments.ExperimentConfig:
        return experiments.ExperimentConfig(
            objective=self.objective,
            methods=tuple(self.methods),
            eta=self.eta,
            omega=self.omega,
            c=self.c,
            iterations=self.iterations,
            trials=self.trials,
            seed=self.seed,
            budget_mode=self.budget_mode,
            omega_policy=self.omega_policy,
            workers=self.workers,
            space=self.space.to_space() if self.space is not None else None,
            initial=dict(self.initial) if self.initial is not None else None,
            patience=self.patience,
            target=self.target,
            trace=self.trace,
        )


class RowModel(BaseModel):
    trial: int
    method: str
    objective: str
    eta: int
    omega: int
    iters: int
    best: float
    evals: int
    last_best_iter: int


class SummaryModel(BaseModel):
    method: str
    trials: int
    mean_best: float
    se_best: float
    ci95_lo: float
    ci95_hi: float
    mean_evals: float
    mean_last_best_iter: float


class ExperimentResponse(BaseModel):
    config: dict[str, Any]
    rows: list[RowModel]
    summary: list[SummaryModel]
    csv: str
    traces: Optional[dict[str, list[str]]] = None


class SweepRequest(BaseModel):
    axis: Literal["eta", "iterations"]
    values: list[int]
    run: ExperimentRequest


class SweepResponse(BaseModel):
    axis: str
    values: list[int]
    runs: list[ExperimentResponse]
    csv: str


class TreeRequest(BaseModel):
    objective: Optional[str] = None
    space: Optional[SpaceModel] = None
    c: int = 2
    budget: Optional[int] = None


class NodeModel(BaseModel):
    id: int
    level: int
    primary: list[str]
    complement: list[str]
    children: list[int]


class TreeResponse(BaseModel):
    nodes: list[NodeModel]


class ValidateRequest(BaseModel):
    space: SpaceModel
    assignment: dict[str, ValueT]


class ViolationModel(BaseModel):
    name: str
    reason: str


class ValidateResponse(BaseModel):
    ok: bool
    violations: list[ViolationModel]


class ObjectivesResponse(BaseModel):
    objectives: list[str]


def _experiment_response(result: experiments.ExperimentResult) -> ExperimentResponse:
    return ExperimentResponse(
        config=result.config.to_document(),
        rows=[RowModel(**r.to_document()) for r in result.rows],
        summary=[SummaryModel(**s.to_document()) for s in result.summary],
        csv=result.csv(),
        traces=(
            {str(t): lines for t, lines in sorted(result.traces.items())}
            if result.traces
            else None
        ),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="hiertune", version="0.1.0")

    @app.exception_handler(HierTuneError)
    async def _domain_error(_, exc: HierTuneError):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/objectives", response_model=ObjectivesResponse)
    def objectives() -> ObjectivesResponse:
        return ObjectivesResponse(objectives=list(experiments.known_objectives()))

    @app.post("/space/validate", response_model=ValidateResponse)
    def space_validate(request: ValidateRequest) -> ValidateResponse:
        space = request.space.to_space()
        violations = validate_assignment(space, request.assignment)
        return ValidateResponse(
            ok=not violations,
            violations=[ViolationModel(name=v.name, reason=v.reason) for v in violations],
        )

    @app.post("/hierarchy/tree", response_model=TreeResponse)
    def hierarchy_tree(request: TreeRequest) -> TreeResponse:
        if request.space is not None:
            space = request.space.to_space()
        elif request.objective is not None:
            space = builtin_objective(request.objective).space
        else:
            raise HTTPException(status_code=400, detail="tree request needs a space or an objective")
        tree = build_tree(space, request.c, request.budget)
        return TreeResponse(nodes=[NodeModel(**n) for n in tree.to_document()["nodes"]])

    @app.post("/experiments/run", response_model=ExperimentResponse)
    def experiments_run(request: ExperimentRequest) -> ExperimentResponse:
        result = experiments.run_experiment(request.to_config())
        return _experiment_response(result)

    @app.post("/experiments/sweep", response_model=SweepResponse)
    def experiments_sweep(request: SweepRequest) -> SweepResponse:
        result = experiments.sweep(request.run.to_config(), request.axis, list(request.values))
        return SweepResponse(
            axis=result.axis,
            values=list(result.values),
            runs=[_experiment_response(r) for r in result.runs],
            csv=result.csv(),
        )

    return app


app = create_app()
