"""Multi-trial experiment runner: method comparison, statistics, CSV/JSON artifacts.

A run executes `trials` independent repetitions per method; trial t draws
its seeds from hash(master seed, t), so results are reproducible byte for
byte no matter how many workers execute trials concurrently. Budget parity
between methods is either the closed-form c*eta*iterations or the fresh
evaluation count the guided run actually used (`measured`).
"""

from __future__ import annotations

import csv
import io
import math
import random
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

from .baselines import latin_hypercube, random_search
from .errors import UsageError
from .extproc import spawn_evaluator
from .grat import parse_omega_policy
from .hierarchy import TuningQuery, build_hierarchy
from .objectives import BUILTIN_OBJECTIVES, EvaluationLedger, ObjectiveHandle, builtin_objective
from .runtime import StopCriteria, TuningReport, tune
from .seeding import derive_seed
from .space import Assignment, SearchSpace, sample_uniform_assignment

METHODS = ("grat", "random", "lhs")
BUDGET_MODES = ("formula", "measured")

CSV_HEADER = ("trial", "method", "objective", "eta", "omega", "iters", "best", "evals", "last_best_iter")

EXTPROC_PREFIX = "extproc:"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an objective, the methods to compare, and the run shape."""

    objective: str
    methods: tuple[str, ...] = ("grat",)
    eta: int = 10
    omega: int = 3
    c: int = 2
    iterations: int = 15
    trials: int = 1
    seed: int = 0
    budget_mode: str = "formula"
    omega_policy: str = "fixed"
    workers: int = 1
    space: SearchSpace | None = None
    initial: Assignment | None = None
    patience: int | None = None
    target: float | None = None
    trace: bool = False

    def __post_init__(self) -> None:
        if not self.objective:
            raise UsageError("config needs an objective")
        if not self.methods:
            raise UsageError("config needs at least one method")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise UsageError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise UsageError("methods must not repeat")
        if self.budget_mode not in BUDGET_MODES:
            raise UsageError(f"budget mode must be one of {list(BUDGET_MODES)}")
        if self.budget_mode == "measured" and "grat" not in self.methods:
            raise UsageError("measured budget mode needs grat among the methods")
        for name, value, low in (
            ("eta", self.eta, 1),
            ("omega", self.omega, 1),
            ("c", self.c, 2),
            ("iterations", self.iterations, 1),
            ("trials", self.trials, 1),
            ("workers", self.workers, 1),
        ):
            if value < low:
                raise UsageError(f"{name} must be >= {low}, got {value}")
        parse_omega_policy(self.omega_policy)
        if self.objective.startswith(EXTPROC_PREFIX) and self.space is None:
            raise UsageError("extproc objectives need a search-space document in the config")

    def to_document(self) -> dict[str, Any]:
        return {
            "objective": self.objective,
            "methods": list(self.methods),
            "eta": self.eta,
            "omega": self.omega,
            "c": self.c,
            "iterations": self.iterations,
            "trials": self.trials,
            "seed": self.seed,
            "budget_mode": self.budget_mode,
            "omega_policy": self.omega_policy,
            "workers": self.workers,
            "space": self.space.to_document() if self.space is not None else None,
            "initial": dict(self.initial) if self.initial is not None else None,
            "patience": self.patience,
            "target": self.target,
        }


@dataclass(frozen=True)
class TrialRow:
    """One CSV row: the outcome of one method on one trial."""

    trial: int
    method: str
    objective: str
    eta: int
    omega: int
    iters: int
    best: float
    evals: int
    last_best_iter: int

    def as_tuple(self) -> tuple:
        return (
            self.trial,
            self.method,
            self.objective,
            self.eta,
            self.omega,
            self.iters,
            self.best,
            self.evals,
            self.last_best_iter,
        )

    def to_document(self) -> dict[str, Any]:
        return dict(zip(CSV_HEADER, self.as_tuple()))


@dataclass(frozen=True)
class MethodSummary:
    """Per-method statistics over trials (normal-approximation 95% interval)."""

    method: str
    trials: int
    mean_best: float
    se_best: float
    ci95_lo: float
    ci95_hi: float
    mean_evals: float
    mean_last_best_iter: float

    def to_document(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "trials": self.trials,
            "mean_best": self.mean_best,
            "se_best": self.se_best,
            "ci95_lo": self.ci95_lo,
            "ci95_hi": self.ci95_hi,
            "mean_evals": self.mean_evals,
            "mean_last_best_iter": self.mean_last_best_iter,
        }


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: tuple[TrialRow, ...]
    summary: tuple[MethodSummary, ...]
    traces: dict[int, list[str]] = field(default_factory=dict)

    def to_document(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "config": self.config.to_document(),
            "rows": [r.to_document() for r in self.rows],
            "summary": [s.to_document() for s in self.summary],
        }
        if self.traces:
            doc["traces"] = {str(t): lines for t, lines in sorted(self.traces.items())}
        return doc

    def csv(self) -> str:
        return render_csv(self.rows)


@dataclass(frozen=True)
class SweepResult:
    axis: str
    values: tuple[int, ...]
    runs: tuple[ExperimentResult, ...]

    def to_document(self) -> dict[str, Any]:
        return {
            "axis": self.axis,
            "values": list(self.values),
            "runs": [r.to_document() for r in self.runs],
        }

    def csv(self) -> str:
        rows: list[TrialRow] = []
        for run in self.runs:
            rows.extend(run.rows)
        return render_csv(rows)


def render_csv(rows) -> str:
    """Stable long-format CSV with the fixed schema header."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_tuple())
    return buf.getvalue()


def _summarize(method: str, bests: list[float], evals: list[int], last_best: list[int]) -> MethodSummary:
    n = len(bests)
    mean = statistics.fmean(bests)
    se = statistics.stdev(bests) / math.sqrt(n) if n > 1 else 0.0
    return MethodSummary(
        method=method,
        trials=n,
        mean_best=mean,
        se_best=se,
        ci95_lo=mean - 1.96 * se,
        ci95_hi=mean + 1.96 * se,
        mean_evals=statistics.fmean(evals),
        mean_last_best_iter=statistics.fmean(last_best),
    )


def _resolve_objective(config: ExperimentConfig) -> tuple[ObjectiveHandle, SearchSpace, Callable[[], None]]:
    if config.objective.startswith(EXTPROC_PREFIX):
        command = config.objective[len(EXTPROC_PREFIX) :].strip()
        if not command:
            raise UsageError("extproc objective needs a command after the prefix")
        assert config.space is not None
        session = spawn_evaluator(command, config.space)
        return session.objective(name=config.objective), config.space, session.close
    handle = builtin_objective(config.objective)
    if config.space is not None and config.space.to_document() != handle.space.to_document():
        raise UsageError(
            f"objective {config.objective!r} defines its own space; drop the space section "
            "or make it identical"
        )
    return handle, handle.space, lambda: None


def _run_trial(
    config: ExperimentConfig,
    objective: ObjectiveHandle,
    space: SearchSpace,
    trial: int,
) -> tuple[list[TrialRow], list[str] | None]:
    trial_seed = derive_seed(config.seed, "trial", trial)
    if config.initial is not None:
        initial = dict(config.initial)
    else:
        initial = sample_uniform_assignment(space, random.Random(derive_seed(trial_seed, "init")))

    reports: dict[str, TuningReport] = {}
    trace_lines: list[str] | None = None
    if "grat" in config.methods:
        query = TuningQuery(
            space=space,
            initial_values=initial,
            c=config.c,
            stop=StopCriteria(
                max_iterations=config.iterations, patience=config.patience, target=config.target
            ),
            eta=config.eta,
            omega=config.omega,
        )
        tree = build_hierarchy(query)
        message_log: list[tuple[int, int, str]] | None = [] if config.trace else None
        reports["grat"] = tune(
            tree,
            query,
            objective,
            derive_seed(trial_seed, "grat"),
            ledger=EvaluationLedger(),
            omega_policy=config.omega_policy,
            message_log=message_log,
        )
        if message_log is not None:
            trace_lines = [f"{i},{node},{kind}" for i, node, kind in message_log]

    if config.budget_mode == "measured":
        budget = reports["grat"].evaluations
    else:
        budget = config.c * config.eta * config.iterations

    if "random" in config.methods:
        reports["random"] = random_search(
            space,
            objective,
            EvaluationLedger(),
            budget,
            random.Random(derive_seed(trial_seed, "random")),
        )
    if "lhs" in config.methods:
        reports["lhs"] = latin_hypercube(
            space,
            objective,
            EvaluationLedger(),
            budget,
            random.Random(derive_seed(trial_seed, "lhs")),
        )

    rows = [
        TrialRow(
            trial=trial,
            method=method,
            objective=config.objective,
            eta=config.eta,
            omega=config.omega,
            iters=config.iterations,
            best=reports[method].incumbent_response,
            evals=reports[method].evaluations,
            last_best_iter=reports[method].last_best_iteration,
        )
        for method in config.methods
    ]
    return rows, trace_lines


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every method for every trial and assemble rows plus summaries."""
    objective, space, close = _resolve_objective(config)
    try:
        per_trial: list[tuple[list[TrialRow], list[str] | None]]
        if config.workers > 1 and config.trials > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = [
                    pool.submit(_run_trial, config, objective, space, t)
                    for t in range(config.trials)
                ]
                per_trial = [f.result() for f in futures]
        else:
            per_trial = [_run_trial(config, objective, space, t) for t in range(config.trials)]
    finally:
        close()

    rows: list[TrialRow] = []
    traces: dict[int, list[str]] = {}
    for t, (trial_rows, trace_lines) in enumerate(per_trial):
        rows.extend(trial_rows)
        if trace_lines is not None:
            traces[t] = trace_lines

    summary = []
    for method in config.methods:
        method_rows = [r for r in rows if r.method == method]
        summary.append(
            _summarize(
                method,
                [r.best for r in method_rows],
                [r.evals for r in method_rows],
                [r.last_best_iter for r in method_rows],
            )
        )
    return ExperimentResult(config=config, rows=tuple(rows), summary=tuple(summary), traces=traces)


def sweep(config: ExperimentConfig, axis: str, values: list[int]) -> SweepResult:
    """One run_experiment per axis value; rows concatenate into one long CSV."""
    if axis not in ("eta", "iterations"):
        raise UsageError(f"sweep axis must be 'eta' or 'iterations', got {axis!r}")
    if not values:
        raise UsageError("sweep needs at least one axis value")
    runs = []
    for value in values:
        if value < 1:
            raise UsageError(f"sweep values must be >= 1, got {value}")
        runs.append(run_experiment(replace(config, **{axis: value})))
    return SweepResult(axis=axis, values=tuple(values), runs=tuple(runs))


def load_config_document(doc: Mapping[str, Any]) -> tuple[SearchSpace | None, dict[str, Any]]:
    """Split a config file document into its space part and its run section.

    The document is the search-space JSON (params/objective/fixed) plus an
    optional `run` object holding experiment fields; either part may be
    absent.
    """
    space = None
    if "params" in doc:
        space = SearchSpace.from_document(doc)
    run = dict(doc.get("run", {}))
    if not isinstance(run, dict):
        raise UsageError("config 'run' section must be an object")
    return space, run


def config_from_run_section(
    run: Mapping[str, Any], space: SearchSpace | None
) -> ExperimentConfig:
    """Build an ExperimentConfig from a run section (flag overrides applied upstream)."""
    known = {
        "objective",
        "methods",
        "eta",
        "omega",
        "c",
        "iterations",
        "trials",
        "seed",
        "budget_mode",
        "omega_policy",
        "workers",
        "initial",
        "patience",
        "target",
        "trace",
    }
    unknown = sorted(set(run) - known)
    if unknown:
        raise UsageError(f"unknown run-section fields {unknown}")
    if "objective" not in run:
        raise UsageError("config needs an objective (run.objective or --objective)")
    kwargs: dict[str, Any] = dict(run)
    if "methods" in kwargs:
        kwargs["methods"] = tuple(kwargs["methods"])
    if "initial" in kwargs and kwargs["initial"] is not None:
        kwargs["initial"] = dict(kwargs["initial"])
    return ExperimentConfig(space=space, **kwargs)


def known_objectives() -> tuple[str, ...]:
    return BUILTIN_OBJECTIVES
