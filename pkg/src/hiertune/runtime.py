"""Message-driven execution of a tuning run over a built agent tree.

Each iteration the root splits the feedback along its children's primary
sets, requests descend to the terminals, every terminal runs one guided
search step, and results ascend with set-union aggregation at each internal
node. The root tracks the incumbent, adapts the keep-weight, and consults
the stop criteria. Sibling subtrees may execute concurrently; determinism
comes from per-node seeded RNG streams, never from scheduling order.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

from .errors import EvaluationError, SpaceError, UsageError
from .grat import Feedback, SubResult, adapt_omega, aggregate_results, prepare_feedback, run_tuning_algorithm
from .hierarchy import Hierarchy, HierarchyNode, TuningQuery
from .objectives import EvaluationLedger, ObjectiveHandle
from .seeding import derive_seed
from .space import Assignment, validate_assignment

MessageLog = list[tuple[int, int, str]]

MSG_START = "start"
MSG_TUNE = "tune"
MSG_RESULT = "result"


@dataclass(frozen=True)
class StopCriteria:
    """Root-level stopping rules; max_iterations is always set."""

    max_iterations: int
    patience: int | None = None
    target: float | None = None

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise SpaceError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.patience is not None and self.patience < 1:
            raise SpaceError(f"patience must be >= 1, got {self.patience}")


@dataclass(frozen=True)
class IterationStat:
    """One trace entry: iteration index, incumbent after it, fresh evaluations in it."""

    iteration: int
    incumbent: float
    fresh_evaluations: int


@dataclass(frozen=True)
class TuningReport:
    """Final run summary; the per-iteration incumbent is non-increasing."""

    incumbent: Assignment
    incumbent_response: float
    iterations_run: int
    last_best_iteration: int
    evaluations: int
    per_iteration_trace: tuple[IterationStat, ...]

    def to_document(self) -> dict[str, Any]:
        return {
            "incumbent": dict(self.incumbent),
            "incumbent_response": self.incumbent_response,
            "iterations_run": self.iterations_run,
            "last_best_iteration": self.last_best_iteration,
            "evaluations": self.evaluations,
            "per_iteration_trace": [
                [t.iteration, t.incumbent, t.fresh_evaluations] for t in self.per_iteration_trace
            ],
        }


def _last_improvement(trace: Sequence[IterationStat]) -> int:
    last = trace[0].iteration
    for prev, cur in zip(trace, trace[1:]):
        if cur.incumbent < prev.incumbent:
            last = cur.iteration
    return last


def should_stop(criteria: StopCriteria, trace: Sequence[IterationStat]) -> bool:
    """True once the iteration cap, the patience window, or the target is hit."""
    if not trace:
        raise UsageError("stop check needs at least the bootstrap trace entry")
    current = trace[-1]
    if current.iteration >= criteria.max_iterations:
        return True
    if criteria.patience is not None:
        if current.iteration - _last_improvement(trace) >= criteria.patience:
            return True
    if criteria.target is not None and current.incumbent <= criteria.target:
        return True
    return False


def tune(
    tree: Hierarchy,
    query: TuningQuery,
    objective: ObjectiveHandle,
    master_seed: int,
    *,
    ledger: EvaluationLedger | None = None,
    max_workers: int | None = None,
    omega_policy: str = "fixed",
    message_log: MessageLog | None = None,
) -> TuningReport:
    """Run the full iterated tuning process and report the incumbent.

    Iteration 0 bootstraps by evaluating the user-supplied initial point at
    every terminal (one fresh evaluation total, the rest are cache hits), so
    the first feedback sends every terminal that same point. Runs are
    deterministic for a fixed master_seed regardless of worker count.
    """
    ledger = ledger if ledger is not None else EvaluationLedger()
    violations = validate_assignment(query.space, query.initial_values)
    if violations:
        detail = ", ".join(f"{v.name}: {v.reason}" for v in violations)
        raise UsageError(f"initial values are invalid for the space ({detail})")
    order = tree.objective_order
    if set(tree.root.primary) != set(order):
        raise UsageError("tree does not match the query's objective set")

    rngs = {
        node.id: random.Random(derive_seed(master_seed, "node", node.id))
        for node in tree.terminals()
    }
    count_start = ledger.count

    def log(iteration: int, node_id: int, kind: str) -> None:
        if message_log is not None:
            message_log.append((iteration, node_id, kind))

    def collect_terminals(
        node: HierarchyNode, feedback: Feedback, iteration: int, kind: str
    ) -> list[tuple[HierarchyNode, Assignment]]:
        if node.is_terminal:
            return [(node, feedback.per_param[node.primary[0]])]
        tasks: list[tuple[HierarchyNode, Assignment]] = []
        for child_id in node.children:
            log(iteration, child_id, kind)
            child = tree.node(child_id)
            child_feedback = Feedback(
                per_param={name: feedback.per_param[name] for name in child.primary}
            )
            tasks.extend(collect_terminals(child, child_feedback, iteration, kind))
        return tasks

    def run_terminals(
        tasks: list[tuple[HierarchyNode, Assignment]],
        runner,
    ) -> dict[int, SubResult]:
        results: dict[int, SubResult] = {}
        if max_workers is not None and max_workers > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                futures = [(node.id, pool.submit(runner, node, point)) for node, point in tasks]
                for node_id, future in futures:
                    results[node_id] = _unwrap(node_id, future.result)
        else:
            for node, point in tasks:
                results[node.id] = _unwrap(node.id, lambda n=node, p=point: runner(n, p))
        return results

    def _unwrap(node_id: int, call) -> SubResult:
        try:
            return call()
        except EvaluationError as exc:
            exc.agent = node_id
            raise EvaluationError(
                f"agent {node_id}: {exc} (candidate {exc.assignment})",
                exc.assignment,
                agent=node_id,
            ) from exc

    def ascend(node: HierarchyNode, iteration: int, by_id: dict[int, SubResult]) -> dict[str, SubResult]:
        if node.is_terminal:
            result = by_id[node.id]
            return {result.param: result}
        parts = []
        for child_id in node.children:
            parts.append(ascend(tree.node(child_id), iteration, by_id))
            log(iteration, child_id, MSG_RESULT)
        return aggregate_results(parts)

    # Iteration 0: every terminal reports the initial point as its result.
    initial = dict(query.initial_values)

    def bootstrap_runner(node: HierarchyNode, point: Assignment) -> SubResult:
        value = ledger.evaluate(objective, point)
        return SubResult(param=node.primary[0], best_assignment=dict(point), best_response=value)

    feedback = Feedback(per_param={name: initial for name in order})
    tasks = collect_terminals(tree.root, feedback, 0, MSG_START)
    by_id = run_terminals(tasks, bootstrap_runner)
    results = ascend(tree.root, 0, by_id)

    incumbent = dict(initial)
    incumbent_response = results[order[0]].best_response
    last_best = 0
    trace = [IterationStat(0, incumbent_response, ledger.count - count_start)]
    feedback = prepare_feedback(results, order)
    omega = query.omega
    iteration = 0

    while not should_stop(query.stop, trace):
        iteration += 1
        count_before = ledger.count

        def grat_runner(node: HierarchyNode, point: Assignment) -> SubResult:
            return run_tuning_algorithm(
                node, point, query.eta, omega, objective, ledger, rngs[node.id]
            )

        tasks = collect_terminals(tree.root, feedback, iteration, MSG_TUNE)
        by_id = run_terminals(tasks, grat_runner)
        results = ascend(tree.root, iteration, by_id)

        best_param = min(
            enumerate(order), key=lambda item: (results[item[1]].best_response, item[0])
        )[1]
        best = results[best_param]
        if best.best_response < incumbent_response:
            incumbent = dict(best.best_assignment)
            incumbent_response = best.best_response
            last_best = iteration
        trace.append(IterationStat(iteration, incumbent_response, ledger.count - count_before))
        omega = adapt_omega([t.incumbent for t in trace], omega, omega_policy)
        feedback = prepare_feedback(results, order)

    return TuningReport(
        incumbent=incumbent,
        incumbent_response=incumbent_response,
        iterations_run=iteration,
        last_best_iteration=last_best,
        evaluations=ledger.count - count_start,
        per_iteration_trace=tuple(trace),
    )
