"""Matched-budget comparison methods: uniform random search and Latin hypercube.

Both run over the same search space and evaluation ledger as the guided
tuner and consume exactly `budget` fresh evaluations; on the rare cache
collision a replacement draw keeps the count exact.
"""

from __future__ import annotations

import random

from .errors import UsageError
from .objectives import EvaluationLedger, ObjectiveHandle
from .runtime import IterationStat, TuningReport
from .space import Assignment, SearchSpace, sample_uniform_assignment

_MAX_REDRAWS = 10_000


def _run_draws(
    draws,
    objective: ObjectiveHandle,
    ledger: EvaluationLedger,
) -> TuningReport:
    count_start = ledger.count
    incumbent: Assignment | None = None
    incumbent_response = float("inf")
    last_best = 0
    trace = []
    for i, assignment in enumerate(draws, start=1):
        value = ledger.evaluate(objective, assignment)
        if value < incumbent_response:
            incumbent = assignment
            incumbent_response = value
            last_best = i
        trace.append(IterationStat(i, incumbent_response, 1))
    assert incumbent is not None
    return TuningReport(
        incumbent=incumbent,
        incumbent_response=incumbent_response,
        iterations_run=len(trace),
        last_best_iteration=last_best,
        evaluations=ledger.count - count_start,
        per_iteration_trace=tuple(trace),
    )


def _fresh(space: SearchSpace, ledger: EvaluationLedger, draw) -> Assignment:
    for _ in range(_MAX_REDRAWS):
        assignment = draw()
        if ledger.cached_value(assignment) is None:
            return assignment
    raise UsageError("could not draw a fresh point; the space is too small for this budget")


def random_search(
    space: SearchSpace,
    objective: ObjectiveHandle,
    ledger: EvaluationLedger,
    budget: int,
    rng: random.Random,
) -> TuningReport:
    """Evaluate `budget` independent uniform draws and report the argmin."""
    if budget < 1:
        raise UsageError(f"budget must be >= 1, got {budget}")

    def draws():
        for _ in range(budget):
            yield _fresh(space, ledger, lambda: sample_uniform_assignment(space, rng))

    return _run_draws(draws(), objective, ledger)


def latin_hypercube(
    space: SearchSpace,
    objective: ObjectiveHandle,
    ledger: EvaluationLedger,
    budget: int,
    rng: random.Random,
) -> TuningReport:
    """Stratified design: each real dimension hits each of `budget` strata once.

    Per real parameter a random permutation assigns one stratum (log-space for
    log-scaled parameters) to each row, with a uniform draw inside it.
    Nominals are sampled uniformly, independent of strata.
    """
    if budget < 1:
        raise UsageError(f"budget must be >= 1, got {budget}")

    strata = {
        p.name: rng.sample(range(budget), budget)
        for p in space.params
        if p.name not in space.fixed and p.is_real
    }

    def draw_row(i: int) -> Assignment:
        row: Assignment = {}
        for p in space.params:
            if p.name in space.fixed:
                row[p.name] = space.fixed[p.name]
            elif p.is_real:
                a, b = p.sample_bounds()
                width = (b - a) / budget
                s = strata[p.name][i]
                row[p.name] = p.from_sample_space(rng.uniform(a + s * width, a + (s + 1) * width))
            else:
                row[p.name] = p.values[rng.randrange(len(p.values))]
        return row

    def draws():
        for i in range(budget):
            yield _fresh(space, ledger, lambda i=i: draw_row(i))

    return _run_draws(draws(), objective, ledger)
