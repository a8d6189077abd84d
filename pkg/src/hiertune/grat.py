"""Guided randomized tuning: terminal slot sampling, aggregation, feedback.

Each terminal agent owns a single objective parameter. Per iteration it
builds eta+1 candidates: the received start point, plus one candidate per
slot of its own parameter's domain, with carried-over parameters either kept
(weight omega) or resampled into another slot (weight 1 each). Internal
agents merge child results by set union; the root sends every terminal the
best partner's point as the next start.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateParamError, IncompleteResultsError, InvalidSlotError, UsageError
from .hierarchy import HierarchyNode
from .objectives import EvaluationLedger, ObjectiveHandle
from .space import Assignment, HyperParameterSpec, Value

ResultSet = dict[str, "SubResult"]


@dataclass(frozen=True)
class SubResult:
    """A terminal agent's report: its parameter, best point found, and its response."""

    param: str
    best_assignment: Assignment
    best_response: float


@dataclass(frozen=True)
class Feedback:
    """Per-parameter start points for the next iteration; keys are the objective set."""

    per_param: dict[str, Assignment]


def uniform_rand_slot(
    spec: HyperParameterSpec,
    eta: int,
    s: int,
    rng: random.Random,
    session: set[str] | None = None,
) -> Value:
    """A uniform draw from the s-th of eta slots of the parameter's domain.

    Reals: the domain (log10-transformed when log-scaled) splits into eta
    equal slots and the value is uniform within slot s. Nominals: a uniform
    not-yet-drawn label, tracked in `session` so one sampling session draws
    without replacement; once all labels are exhausted, draws repeat uniformly
    over the full set.
    """
    if not 1 <= s <= eta:
        raise InvalidSlotError(f"slot {s} outside 1..{eta}")
    if spec.is_real:
        a, b = spec.sample_bounds()
        width = (b - a) / eta
        u = rng.uniform(a + (s - 1) * width, a + s * width)
        return spec.from_sample_space(u)
    drawn = session if session is not None else set()
    remaining = [v for v in spec.values if v not in drawn]
    if remaining:
        choice = remaining[rng.randrange(len(remaining))]
        drawn.add(choice)
    else:
        choice = spec.values[rng.randrange(len(spec.values))]
    return choice


def weighted_rand(
    spec: HyperParameterSpec,
    current: Value,
    omega: int,
    eta: int,
    rng: random.Random,
) -> Value:
    """Keep `current` with probability omega/(omega+eta-1), else move slots.

    The move branch picks uniformly one of the eta-1 slots not containing
    `current` and draws uniformly within it (same slot geometry as
    uniform_rand_slot). For nominals the labels themselves act as slots and
    eta clamps to the label count; the move branch is uniform over the other
    labels.
    """
    if spec.is_real:
        slots = eta
    else:
        slots = min(eta, len(spec.values))
    if slots <= 1:
        return current
    if rng.random() < omega / (omega + slots - 1):
        return current
    if not spec.is_real:
        others = [v for v in spec.values if v != current]
        return others[rng.randrange(len(others))]
    a, b = spec.sample_bounds()
    width = (b - a) / eta
    u_cur = spec.to_sample_space(float(current))
    s_cur = min(eta, max(1, int((u_cur - a) / width) + 1))
    other = rng.randrange(eta - 1) + 1
    s = other if other < s_cur else other + 1
    u = rng.uniform(a + (s - 1) * width, a + s * width)
    return spec.from_sample_space(u)


def run_tuning_algorithm(
    agent: HierarchyNode,
    feedback_point: Assignment,
    eta: int,
    omega: int,
    objective: ObjectiveHandle,
    ledger: EvaluationLedger,
    rng: random.Random,
) -> SubResult:
    """One terminal-agent search step around a start point.

    Candidate 0 is the start point itself. Candidate s (1..eta) places the
    owned parameter in slot s, applies weighted_rand to every complement
    parameter, and copies fixed values unchanged. All candidates are
    evaluated through the ledger; the argmin (lowest index on ties) is
    returned, so the result never responds worse than the start point.
    """
    if not agent.is_terminal:
        raise UsageError(f"node {agent.id} is not terminal")
    own = agent.primary[0]
    complement = set(agent.complement)
    space = objective.space

    candidates: list[Assignment] = [dict(feedback_point)]
    session: set[str] = set()
    for s in range(1, eta + 1):
        candidate: Assignment = {}
        for p in space.params:
            if p.name == own:
                candidate[p.name] = uniform_rand_slot(p, eta, s, rng, session)
            elif p.name in complement:
                candidate[p.name] = weighted_rand(p, feedback_point[p.name], omega, eta, rng)
            else:
                candidate[p.name] = feedback_point[p.name]
        candidates.append(candidate)

    responses = [ledger.evaluate(objective, c) for c in candidates]
    best = min(range(len(candidates)), key=lambda j: (responses[j], j))
    return SubResult(param=own, best_assignment=candidates[best], best_response=responses[best])


def aggregate_results(parts: Iterable[Mapping[str, SubResult]]) -> ResultSet:
    """Set union of child result sets; parts must come from disjoint primaries."""
    merged: ResultSet = {}
    for part in parts:
        for param, result in part.items():
            if param in merged:
                if merged[param] == result:
                    continue
                raise DuplicateParamError(
                    f"conflicting sub-results for {param!r}; children must own disjoint sets"
                )
            merged[param] = result
    return merged


def prepare_feedback(results: Mapping[str, SubResult], param_order: Sequence[str]) -> Feedback:
    """Assign each parameter the best partner's point (minimum response, self excluded).

    Ties break toward the lowest declaration index. With a single parameter
    there is no partner, so it receives its own point.
    """
    missing = [name for name in param_order if name not in results]
    if missing or len(results) != len(param_order):
        extra = sorted(set(results) - set(param_order))
        raise IncompleteResultsError(
            f"results must cover the objective set exactly; missing {missing}, extra {extra}"
        )
    order = list(param_order)
    per_param: dict[str, Assignment] = {}
    for i, name in enumerate(order):
        best_j: int | None = None
        for j, other in enumerate(order):
            if j == i:
                continue
            if best_j is None or results[other].best_response < results[order[best_j]].best_response:
                best_j = j
        chosen = order[best_j] if best_j is not None else name
        per_param[name] = dict(results[chosen].best_assignment)
    return Feedback(per_param=per_param)


def parse_omega_policy(policy: str) -> tuple[str, int | None]:
    """Parse 'fixed' or 'decay:<p>' into (kind, patience)."""
    if policy == "fixed":
        return "fixed", None
    if policy.startswith("decay:"):
        try:
            patience = int(policy.split(":", 1)[1])
        except ValueError:
            patience = 0
        if patience < 1:
            raise UsageError(f"decay policy needs a positive patience, got {policy!r}")
        return "decay", patience
    raise UsageError(f"unknown omega policy {policy!r}; use 'fixed' or 'decay:<p>'")


def adapt_omega(history: Sequence[float], omega: int, policy: str = "fixed") -> int:
    """Adjust the keep-weight between iterations.

    'fixed' returns omega unchanged. 'decay:<p>' returns max(1, omega - 1)
    once the incumbent has gone p consecutive iterations without improving,
    nudging agents toward exploration on stalls.
    """
    if not history:
        raise UsageError("omega adaptation needs a non-empty incumbent history")
    kind, patience = parse_omega_policy(policy)
    if kind == "fixed":
        return omega
    stalled = 0
    for prev, cur in zip(reversed(history[:-1]), reversed(history[1:])):
        if cur < prev:
            break
        stalled += 1
    if patience is not None and stalled >= patience:
        return max(1, omega - 1)
    return omega
