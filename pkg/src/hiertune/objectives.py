"""Response-function abstraction, evaluation ledger, and built-in benchmarks.

Every objective call in a run flows through one EvaluationLedger, which
memoizes by canonical assignment key and counts fresh evaluations. That
single chokepoint is what makes budget parity between methods checkable.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import BudgetExhaustedError, EvaluationError, OutOfDomainError, UsageError
from .space import Assignment, HyperParameterSpec, SearchSpace, canonical_key


@dataclass(frozen=True)
class ObjectiveHandle:
    """A named response function over a search space; lower is better.

    Evaluation must be deterministic for a fixed assignment: stochastic
    objectives internalize their own seeding.
    """

    name: str
    space: SearchSpace
    evaluate: Callable[[Assignment], float]


class EvaluationLedger:
    """Fresh-evaluation counter plus memoization cache.

    Cache lookups never increment the counter; `count` equals the number of
    distinct keys ever inserted. Concurrent calls for the same key compute
    the value at most once (insert-if-absent with a pending marker), so the
    ledger is the only synchronization point terminal agents need.
    """

    def __init__(self, cap: int | None = None):
        self.cap = cap
        self._cache: dict[bytes, float] = {}
        self._pending: dict[bytes, threading.Event] = {}
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def cached_value(self, assignment: Mapping) -> float | None:
        return self._cache.get(canonical_key(assignment))

    def evaluate(self, objective: ObjectiveHandle, assignment: Assignment) -> float:
        key = canonical_key(assignment)
        while True:
            with self._lock:
                if key in self._cache:
                    return self._cache[key]
                pending = self._pending.get(key)
                if pending is None:
                    if self.cap is not None and self._count >= self.cap:
                        raise BudgetExhaustedError(
                            f"evaluation cap {self.cap} reached; refusing a fresh evaluation"
                        )
                    pending = threading.Event()
                    self._pending[key] = pending
                    mine = True
                else:
                    mine = False
            if not mine:
                pending.wait()
                continue
            try:
                value = float(objective.evaluate(assignment))
            except EvaluationError:
                with self._lock:
                    del self._pending[key]
                pending.set()
                raise
            except Exception as exc:
                with self._lock:
                    del self._pending[key]
                pending.set()
                raise EvaluationError(
                    f"objective {objective.name!r} failed: {exc}", assignment
                ) from exc
            if math.isnan(value):
                with self._lock:
                    del self._pending[key]
                pending.set()
                raise EvaluationError(
                    f"objective {objective.name!r} returned NaN", assignment
                )
            with self._lock:
                self._cache[key] = value
                self._count += 1
                del self._pending[key]
            pending.set()
            return value


# Hartmann family constants: 4 mixture components, published A and P matrices,
# alpha weights (1.0, 1.2, 3.0, 3.2). The 4-d variant truncates the 6-d
# matrices to their first four columns and rescales by (1.1 - value) / 0.839.
_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])

_HARTMANN3_A = np.array(
    [
        [3.0, 10.0, 30.0],
        [0.1, 10.0, 35.0],
        [3.0, 10.0, 30.0],
        [0.1, 10.0, 35.0],
    ]
)
_HARTMANN3_P = 1e-4 * np.array(
    [
        [3689.0, 1170.0, 2673.0],
        [4699.0, 4387.0, 7470.0],
        [1091.0, 8732.0, 5547.0],
        [381.0, 5743.0, 8828.0],
    ]
)

_HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
        [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
        [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
        [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
    ]
)

_HARTMANN = {
    3: (_HARTMANN3_A, _HARTMANN3_P),
    4: (_HARTMANN6_A[:, :4], _HARTMANN6_P[:, :4]),
    6: (_HARTMANN6_A, _HARTMANN6_P),
}


def hartmann(d: int, x) -> float:
    """Hartmann benchmark value on the unit box, d in {3, 4, 6}."""
    if d not in _HARTMANN:
        raise UsageError(f"hartmann is defined for d in 3, 4, 6; got {d}")
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise OutOfDomainError(f"hartmann-{d} expects a length-{d} vector, got shape {x.shape}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise OutOfDomainError(f"hartmann-{d} is defined on [0,1]^{d}, got {x.tolist()}")
    a, p = _HARTMANN[d]
    inner = np.sum(a * (x - p) ** 2, axis=1)
    mixture = float(np.sum(_HARTMANN_ALPHA * np.exp(-inner)))
    if d == 4:
        return (1.1 - mixture) / 0.839
    return -mixture


def sphere(x) -> float:
    """Sum of squares; test-only convex objective."""
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * x))


def make_box_space(d: int) -> SearchSpace:
    """[0,1]^d as a search space: parameters x1..xd, all objective, none fixed."""
    if d < 1:
        raise UsageError(f"box space needs d >= 1, got {d}")
    params = tuple(HyperParameterSpec.real(f"x{i + 1}", 0.0, 1.0) for i in range(d))
    return SearchSpace(params=params, objective=tuple(p.name for p in params))


def _vector_objective(name: str, d: int, fn: Callable) -> ObjectiveHandle:
    space = make_box_space(d)
    order = space.names

    def evaluate(assignment: Assignment) -> float:
        return fn([assignment[n] for n in order])

    return ObjectiveHandle(name=name, space=space, evaluate=evaluate)


def builtin_objective(name: str) -> ObjectiveHandle:
    """Resolve a built-in objective by CLI name."""
    if name == "hartmann3":
        return _vector_objective(name, 3, lambda x: hartmann(3, x))
    if name == "hartmann4":
        return _vector_objective(name, 4, lambda x: hartmann(4, x))
    if name == "hartmann6":
        return _vector_objective(name, 6, lambda x: hartmann(6, x))
    if name == "sphere":
        return _vector_objective(name, 3, sphere)
    raise UsageError(
        f"unknown objective {name!r}; built-ins are hartmann3, hartmann4, hartmann6, sphere"
    )


BUILTIN_OBJECTIVES = ("hartmann3", "hartmann4", "hartmann6", "sphere")
