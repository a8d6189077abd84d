"""Hyper-parameter space model: parameter specs, assignments, canonical encodings.

A search space is an ordered list of parameter specs split into an objective
subset (tuned) and a fixed subset (held at user-supplied values). Assignments
are plain dicts mapping every parameter name to a value. All types here are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import SpaceError

Value = float | str
Assignment = dict[str, Value]

REAL = "real"
NOMINAL = "nominal"
LINEAR = "linear"
LOG10 = "log10"

# Cache keys render reals at 12 significant digits: far below any sampling
# resolution used here, so equal-in-practice points share one cache entry.
KEY_PRECISION = ".12g"


@dataclass(frozen=True)
class HyperParameterSpec:
    """One tunable dimension: a real interval (linear or log10) or a label set."""

    name: str
    kind: str
    lo: float = 0.0
    hi: float = 0.0
    scale: str = LINEAR
    values: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise SpaceError("parameter name must be non-empty")
        if self.kind == REAL:
            if not (self.lo < self.hi):
                raise SpaceError(f"{self.name}: lo must be < hi, got [{self.lo}, {self.hi}]")
            if self.scale not in (LINEAR, LOG10):
                raise SpaceError(f"{self.name}: unknown scale {self.scale!r}")
            if self.scale == LOG10 and self.lo <= 0:
                raise SpaceError(f"{self.name}: log10 scale requires lo > 0, got {self.lo}")
        elif self.kind == NOMINAL:
            if not self.values:
                raise SpaceError(f"{self.name}: nominal value set must be non-empty")
            if len(set(self.values)) != len(self.values):
                raise SpaceError(f"{self.name}: nominal values contain duplicates")
        else:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")

    @staticmethod
    def real(name: str, lo: float, hi: float, scale: str = LINEAR) -> "HyperParameterSpec":
        return HyperParameterSpec(name=name, kind=REAL, lo=float(lo), hi=float(hi), scale=scale)

    @staticmethod
    def nominal(name: str, values: Iterable[str]) -> "HyperParameterSpec":
        return HyperParameterSpec(name=name, kind=NOMINAL, values=tuple(values))

    @property
    def is_real(self) -> bool:
        return self.kind == REAL

    def contains(self, value: Value) -> bool:
        """Whether a value lies in this parameter's domain."""
        if self.kind == REAL:
            return (
                isinstance(value, (int, float))
                and not isinstance(value, bool)
                and self.lo <= float(value) <= self.hi
            )
        return isinstance(value, str) and value in self.values

    def sample_bounds(self) -> tuple[float, float]:
        """Bounds in sampling coordinates (log10-transformed for log-scaled params)."""
        if self.kind != REAL:
            raise SpaceError(f"{self.name}: sample_bounds is only defined for real parameters")
        if self.scale == LOG10:
            return math.log10(self.lo), math.log10(self.hi)
        return self.lo, self.hi

    def from_sample_space(self, u: float) -> float:
        """Map a sampling coordinate back to a parameter value."""
        return 10.0**u if self.scale == LOG10 else u

    def to_sample_space(self, value: float) -> float:
        """Map a parameter value to its sampling coordinate."""
        return math.log10(value) if self.scale == LOG10 else float(value)

    def to_document(self) -> dict[str, Any]:
        if self.kind == REAL:
            return {"name": self.name, "kind": REAL, "lo": self.lo, "hi": self.hi, "scale": self.scale}
        return {"name": self.name, "kind": NOMINAL, "values": list(self.values)}

    @staticmethod
    def from_document(doc: Mapping[str, Any]) -> "HyperParameterSpec":
        try:
            kind = doc["kind"]
            if kind == REAL:
                return HyperParameterSpec.real(
                    doc["name"], doc["lo"], doc["hi"], doc.get("scale", LINEAR)
                )
            if kind == NOMINAL:
                return HyperParameterSpec.nominal(doc["name"], doc["values"])
        except KeyError as exc:
            raise SpaceError(f"parameter document missing field {exc}") from exc
        raise SpaceError(f"unknown parameter kind {kind!r}")


@dataclass(frozen=True)
class SearchSpace:
    """Ordered parameter specs plus the objective/fixed split.

    The objective and fixed name sets must partition the full name set; every
    fixed parameter carries exactly one value valid for its spec.
    """

    params: tuple[HyperParameterSpec, ...]
    objective: tuple[str, ...]
    fixed: dict[str, Value] = field(default_factory=dict)

    def __post_init__(self) -> None:
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate parameter names in search space")
        name_set = set(names)
        obj_set = set(self.objective)
        fix_set = set(self.fixed)
        if len(obj_set) != len(self.objective):
            raise SpaceError("duplicate names in objective set")
        if obj_set & fix_set:
            raise SpaceError(f"objective and fixed sets overlap: {sorted(obj_set & fix_set)}")
        if obj_set | fix_set != name_set:
            raise SpaceError("objective and fixed sets must cover exactly the declared parameters")
        for name, value in self.fixed.items():
            if not self.spec(name).contains(value):
                raise SpaceError(f"fixed value for {name!r} is outside its domain: {value!r}")

    def spec(self, name: str) -> HyperParameterSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise SpaceError(f"unknown parameter {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def objective_in_declaration_order(self) -> tuple[str, ...]:
        """Objective names ordered as declared, the stable total order used everywhere."""
        obj = set(self.objective)
        return tuple(p.name for p in self.params if p.name in obj)

    @property
    def objective_specs(self) -> tuple[HyperParameterSpec, ...]:
        obj = set(self.objective)
        return tuple(p for p in self.params if p.name in obj)

    def to_document(self) -> dict[str, Any]:
        return {
            "params": [p.to_document() for p in self.params],
            "objective": list(self.objective),
            "fixed": dict(self.fixed),
        }

    @staticmethod
    def from_document(doc: Mapping[str, Any]) -> "SearchSpace":
        try:
            params = tuple(HyperParameterSpec.from_document(p) for p in doc["params"])
            objective = tuple(doc["objective"])
            fixed = dict(doc.get("fixed", {}))
        except (KeyError, TypeError) as exc:
            raise SpaceError(f"malformed search-space document: {exc}") from exc
        return SearchSpace(params=params, objective=objective, fixed=fixed)


@dataclass(frozen=True)
class Violation:
    """One invariant an assignment breaks against a space."""

    name: str
    reason: str


def validate_assignment(space: SearchSpace, assignment: Mapping[str, Value]) -> list[Violation]:
    """Check an assignment against a space; an empty list means valid.

    Violations are data, not failures: every broken name is reported with a
    reason so callers can surface all problems at once.
    """
    violations: list[Violation] = []
    for p in space.params:
        if p.name not in assignment:
            violations.append(Violation(p.name, "missing"))
        elif not p.contains(assignment[p.name]):
            violations.append(Violation(p.name, "not-in-domain"))
    declared = set(space.names)
    for name in assignment:
        if name not in declared:
            violations.append(Violation(name, "unexpected"))
    return violations


def canonical_key(assignment: Mapping[str, Value]) -> bytes:
    """Order-independent byte encoding of an assignment, used as cache key.

    Names are sorted lexicographically and reals rendered at 12 significant
    digits, so equal assignments (up to that precision) share a key no matter
    the insertion order.
    """
    parts = []
    for name in sorted(assignment):
        value = assignment[name]
        if isinstance(value, str):
            rendered = "s:" + value
        else:
            rendered = "r:" + format(float(value), KEY_PRECISION)
        parts.append(name + "\x1e" + rendered)
    return "\x1f".join(parts).encode("utf-8")


def sample_uniform_assignment(space: SearchSpace, rng: Any) -> Assignment:
    """Draw one assignment uniformly: reals uniform on their (possibly log) scale,
    nominals uniform over labels, fixed parameters at their fixed values."""
    out: Assignment = {}
    for p in space.params:
        if p.name in space.fixed:
            out[p.name] = space.fixed[p.name]
        elif p.is_real:
            a, b = p.sample_bounds()
            out[p.name] = p.from_sample_space(rng.uniform(a, b))
        else:
            out[p.name] = p.values[rng.randrange(len(p.values))]
    return out
