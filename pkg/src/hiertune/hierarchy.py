"""Agent-tree construction by recursive primary/complement division.

The root owns the full objective set; each internal node splits its primary
set into balanced contiguous blocks (declaration order) and hands each block
to a child together with the complement it must still carry values for.
Recursion stops at singleton primary sets, which become terminal agents.
The result is a pure immutable data structure; no execution happens here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterator, Sequence

from .errors import EmptySpaceError, InvalidDivisionError, SpaceError
from .space import Assignment, SearchSpace

if TYPE_CHECKING:
    from .runtime import StopCriteria


@dataclass(frozen=True)
class TuningQuery:
    """Everything needed to form the tree and drive one tuning run.

    c: max children per agent (> 1). budget: optional per-agent child cap
    (>= 2; 1 would make an internal node re-delegate its whole set forever).
    eta: sampled slots per terminal per iteration. omega: keep-weight for
    carried-over values.
    """

    space: SearchSpace
    initial_values: Assignment
    c: int
    stop: "StopCriteria"
    eta: int = 10
    omega: int = 3
    budget: int | None = None

    def __post_init__(self) -> None:
        if self.c <= 1:
            raise SpaceError(f"c must be > 1, got {self.c}")
        if self.eta < 1:
            raise SpaceError(f"eta must be >= 1, got {self.eta}")
        if self.omega < 1:
            raise SpaceError(f"omega must be >= 1, got {self.omega}")
        if self.budget is not None and self.budget < 2:
            raise SpaceError(f"budget must be >= 2 or unbounded, got {self.budget}")


@dataclass(frozen=True)
class HierarchyNode:
    """One agent: the primary set it tunes plus the complement it carries."""

    id: int
    level: int
    primary: tuple[str, ...]
    complement: tuple[str, ...]
    parent: int | None
    children: tuple[int, ...]

    @property
    def is_terminal(self) -> bool:
        return len(self.primary) == 1


@dataclass(frozen=True)
class Hierarchy:
    """The whole agent tree; node ids are breadth-first and index `nodes`."""

    nodes: tuple[HierarchyNode, ...]
    objective_order: tuple[str, ...]

    @property
    def root(self) -> HierarchyNode:
        return self.nodes[0]

    @property
    def height(self) -> int:
        return max(n.level for n in self.nodes)

    def node(self, node_id: int) -> HierarchyNode:
        return self.nodes[node_id]

    def terminals(self) -> Iterator[HierarchyNode]:
        return (n for n in self.nodes if n.is_terminal)

    def to_document(self) -> dict[str, Any]:
        """JSON-ready tree dump (the `--dump-tree` payload)."""
        return {
            "nodes": [
                {
                    "id": n.id,
                    "level": n.level,
                    "primary": list(n.primary),
                    "complement": list(n.complement),
                    "children": list(n.children),
                }
                for n in self.nodes
            ]
        }


def divide(primary: Sequence[str], i: int, k: int) -> tuple[str, ...]:
    """The i-th block (1-based) of the balanced contiguous partition into k blocks.

    Block sizes differ by at most one, larger blocks first, so the k blocks
    are disjoint and cover `primary` in order.
    """
    n = len(primary)
    if k < 1 or k > n:
        raise InvalidDivisionError(f"cannot divide {n} names into {k} blocks")
    if not 1 <= i <= k:
        raise InvalidDivisionError(f"block index {i} outside 1..{k}")
    base, extra = divmod(n, k)
    start = (i - 1) * base + min(i - 1, extra)
    size = base + (1 if i <= extra else 0)
    return tuple(primary[start : start + size])


def build_hierarchy(query: TuningQuery) -> Hierarchy:
    """Form the agent tree for a query: breadth-first ids, deterministic shape.

    The root's primary set is the full objective set (empty complement); each
    child i of a node gets the i-th division block as primary and inherits
    (parent primary - own primary) union parent complement as complement.
    Child count is min(c, |primary|, budget).
    """
    return build_tree(query.space, query.c, query.budget)


def build_tree(space: SearchSpace, c: int, budget: int | None = None) -> Hierarchy:
    """build_hierarchy without the run parameters; same shape rules."""
    if c <= 1:
        raise SpaceError(f"c must be > 1, got {c}")
    objective = space.objective_in_declaration_order
    if not objective:
        raise EmptySpaceError("query has no objective hyper-parameters")

    budget = budget if budget is not None else math.inf

    @dataclass
    class _Draft:
        id: int
        level: int
        primary: tuple[str, ...]
        complement: tuple[str, ...]
        parent: int | None
        children: list[int] = field(default_factory=list)

    drafts = [_Draft(0, 0, objective, (), None)]
    queue = [0]
    while queue:
        node_id = queue.pop(0)
        node = drafts[node_id]
        if len(node.primary) == 1:
            continue
        k = int(min(c, len(node.primary), budget))
        inherited = set(node.complement)
        for i in range(1, k + 1):
            block = divide(node.primary, i, k)
            block_set = set(block)
            complement = tuple(
                name
                for name in objective
                if (name in inherited) or (name in set(node.primary) and name not in block_set)
            )
            child = _Draft(len(drafts), node.level + 1, block, complement, node_id)
            drafts.append(child)
            node.children.append(child.id)
            queue.append(child.id)

    nodes = tuple(
        HierarchyNode(
            id=d.id,
            level=d.level,
            primary=d.primary,
            complement=d.complement,
            parent=d.parent,
            children=tuple(d.children),
        )
        for d in drafts
    )
    return Hierarchy(nodes=nodes, objective_order=objective)
