"""Exception types shared across the package."""

from __future__ import annotations

from typing import Any, Mapping


class HierTuneError(Exception):
    """Base class for all package errors."""


class SpaceError(HierTuneError):
    """Invalid search-space definition or serialized document."""


class EmptySpaceError(HierTuneError):
    """No objective hyper-parameters to build a hierarchy over."""


class InvalidDivisionError(HierTuneError):
    """Requested more blocks than the set can be divided into."""


class InvalidSlotError(HierTuneError):
    """Slot index outside the 1..eta range."""


class DuplicateParamError(HierTuneError):
    """Two sub-results claim the same hyper-parameter with different payloads."""


class IncompleteResultsError(HierTuneError):
    """Feedback preparation received results that do not cover every objective parameter."""


class BudgetExhaustedError(HierTuneError):
    """The evaluation ledger's cap would be exceeded by a fresh evaluation."""


class OutOfDomainError(HierTuneError):
    """A value lies outside the domain an objective is defined on."""


class EvaluationError(HierTuneError):
    """An objective evaluation failed for a specific assignment."""

    def __init__(self, message: str, assignment: Mapping[str, Any] | None = None, agent: int | None = None):
        super().__init__(message)
        self.assignment = dict(assignment) if assignment is not None else None
        self.agent = agent


class ProtocolError(HierTuneError):
    """The external evaluator violated the wire protocol."""


class SessionError(HierTuneError):
    """The external evaluator process died, stalled, or produced garbage."""


class UsageError(HierTuneError):
    """Invalid experiment configuration or CLI input."""
