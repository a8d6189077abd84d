"""Hierarchical agent-based hyper-parameter tuning and black-box minimization."""

from .baselines import latin_hypercube, random_search
from .errors import (
    BudgetExhaustedError,
    DuplicateParamError,
    EmptySpaceError,
    EvaluationError,
    HierTuneError,
    IncompleteResultsError,
    InvalidDivisionError,
    InvalidSlotError,
    OutOfDomainError,
    ProtocolError,
    SessionError,
    SpaceError,
    UsageError,
)
from .experiments import ExperimentConfig, ExperimentResult, run_experiment, sweep
from .grat import (
    Feedback,
    SubResult,
    adapt_omega,
    aggregate_results,
    prepare_feedback,
    run_tuning_algorithm,
    uniform_rand_slot,
    weighted_rand,
)
from .hierarchy import Hierarchy, HierarchyNode, TuningQuery, build_hierarchy, build_tree, divide
from .objectives import (
    BUILTIN_OBJECTIVES,
    EvaluationLedger,
    ObjectiveHandle,
    builtin_objective,
    hartmann,
    make_box_space,
    sphere,
)
from .runtime import StopCriteria, TuningReport, should_stop, tune
from .space import (
    Assignment,
    HyperParameterSpec,
    SearchSpace,
    Violation,
    canonical_key,
    sample_uniform_assignment,
    validate_assignment,
)

__version__ = "0.1.0"
