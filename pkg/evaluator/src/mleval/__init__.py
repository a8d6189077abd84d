"""Reference machine-learning evaluator for the hiertune extproc protocol."""

from .task import LOGREG_SPACE, MODELS, SVC_SPACE, MLTask

__version__ = "0.1.0"
