"""Cross-validated classification losses for the evaluator.

One task = a model family (SVC or logistic regression) on a synthetic
binary dataset regenerated deterministically from its seed: 100 samples,
20 features, 2 classes, stratified 5-fold cross validation. The loss is
the mean squared error of hard 0/1 predictions averaged over folds, which
for binary labels equals the misclassification rate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Mapping

import numpy as np
from sklearn.datasets import make_classification
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import mean_squared_error
from sklearn.model_selection import StratifiedKFold
from sklearn.svm import SVC

N_SAMPLES = 100
N_FEATURES = 20
N_CLASSES = 2
FOLDS = 5

# Accepted solver labels -> scikit-learn solver names. The label list keeps
# legacy spellings: "newtoncg" is newton-cg, "linear" is treated as liblinear.
SOLVER_MAP = {
    "newtoncg": "newton-cg",
    "linear": "liblinear",
    "lbfgs": "lbfgs",
    "liblinear": "liblinear",
}

KERNELS = ("poly", "linear", "rbf", "sigmoid")

SVC_SPACE = {
    "params": [
        {"name": "C", "kind": "real", "lo": 1e-2, "hi": 1e13, "scale": "log10"},
        {"name": "gamma", "kind": "real", "lo": 0.0, "hi": 1.0, "scale": "linear"},
        {"name": "kernel", "kind": "nominal", "values": list(KERNELS)},
    ],
    "objective": ["C", "gamma", "kernel"],
    "fixed": {},
}

LOGREG_SPACE = {
    "params": [
        {"name": "C", "kind": "real", "lo": 1e-2, "hi": 1e13, "scale": "log10"},
        {"name": "solver", "kind": "nominal", "values": list(SOLVER_MAP)},
    ],
    "objective": ["C", "solver"],
    "fixed": {},
}

MODELS = ("svc", "logreg")


@lru_cache(maxsize=8)
def _dataset(seed: int) -> tuple[np.ndarray, np.ndarray]:
    return make_classification(
        n_samples=N_SAMPLES,
        n_features=N_FEATURES,
        n_classes=N_CLASSES,
        random_state=seed,
    )


@dataclass(frozen=True)
class MLTask:
    """A model family bound to one deterministic dataset seed."""

    model: str
    data_seed: int = 0

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")

    def space_document(self) -> dict[str, Any]:
        return SVC_SPACE if self.model == "svc" else LOGREG_SPACE

    def param_names(self) -> list[str]:
        return [p["name"] for p in self.space_document()["params"]]

    def _estimator(self, assignment: Mapping[str, Any]):
        if self.model == "svc":
            return SVC(
                C=float(assignment["C"]),
                gamma=float(assignment["gamma"]),
                kernel=str(assignment["kernel"]),
                max_iter=1_000_000,
                random_state=self.data_seed,
            )
        solver = SOLVER_MAP.get(str(assignment["solver"]))
        if solver is None:
            raise ValueError(f"unknown solver label {assignment['solver']!r}")
        return LogisticRegression(
            C=float(assignment["C"]),
            solver=solver,
            max_iter=200,
            random_state=self.data_seed,
        )

    def loss(self, assignment: Mapping[str, Any]) -> float:
        """Stratified 5-fold CV mean squared error of hard predictions."""
        x, y = _dataset(self.data_seed)
        folds = StratifiedKFold(n_splits=FOLDS, shuffle=False)
        scores = []
        # Convergence warnings are expected at extreme C and are not failures;
        # the iteration caps above bound the work.
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for train_idx, valid_idx in folds.split(x, y):
                estimator = self._estimator(assignment)
                estimator.fit(x[train_idx], y[train_idx])
                predictions = estimator.predict(x[valid_idx])
                scores.append(mean_squared_error(y[valid_idx], predictions))
        return float(np.mean(scores))
