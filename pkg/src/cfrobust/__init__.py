"""Counterfactual explanations and their robustness under input perturbations."""

from ._accel import NUMBA_ENABLED
from .core import (
    AffineMap,
    ConstraintSet,
    CounterfactualQuery,
    CounterfactualResult,
    Dataset,
    LabeledSample,
    QuadConstraint,
    compose_affine,
    distance,
)

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "ConstraintSet",
    "CounterfactualQuery",
    "CounterfactualResult",
    "Dataset",
    "LabeledSample",
    "NUMBA_ENABLED",
    "QuadConstraint",
    "__version__",
    "compose_affine",
    "distance",
]
