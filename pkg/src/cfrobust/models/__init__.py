"""Classifier families and their target-class decision regions."""

from .glvq import GlvqModel, fit_glvq
from .linear import LinearBinaryModel, SoftmaxModel, fit_linear, fit_softmax
from .pipeline import PcaPipelineModel, PipelineModel, fit_pca, fit_standardizer
from .serialize import model_from_dict, model_to_dict
from .tree import TreeModel, fit_tree

MODEL_KINDS = ("linear", "softmax", "glvq", "tree")


def predict(model, x):
    return model.predict(x)


def decision_regions(model, target) -> list:
    return model.decision_regions(target)


def in_target_region(model, x, target, tol: float = 1e-9) -> bool:
    """Membership in the closed target region (boundary points count as the target)."""
    return any(bool(cs.contains(x, tol)) for cs in model.decision_regions(target))


__all__ = [
    "GlvqModel",
    "LinearBinaryModel",
    "MODEL_KINDS",
    "PcaPipelineModel",
    "PipelineModel",
    "SoftmaxModel",
    "TreeModel",
    "decision_regions",
    "fit_glvq",
    "fit_linear",
    "fit_pca",
    "fit_softmax",
    "fit_standardizer",
    "fit_tree",
    "in_target_region",
    "model_from_dict",
    "model_to_dict",
    "predict",
]
