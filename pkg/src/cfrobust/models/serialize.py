"""JSON-friendly (de)serialisation of models.

Every document carries ``"kind"``; array parameters are nested lists.
"""

import numpy as np

from ..core import AffineMap
from .glvq import GlvqModel
from .linear import LinearBinaryModel, SoftmaxModel
from .pipeline import PipelineModel
from .tree import TreeModel


def _arr(a):
    return np.asarray(a).tolist()


def map_to_dict(amap: AffineMap) -> dict:
    return {"matrix": _arr(amap.matrix), "offset": _arr(amap.offset)}


def map_from_dict(doc: dict) -> AffineMap:
    return AffineMap(np.array(doc["matrix"], dtype=np.float64), np.array(doc["offset"], dtype=np.float64))


def model_to_dict(model) -> dict:
    if isinstance(model, LinearBinaryModel):
        return {"kind": "linear", "w": _arr(model.w), "b": float(model.b), "classes": list(model.classes)}
    if isinstance(model, SoftmaxModel):
        return {"kind": "softmax", "W": _arr(model.W), "b": _arr(model.b)}
    if isinstance(model, GlvqModel):
        return {"kind": "glvq", "prototypes": _arr(model.prototypes), "labels": _arr(model.labels)}
    if isinstance(model, TreeModel):
        return {
            "kind": "tree",
            "feature": _arr(model.feature),
            "threshold": _arr(model.threshold),
            "left": _arr(model.left),
            "right": _arr(model.right),
            "value": _arr(model.value),
            "n_features": int(model.n_features),
            "max_depth": int(model.max_depth),
        }
    if isinstance(model, PipelineModel):
        return {"kind": "pipeline", "map": map_to_dict(model.map), "inner": model_to_dict(model.inner)}
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "linear":
        return LinearBinaryModel(np.array(doc["w"]), doc["b"], tuple(doc.get("classes", (-1, 1))))
    if kind == "softmax":
        return SoftmaxModel(np.array(doc["W"]), np.array(doc["b"]))
    if kind == "glvq":
        return GlvqModel(np.array(doc["prototypes"]), np.array(doc["labels"]))
    if kind == "tree":
        return TreeModel(
            np.array(doc["feature"]), np.array(doc["threshold"]), np.array(doc["left"]),
            np.array(doc["right"]), np.array(doc["value"]), int(doc["n_features"]), int(doc["max_depth"]),
        )
    if kind == "pipeline":
        return PipelineModel(model_from_dict(doc["inner"]), map_from_dict(doc["map"]))
    raise ValueError(f"unknown model kind {kind!r}")
