from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import AffineMap, Dataset, compose_affine
from .linear import LinearBinaryModel


def fit_standardizer(X) -> AffineMap:
    """z-score map; constant columns keep unit scale."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std < 1e-12] = 1.0
    return AffineMap(np.diag(1.0 / std), -mean / std)


def fit_pca(data, k: int, return_variance: bool = False):
    """Top-``k`` principal directions as an affine map ``x -> V (x - mean)``.

    Component signs are fixed so the largest-magnitude loading is positive.
    """
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    n, d = X.shape
    if k < 1 or k > d:
        raise ValueError(f"k must lie in [1, {d}], got {k}")
    if n < k + 1:
        raise ValueError("need at least k + 1 samples")
    mean = X.mean(axis=0)
    _, s, Vt = np.linalg.svd(X - mean, full_matrices=False)
    V = Vt[:k].copy()
    for i in range(k):
        j = np.argmax(np.abs(V[i]))
        if V[i, j] < 0:
            V[i] = -V[i]
    amap = AffineMap(V, -V @ mean)
    if return_variance:
        var = np.zeros(k)
        m = min(k, s.shape[0])
        var[:m] = s[:m] ** 2 / max(n - 1, 1)
        return amap, var
    return amap


@dataclass(frozen=True)
class PipelineModel:
    """A model trained on ``map(x)``; regions are pulled back into input space."""

    inner: object
    map: AffineMap

    kind = "pipeline"

    def __post_init__(self):
        if self.map.out_dim != self.inner.dim:
            raise ValueError("map output dimension must match the inner model")

    @property
    def dim(self) -> int:
        return self.map.in_dim

    @property
    def classes(self) -> tuple:
        return self.inner.classes

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} features, got {x.shape[-1]}")
        return self.inner.predict(self.map(x))

    def decision_regions(self, target) -> list:
        return [compose_affine(cs, self.map) for cs in self.inner.decision_regions(target)]

    def to_linear(self) -> LinearBinaryModel:
        """Collapse a pipeline around a binary linear model into one hyperplane."""
        inner = self.inner
        if not isinstance(inner, LinearBinaryModel):
            inner = inner.to_linear()
        M, o = self.map.matrix, self.map.offset
        return LinearBinaryModel(M.T @ inner.w, inner.w @ o + inner.b, inner.classes)


PcaPipelineModel = PipelineModel
