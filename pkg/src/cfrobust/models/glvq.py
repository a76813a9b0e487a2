from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._accel import jit
from ..core import ConstraintSet, Dataset


@dataclass(frozen=True)
class GlvqModel:
    """Nearest-prototype classifier (squared Euclidean distance)."""

    prototypes: np.ndarray
    labels: np.ndarray
    history: tuple = field(default=(), compare=False, repr=False)

    kind = "glvq"

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.prototypes, dtype=np.float64))
        lab = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if lab.shape[0] != P.shape[0]:
            raise ValueError("one label per prototype required")
        if not np.all(np.isfinite(P)):
            raise ValueError("non-finite prototypes")
        object.__setattr__(self, "prototypes", P)
        object.__setattr__(self, "labels", lab)

    @property
    def dim(self) -> int:
        return self.prototypes.shape[1]

    @property
    def classes(self) -> tuple:
        return tuple(int(c) for c in np.unique(self.labels))

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} features, got {x.shape[-1]}")
        X = np.atleast_2d(x)
        d2 = ((X[:, None, :] - self.prototypes[None, :, :]) ** 2).sum(axis=2)
        out = self.labels[np.argmin(d2, axis=1)]
        return int(out[0]) if x.ndim == 1 else out

    def decision_regions(self, target) -> list:
        """One polytope per target prototype: it beats every other-class prototype.

        ``|x - p_k|^2 <= |x - p_j|^2  <=>  2 (p_j - p_k)' x <= |p_j|^2 - |p_k|^2``.
        """
        target = int(target)
        if target not in self.classes:
            raise ValueError(f"unknown label {target!r}")
        P = self.prototypes
        sq = (P * P).sum(axis=1)
        rivals = np.flatnonzero(self.labels != target)
        regions = []
        for k in np.flatnonzero(self.labels == target):
            A = 2.0 * (P[rivals] - P[k])
            rhs = sq[rivals] - sq[k]
            regions.append(ConstraintSet(A, rhs, tag=("prototype", int(k))))
        return regions


@jit
def glvq_epoch(X, y, protos, plabels, order, lr):
    """One SGD pass over the standard GLVQ cost; returns the summed cost."""
    n_protos, d = protos.shape
    total = 0.0
    for idx in order:
        x = X[idx]
        best_pos = -1
        best_neg = -1
        d_pos = np.inf
        d_neg = np.inf
        for j in range(n_protos):
            dist = 0.0
            for k in range(d):
                t = x[k] - protos[j, k]
                dist += t * t
            if plabels[j] == y[idx]:
                if dist < d_pos:
                    d_pos = dist
                    best_pos = j
            elif dist < d_neg:
                d_neg = dist
                best_neg = j
        denom = d_pos + d_neg
        if best_pos < 0 or best_neg < 0 or denom <= 0.0:
            continue
        mu = (d_pos - d_neg) / denom
        f = 1.0 / (1.0 + np.exp(-mu))
        total += f
        fprime = f * (1.0 - f)
        scale_pos = lr * fprime * 4.0 * d_neg / (denom * denom)
        scale_neg = lr * fprime * 4.0 * d_pos / (denom * denom)
        for k in range(d):
            protos[best_pos, k] += scale_pos * (x[k] - protos[best_pos, k])
            protos[best_neg, k] -= scale_neg * (x[k] - protos[best_neg, k])
    return total


def fit_glvq(
    data: Dataset,
    prototypes_per_class: int = 3,
    epochs: int = 100,
    lr: float = 0.05,
    seed: int = 0,
    jitter: float = 0.1,
) -> GlvqModel:
    """GLVQ with prototypes started at class means plus seeded jitter.

    Sigmoid steepness is 1 and the learning rate decays linearly to zero.
    """
    if prototypes_per_class < 1:
        raise ValueError("prototypes_per_class must be >= 1")
    if data.n == 0:
        raise ValueError("cannot fit on an empty dataset")
    classes = np.unique(data.y)
    if classes.size < 2:
        raise ValueError("GLVQ needs at least two classes")
    rng = np.random.default_rng(seed)
    protos, plabels = [], []
    for c in classes:
        Xc = data.X[data.y == c]
        if Xc.shape[0] < prototypes_per_class:
            raise ValueError(f"class {c} has {Xc.shape[0]} samples, fewer than {prototypes_per_class} prototypes")
        mean = Xc.mean(axis=0)
        spread = Xc.std(axis=0) + 1e-12
        for _ in range(prototypes_per_class):
            protos.append(mean + jitter * spread * rng.standard_normal(mean.shape[0]))
            plabels.append(int(c))
    protos = np.array(protos)
    plabels = np.array(plabels, dtype=np.int64)
    X = np.ascontiguousarray(data.X)
    y = np.ascontiguousarray(data.y)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(X.shape[0])
        rate = lr * (1.0 - epoch / epochs)
        history.append(glvq_epoch(X, y, protos, plabels, order, rate) / X.shape[0])
    return GlvqModel(protos, plabels, tuple(history))
