"""Shared data model: samples, datasets, affine maps and constraint sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

METRICS = ("l1", "l2sq", "wl1", "lp")

_METRIC_ALIASES = {
    "l1": "l1",
    "manhattan": "l1",
    "l2sq": "l2sq",
    "squared-l2": "l2sq",
    "sql2": "l2sq",
    "wl1": "wl1",
    "weighted-l1": "wl1",
    "lp": "lp",
}


def canonical_metric(metric: str) -> str:
    try:
        return _METRIC_ALIASES[metric.lower()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}") from None


def as_vector(x, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or Inf")
    return v


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    label: int

    def __post_init__(self):
        object.__setattr__(self, "features", as_vector(self.features, "features"))
        object.__setattr__(self, "label", int(self.label))

    @property
    def dim(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus dense integer labels ``0..n_classes-1``."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = ()
    n_classes: int = 0
    class_names: tuple = ()

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y)
        if X.ndim != 2:
            raise ValueError("X must be a 2D array")
        if y.shape != (X.shape[0],):
            raise ValueError("y must have one label per row of X")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains NaN or Inf")
        y = y.astype(np.int64)
        n_classes = self.n_classes or (int(y.max()) + 1 if y.size else 0)
        if y.size and (y.min() < 0 or y.max() >= n_classes):
            raise ValueError("labels must lie in [0, n_classes)")
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError("feature_names length does not match the number of columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "n_classes", int(n_classes))
        object.__setattr__(self, "class_names", tuple(self.class_names) or tuple(str(c) for c in range(n_classes)))

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample], feature_names=(), n_classes: int = 0) -> "Dataset":
        if not samples:
            raise ValueError("empty sample list")
        X = np.stack([s.features for s in samples])
        y = np.array([s.label for s in samples])
        return cls(X, y, tuple(feature_names), n_classes)

    @property
    def samples(self) -> list:
        return [LabeledSample(x, int(c)) for x, c in zip(self.X, self.y)]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.n_classes, self.class_names)

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class AffineMap:
    """``x -> matrix @ x + offset`` from d-space into k-space."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.array(self.matrix, dtype=np.float64))
        o = np.array(self.offset, dtype=np.float64).reshape(-1)
        if o.shape[0] != M.shape[0]:
            raise ValueError("offset length must equal the number of matrix rows")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(o))):
            raise ValueError("affine map must be finite")
        if M.shape[0] > M.shape[1]:
            raise ValueError("affine map must not increase dimension (k <= d)")
        M.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "offset", o)

    @classmethod
    def identity(cls, d: int) -> "AffineMap":
        return cls(np.eye(d), np.zeros(d))

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x @ self.matrix.T + self.offset

    def then(self, outer: "AffineMap") -> "AffineMap":
        """Return ``outer(self(x))``."""
        if outer.in_dim != self.out_dim:
            raise ValueError("cannot compose maps with mismatched dimensions")
        return AffineMap(outer.matrix @ self.matrix, outer.matrix @ self.offset + outer.offset)


@dataclass(frozen=True)
class QuadConstraint:
    """``(x - center)^T P (x - center) <= bound`` with P positive semidefinite."""

    P: np.ndarray
    center: np.ndarray
    bound: float
    tag: object = None

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=np.float64))
        mu = as_vector(self.center, "center")
        if P.shape != (mu.shape[0], mu.shape[0]):
            raise ValueError("P must be square and match the center dimension")
        P = 0.5 * (P + P.T)
        if np.linalg.eigvalsh(P).min() < -1e-9 * max(1.0, np.abs(P).max()):
            raise ValueError("P must be positive semidefinite")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "center", mu)
        object.__setattr__(self, "bound", float(self.bound))

    def value(self, x) -> np.ndarray:
        diff = np.asarray(x, dtype=np.float64) - self.center
        return np.einsum("...i,ij,...j->...", diff, self.P, diff)


@dataclass(frozen=True)
class ConstraintSet:
    """Convex region ``{x : A x <= b}`` intersected with quadratic constraints."""

    A: np.ndarray
    b: np.ndarray
    quads: tuple = ()
    tag: object = None

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=np.float64))
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b must have the same number of rows")
        quads = tuple(self.quads)
        for q in quads:
            if q.center.shape[0] != A.shape[1]:
                raise ValueError("quadratic constraint dimension mismatch")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "quads", quads)

    @classmethod
    def empty(cls, d: int, tag=None) -> "ConstraintSet":
        return cls(np.zeros((0, d)), np.zeros(0), (), tag)

    @classmethod
    def from_ineqs(cls, ineqs, d: int, quads=(), tag=None) -> "ConstraintSet":
        ineqs = list(ineqs)
        if not ineqs:
            return cls(np.zeros((0, d)), np.zeros(0), quads, tag)
        A = np.array([np.asarray(a, dtype=np.float64).reshape(d) for a, _ in ineqs])
        b = np.array([float(v) for _, v in ineqs])
        return cls(A, b, quads, tag)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def linear_ineqs(self) -> list:
        return [(a.copy(), float(v)) for a, v in zip(self.A, self.b)]

    @property
    def quad_ineqs(self) -> list:
        return [(q.P, q.center, q.bound) for q in self.quads]

    def with_quad(self, quad: QuadConstraint) -> "ConstraintSet":
        return ConstraintSet(self.A, self.b, self.quads + (quad,), self.tag)

    def with_tag(self, tag) -> "ConstraintSet":
        return ConstraintSet(self.A, self.b, self.quads, tag)

    def violation(self, x) -> np.ndarray:
        """Largest constraint violation per point (<= 0 means feasible).

        Linear rows are measured as signed distance to their hyperplane and
        quadratic rows relative to ``max(1, bound)``.
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        worst = np.full(X.shape[0], -np.inf)
        if self.A.shape[0]:
            norms = np.sqrt((self.A * self.A).sum(axis=1))
            norms[norms == 0] = 1.0
            worst = np.maximum(worst, ((X @ self.A.T - self.b) / norms).max(axis=1))
        for q in self.quads:
            worst = np.maximum(worst, (q.value(X) - q.bound) / max(1.0, abs(q.bound)))
        if not self.A.shape[0] and not self.quads:
            worst = np.full(X.shape[0], -np.inf)
        return worst[0] if single else worst

    def contains(self, x, tol: float = 1e-9):
        return self.violation(x) <= tol

    def as_box(self):
        """Return (lower, upper) bounds if all constraints are axis aligned, else None."""
        if self.quads:
            return None
        d = self.dim
        lower = np.full(d, -np.inf)
        upper = np.full(d, np.inf)
        for a, v in zip(self.A, self.b):
            nz = np.flatnonzero(a)
            if nz.size != 1:
                return None
            i = nz[0]
            bound = v / a[i]
            if a[i] > 0:
                upper[i] = min(upper[i], bound)
            else:
                lower[i] = max(lower[i], bound)
        return lower, upper


def _check_weights(weights, d):
    w = as_vector(weights, "weights")
    if w.shape[0] != d:
        raise ValueError("weights must match the vector dimension")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return w


def distance(a, b, metric: str = "l2sq", weights=None, p: Optional[float] = None) -> float:
    """Distance between two vectors.

    ``metric`` is one of ``l1``, ``l2sq`` (squared Euclidean), ``wl1``
    (weighted Manhattan, ``weights`` required) or ``lp`` (``p`` required).
    """
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    metric = canonical_metric(metric)
    diff = a - b
    if metric == "l1":
        return float(np.abs(diff).sum())
    if metric == "l2sq":
        return float(diff @ diff)
    if metric == "wl1":
        w = _check_weights(np.ones_like(a) if weights is None else weights, a.shape[0])
        return float(w @ np.abs(diff))
    if p is None or p < 1:
        raise ValueError("lp metric needs p >= 1")
    if np.isinf(p):
        return float(np.abs(diff).max(initial=0.0))
    return float(np.linalg.norm(diff, ord=p))


def compose_affine(cs: ConstraintSet, amap: AffineMap) -> ConstraintSet:
    """Pull constraints stated on ``amap(x)`` back to constraints on ``x``."""
    if cs.dim != amap.out_dim:
        raise ValueError(f"constraint set lives in {cs.dim}-space but the map outputs {amap.out_dim}-space")
    M, o = amap.matrix, amap.offset
    A = cs.A @ M
    b = cs.b - cs.A @ o
    quads = []
    for q in cs.quads:
        # (Mx + o - mu)^T P (Mx + o - mu): needs a preimage of mu - o
        target = q.center - o
        center, *_ = np.linalg.lstsq(M, target, rcond=None)
        if np.linalg.norm(M @ center - target) > 1e-9 * max(1.0, np.linalg.norm(target)):
            raise ValueError("quadratic constraint center has no preimage under the map")
        quads.append(QuadConstraint(M.T @ q.P @ M, center, q.bound, q.tag))
    return ConstraintSet(A, b, tuple(quads), cs.tag)


REGULARIZATIONS = ("l2sq", "l1")


@dataclass(frozen=True)
class CounterfactualQuery:
    origin: LabeledSample
    target_label: int
    regularization: str = "l2sq"
    weights: Optional[np.ndarray] = None
    density_threshold: Optional[float] = None

    def __post_init__(self):
        reg = canonical_metric(self.regularization)
        if reg == "wl1":
            reg = "l1"
        if reg not in REGULARIZATIONS:
            raise ValueError(f"regularization must be one of {REGULARIZATIONS}")
        object.__setattr__(self, "regularization", reg)
        if int(self.target_label) == self.origin.label:
            raise ValueError("target label must differ from the origin label")
        if self.weights is not None:
            object.__setattr__(self, "weights", _check_weights(self.weights, self.origin.dim))
        if self.density_threshold is not None and not self.density_threshold > 0:
            raise ValueError("density threshold must be positive")


@dataclass(frozen=True)
class CounterfactualResult:
    point: np.ndarray
    cost: float
    target_label: int
    feasible: bool
    kkt_residual: float = 0.0
    branch: object = None
    status: str = "optimal"
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "point": [float(v) for v in self.point],
            "cost": float(self.cost),
            "target_label": int(self.target_label),
            "feasible": bool(self.feasible),
            "kkt_residual": float(self.kkt_residual),
            "branch": _jsonable(self.branch),
            "status": self.status,
        }


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(e) for e in v]
    if isinstance(v, np.integer):
        return int(v)
    return v
