from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ConstraintSet, Dataset, as_vector


def _check_dim(x, d):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != d:
        raise ValueError(f"expected {d} features, got {x.shape[-1]}")
    return x


@dataclass(frozen=True)
class LinearBinaryModel:
    """``h(x) = sign(w'x + b)`` with unit-norm ``w``; the boundary counts as positive.

    ``classes`` names the (negative, positive) labels.
    """

    w: np.ndarray
    b: float = 0.0
    classes: tuple = (-1, 1)

    def __post_init__(self):
        w = as_vector(self.w, "w")
        norm = np.linalg.norm(w)
        if norm == 0:
            raise ValueError("w must be nonzero")
        object.__setattr__(self, "w", w / norm)
        object.__setattr__(self, "b", float(self.b) / norm)
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))

    kind = "linear"

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def score(self, x):
        return _check_dim(x, self.dim) @ self.w + self.b

    def predict(self, x):
        s = self.score(x)
        neg, pos = self.classes
        if np.ndim(s) == 0:
            return pos if s >= 0 else neg
        return np.where(s >= 0, pos, neg)

    def decision_regions(self, target) -> list:
        neg, pos = self.classes
        if target == pos:
            return [ConstraintSet(-self.w[None, :], np.array([self.b]), tag=("halfspace", pos))]
        if target == neg:
            return [ConstraintSet(self.w[None, :], np.array([-self.b]), tag=("halfspace", neg))]
        raise ValueError(f"unknown label {target!r}")


@dataclass(frozen=True)
class SoftmaxModel:
    """Multinomial logistic regression; prediction is ``argmax(W x + b)``."""

    W: np.ndarray
    b: np.ndarray
    history: tuple = field(default=(), compare=False, repr=False)

    kind = "softmax"

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=np.float64))
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if b.shape[0] != W.shape[0]:
            raise ValueError("bias length must equal number of classes")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite softmax parameters")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    @property
    def classes(self) -> tuple:
        return tuple(range(self.W.shape[0]))

    def logits(self, x):
        return _check_dim(x, self.dim) @ self.W.T + self.b

    def predict_proba(self, x):
        z = self.logits(x)
        z = z - z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)

    def predict(self, x):
        out = np.argmax(self.logits(x), axis=-1)
        return int(out) if np.ndim(out) == 0 else out

    def decision_regions(self, target) -> list:
        k = int(target)
        if k not in self.classes:
            raise ValueError(f"unknown label {target!r}")
        others = [j for j in self.classes if j != k]
        A = self.W[others] - self.W[k]
        rhs = self.b[k] - self.b[others]
        return [ConstraintSet(A, rhs, tag=("softmax", k))]

    def to_linear(self) -> LinearBinaryModel:
        if self.W.shape[0] != 2:
            raise ValueError("only a two-class softmax reduces to a binary linear model")
        return LinearBinaryModel(self.W[1] - self.W[0], self.b[1] - self.b[0], classes=(0, 1))


def _softmax_objective(W, b, X, Y, l2):
    z = X @ W.T + b
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = X.shape[0]
    loss = -(Y * logp).sum() / n + 0.5 * l2 * (W * W).sum()
    P = np.exp(logp)
    G = (P - Y) / n
    return loss, G.T @ X + l2 * W, G.sum(axis=0)


def fit_softmax(data: Dataset, epochs: int = 300, lr: float = 1.0, l2: float = 1e-3) -> SoftmaxModel:
    """Full-batch gradient descent with Armijo backtracking (objective never increases)."""
    if data.n == 0:
        raise ValueError("cannot fit on an empty dataset")
    n_classes = max(data.n_classes, int(data.y.max()) + 1)
    if np.unique(data.y).size < 2:
        raise ValueError("softmax regression needs at least two classes")
    X = data.X
    Y = np.eye(n_classes)[data.y]
    W = np.zeros((n_classes, X.shape[1]))
    b = np.zeros(n_classes)
    loss, gW, gb = _softmax_objective(W, b, X, Y, l2)
    history = [loss]
    step = lr
    for _ in range(epochs):
        gnorm2 = (gW * gW).sum() + (gb * gb).sum()
        if gnorm2 < 1e-20:
            break
        while True:
            W_new = W - step * gW
            b_new = b - step * gb
            new_loss, ngW, ngb = _softmax_objective(W_new, b_new, X, Y, l2)
            if new_loss <= loss - 0.5 * step * gnorm2 or step < 1e-12:
                break
            step *= 0.5
        if new_loss > loss:
            break
        W, b, loss, gW, gb = W_new, b_new, new_loss, ngW, ngb
        history.append(loss)
        step = min(step * 1.5, 10 * lr)
    return SoftmaxModel(W, b, tuple(history))


def fit_linear(data: Dataset, epochs: int = 300, lr: float = 1.0, l2: float = 1e-3) -> LinearBinaryModel:
    """Binary logistic regression, returned as a unit-norm hyperplane."""
    if data.n_classes != 2:
        raise ValueError("linear binary model needs exactly two classes")
    return fit_softmax(data, epochs, lr, l2).to_linear()
