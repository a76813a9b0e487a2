"""Class-conditional Gaussian mixtures and the density constraint.

A mixture density ``p(x) >= t`` is not convex, but each weighted component
alone reaching ``t`` is an ellipsoid, and the mixture dominates any single
weighted component.  Plausible counterfactual search enumerates these
ellipsoids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import Dataset, QuadConstraint, as_vector

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GmmComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray
    precision: np.ndarray = field(init=False, repr=False)
    logdet: float = field(init=False, repr=False)

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=np.float64)
        cov = 0.5 * (cov + cov.T)
        mean = as_vector(self.mean, "mean")
        if not 0.0 < self.weight <= 1.0 + 1e-12:
            raise ValueError("component weight must lie in (0, 1]")
        L = np.linalg.cholesky(cov)
        Linv = np.linalg.solve(L, np.eye(L.shape[0]))
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "precision", Linv.T @ Linv)
        object.__setattr__(self, "logdet", float(2.0 * np.log(np.diag(L)).sum()))

    def log_pdf(self, X) -> np.ndarray:
        """Log of the (unweighted) Gaussian density."""
        diff = np.atleast_2d(X) - self.mean
        maha = np.einsum("ij,jk,ik->i", diff, self.precision, diff)
        return -0.5 * (maha + self.logdet + self.mean.shape[0] * LOG_2PI)

    @property
    def log_peak(self) -> float:
        """Log of the weighted density at the mean."""
        return float(np.log(self.weight) - 0.5 * (self.logdet + self.mean.shape[0] * LOG_2PI))


@dataclass(frozen=True)
class GmmDensity:
    components: tuple  # per class: tuple of GmmComponent
    history: tuple = field(default=(), compare=False, repr=False)

    @property
    def n_classes(self) -> int:
        return len(self.components)

    @property
    def n_components(self) -> tuple:
        return tuple(len(c) for c in self.components)

    @property
    def dim(self) -> int:
        return self.components[0][0].mean.shape[0]

    def class_components(self, label) -> tuple:
        label = int(label)
        if not 0 <= label < len(self.components) or not self.components[label]:
            raise ValueError(f"unknown class {label!r}")
        return self.components[label]

    def to_dict(self) -> dict:
        return {
            "classes": [
                [{"weight": c.weight, "mean": c.mean.tolist(), "cov": c.cov.tolist()} for c in comps]
                for comps in self.components
            ]
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GmmDensity":
        return cls(tuple(
            tuple(GmmComponent(c["weight"], np.array(c["mean"]), np.array(c["cov"])) for c in comps)
            for comps in doc["classes"]
        ))


def log_density(gmm: GmmDensity, label, x):
    """Log mixture density of class ``label`` at ``x`` (vector or rows)."""
    comps = gmm.class_components(label)
    x = np.asarray(x, dtype=np.float64)
    terms = np.stack([np.log(c.weight) + c.log_pdf(x) for c in comps])
    out = logsumexp(terms, axis=0)
    return float(out[0]) if x.ndim == 1 else out


def _kmeanspp(X, k, rng):
    centers = [X[rng.integers(X.shape[0])]]
    for _ in range(1, k):
        d2 = np.min([((X - c) ** 2).sum(axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0:
            return None
        centers.append(X[rng.choice(X.shape[0], p=d2 / total)])
    return np.array(centers)


def _estep(X, weights, means, precs, logdets):
    d = X.shape[1]
    logp = np.empty((X.shape[0], len(weights)))
    for j in range(len(weights)):
        diff = X - means[j]
        maha = np.einsum("ij,jk,ik->i", diff, precs[j], diff)
        logp[:, j] = np.log(weights[j]) - 0.5 * (maha + logdets[j] + d * LOG_2PI)
    norm = logsumexp(logp, axis=1)
    return np.exp(logp - norm[:, None]), float(norm.sum())


def _mstep(X, resp, penalty):
    nk = resp.sum(axis=0) + 1e-300
    weights = nk / X.shape[0]
    means = (resp.T @ X) / nk[:, None]
    d = X.shape[1]
    covs, precs, logdets = [], [], []
    for j in range(resp.shape[1]):
        diff = X - means[j]
        cov = (resp[:, j, None] * diff).T @ diff / nk[j] + (penalty / nk[j]) * np.eye(d)
        cov = 0.5 * (cov + cov.T)
        L = np.linalg.cholesky(cov)
        Linv = np.linalg.solve(L, np.eye(d))
        covs.append(cov)
        precs.append(Linv.T @ Linv)
        logdets.append(2.0 * np.log(np.diag(L)).sum())
    return weights, means, covs, precs, logdets


def _em_class(X, k, rng, max_iter, reg, tol=1e-10):
    """EM for one class.

    The covariance update is the exact maximiser of the log-likelihood minus
    ``(reg * n / 2) * sum_j tr(Sigma_j^{-1})``; every component therefore gets
    at least ``reg * I`` (exactly ``reg * I`` when k = 1) and the penalised
    objective is non-decreasing.
    """
    n, d = X.shape
    penalty = reg * n
    if k == 1:
        resp = np.ones((n, 1))
    else:
        centers = _kmeanspp(X, k, rng)
        if centers is None:
            return _em_class(X, 1, rng, max_iter, reg, tol)
        labels = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
        resp = np.eye(k)[labels]
        if np.any(resp.sum(axis=0) == 0):
            resp = 0.9 * resp + 0.1 / k
    history = []
    params = _mstep(X, resp, penalty)
    for _ in range(max_iter):
        weights, means, covs, precs, logdets = params
        resp, ll = _estep(X, weights, means, precs, logdets)
        history.append(ll - 0.5 * penalty * sum(np.trace(p) for p in precs))
        if k == 1 or (len(history) > 1 and history[-1] - history[-2] < tol * max(1.0, abs(history[-1]))):
            break
        params = _mstep(X, resp, penalty)
    weights, means, covs, precs, logdets = params
    comps = tuple(GmmComponent(float(w), m, c) for w, m, c in zip(weights, means, covs))
    return comps, history, ll


def _n_params(k, d):
    return (k - 1) + k * d + k * d * (d + 1) // 2


def fit_gmm(
    data: Dataset,
    n_components=None,
    seed: int = 0,
    max_iter: int = 200,
    reg: float = 1e-6,
    candidates=(1, 2, 3),
) -> GmmDensity:
    """Per-class GMM.

    ``n_components`` may be an int, a per-class sequence, or ``None`` to pick
    per class by BIC among ``candidates`` (capped by class size).
    """
    if not reg > 0:
        raise ValueError("reg must be positive; unregularised EM can collapse onto single points")
    rng = np.random.default_rng(seed)
    n_classes = data.n_classes
    per_class, histories = [], []
    for c in range(n_classes):
        Xc = data.X[data.y == c]
        if Xc.shape[0] == 0:
            raise ValueError(f"class {c} has no samples")
        if n_components is None:
            options = [k for k in candidates if k <= Xc.shape[0]] or [1]
        else:
            k = n_components if np.isscalar(n_components) else n_components[c]
            if k < 1:
                raise ValueError("n_components must be >= 1")
            if k > Xc.shape[0]:
                raise ValueError(f"class {c} has {Xc.shape[0]} samples, fewer than {k} components")
            options = [int(k)]
        best = None
        for k in options:
            comps, hist, ll = _em_class(Xc, k, rng, max_iter, reg)
            bic = -2.0 * ll + _n_params(len(comps), Xc.shape[1]) * np.log(Xc.shape[0])
            if best is None or bic < best[0] - 1e-9:
                best = (bic, comps, hist)
        per_class.append(best[1])
        histories.append(tuple(best[2]))
    return GmmDensity(tuple(per_class), tuple(histories))


def component_constraint(comp: GmmComponent, threshold=None, log_threshold=None):
    """Ellipsoid on which this weighted component alone has density >= threshold.

    Returns a :class:`QuadConstraint` with ``P = Sigma^{-1}`` and bound
    ``2 (ln w - ln t) - ln det(2 pi Sigma)``, or ``None`` when the component's
    peak is below the threshold.
    """
    if log_threshold is None:
        if threshold is None or not threshold > 0:
            raise ValueError("threshold must be positive")
        log_threshold = np.log(threshold)
    d = comp.mean.shape[0]
    bound = 2.0 * (np.log(comp.weight) - log_threshold) - (comp.logdet + d * LOG_2PI)
    if bound < 0:
        return None
    return QuadConstraint(comp.precision, comp.mean, bound)


def choose_log_threshold(gmm: GmmDensity, data: Dataset, quantile: float = 0.25) -> np.ndarray:
    """Per-class log threshold: the ``quantile`` of training log densities of that class."""
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    out = np.empty(gmm.n_classes)
    for c in range(gmm.n_classes):
        Xc = data.X[data.y == c]
        if Xc.shape[0] == 0:
            raise ValueError(f"class {c} has no samples")
        logs = np.atleast_1d(log_density(gmm, c, Xc))
        # order statistic (no interpolation) so the quantile commutes with exp
        out[c] = np.quantile(logs, quantile, method="inverted_cdf")
    return out


def choose_threshold(gmm: GmmDensity, data: Dataset, quantile: float = 0.25) -> np.ndarray:
    """Per-class density threshold (density scale)."""
    return np.exp(choose_log_threshold(gmm, data, quantile))
