"""Closest and plausible counterfactuals.

Each model exposes its target region as a union of convex pieces.  A closest
counterfactual solves one convex program per piece and keeps the cheapest;
a plausible one additionally intersects every piece with every ellipsoid on
which a target-class mixture component reaches the density threshold.
Boundary points count as the target class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ConstraintSet, CounterfactualResult, LabeledSample, as_vector, canonical_metric
from .density import GmmDensity, component_constraint
from .models import LinearBinaryModel
from .optim import DEFAULT_CONFIG, OPTIMAL, SolverConfig, project_box, solve_lp_l1, solve_qcqp, solve_qp

_TIE = 1e-12


def _origin(x):
    if isinstance(x, LabeledSample):
        return x.features
    return as_vector(x, "x")


def _reg(metric):
    metric = canonical_metric(metric)
    if metric == "wl1":
        return "l1"
    if metric not in ("l1", "l2sq"):
        raise ValueError("counterfactual regularisation must be l2sq or (weighted) l1")
    return metric


def _cost(x, point, metric, weights):
    diff = point - x
    if metric == "l2sq":
        return float(diff @ diff)
    w = np.ones_like(x) if weights is None else weights
    return float(w @ np.abs(diff))


def _infeasible(x, target, reason="infeasible"):
    return CounterfactualResult(x.copy(), float("inf"), int(target), False, float("inf"), None, reason)


def closest_cf_linear(x, model: LinearBinaryModel, target=None) -> CounterfactualResult:
    """Orthogonal projection onto the hyperplane ``w'x + b = 0``."""
    x = _origin(x)
    if target is None:
        neg, pos = model.classes
        target = neg if model.predict(x) == pos else pos
    shift = float(model.w @ x + model.b)
    point = x - shift * model.w
    return CounterfactualResult(point, shift * shift, int(target), True, 0.0, ("halfspace", int(target)))


def linear_cf_points(X, model: LinearBinaryModel) -> np.ndarray:
    """Row-wise closed-form counterfactuals for a batch of points."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return X - np.outer(X @ model.w + model.b, model.w)


def _solve_piece(x, cs: ConstraintSet, metric, weights, cfg):
    box = cs.as_box()
    if box is not None:
        return project_box(x, *box)
    if metric == "l2sq":
        return solve_qp(x, cs, cfg)
    return solve_lp_l1(x, weights, cs, cfg)


def nudge(point, cs: ConstraintSet, eta: float = 1e-9):
    """Step ``eta`` into the interior across the constraints active at ``point``."""
    if cs.A.shape[0] == 0:
        return point
    norms = np.sqrt((cs.A * cs.A).sum(axis=1))
    norms[norms == 0] = 1.0
    slack = (cs.A @ point - cs.b) / norms
    active = slack > -max(eta, 1e-12)
    if not np.any(active):
        return point
    direction = -(cs.A[active] / norms[active, None]).sum(axis=0)
    n = np.linalg.norm(direction)
    if n == 0:
        return point
    return point + eta * direction / n


def closest_cf(
    x,
    model,
    target,
    metric: str = "l2sq",
    weights=None,
    cfg: SolverConfig = DEFAULT_CONFIG,
    eta: Optional[float] = None,
) -> CounterfactualResult:
    """Cheapest point of the target region under ``metric`` (``l2sq`` or ``l1``)."""
    x = _origin(x)
    metric = _reg(metric)
    if weights is not None:
        weights = as_vector(weights, "weights")
    target = int(target)
    if model.predict(x) == target:
        return CounterfactualResult(x.copy(), 0.0, target, True, 0.0, None, OPTIMAL)
    best = None
    for cs in model.decision_regions(target):
        out = _solve_piece(x, cs, metric, weights, cfg)
        if out.status != OPTIMAL:
            continue
        cost = _cost(x, out.point, metric, weights)
        if best is None or cost < best[0] - _TIE * (1.0 + best[0]):
            best = (cost, out, cs)
    if best is None:
        return _infeasible(x, target)
    cost, out, cs = best
    point = out.point if eta is None else nudge(out.point, cs, eta)
    return CounterfactualResult(point, _cost(x, point, metric, weights), target, True, out.kkt_residual, cs.tag, OPTIMAL)


def plausible_cf(
    x,
    model,
    target,
    gmm: GmmDensity,
    threshold=None,
    *,
    log_threshold=None,
    metric: str = "l2sq",
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> CounterfactualResult:
    """Cheapest point of the target region whose target-class density clears the threshold.

    ``threshold``/``log_threshold`` may be scalars or per-class arrays.  Only
    the squared Euclidean regularisation is supported.
    """
    x = _origin(x)
    if _reg(metric) != "l2sq":
        raise ValueError("plausible counterfactuals support the l2sq regularisation only")
    target = int(target)
    if log_threshold is None:
        if threshold is None:
            raise ValueError("a density threshold is required")
        t = np.asarray(threshold, dtype=np.float64)
        t = t[target] if t.ndim else t
        if not t > 0:
            raise ValueError("density threshold must be positive")
        lt = float(np.log(t))
    else:
        lt = np.asarray(log_threshold, dtype=np.float64)
        lt = float(lt[target] if lt.ndim else lt)
    quads = []
    for j, comp in enumerate(gmm.class_components(target)):
        q = component_constraint(comp, log_threshold=lt)
        if q is not None:
            quads.append((j, q))
    if not quads:
        return _infeasible(x, target)

    # closest cost of each piece bounds every (piece, component) program from below
    pieces = []
    for i, cs in enumerate(model.decision_regions(target)):
        lb = _solve_piece(x, cs, "l2sq", None, cfg)
        if lb.status == OPTIMAL:
            pieces.append((_cost(x, lb.point, "l2sq", None), i, cs))
    pieces.sort(key=lambda p: (p[0], p[1]))

    best = None  # (cost, order key, outcome, tag)
    for lower, i, cs in pieces:
        if best is not None and lower > best[0] + _TIE * (1.0 + best[0]):
            break
        for j, q in quads:
            out = solve_qcqp(x, cs.with_quad(q), cfg)
            if out.status != OPTIMAL:
                continue
            cost = _cost(x, out.point, "l2sq", None)
            key = (i, j)
            if (
                best is None
                or cost < best[0] - _TIE * (1.0 + best[0])
                or (abs(cost - best[0]) <= _TIE * (1.0 + best[0]) and key < best[1])
            ):
                best = (cost, key, out, (cs.tag, ("component", j)))
    if best is None:
        return _infeasible(x, target)
    cost, _, out, tag = best
    return CounterfactualResult(out.point, cost, target, True, out.kkt_residual, tag, OPTIMAL)


@dataclass(frozen=True)
class CounterfactualGenerator:
    """Bundles a model with a counterfactual mode so it can be called as ``gen(x, target)``."""

    model: object
    mode: str = "closest"
    metric: str = "l2sq"
    gmm: Optional[GmmDensity] = None
    log_thresholds: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    cfg: SolverConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if self.mode not in ("closest", "plausible"):
            raise ValueError("mode must be 'closest' or 'plausible'")
        if self.mode == "plausible" and (self.gmm is None or self.log_thresholds is None):
            raise ValueError("plausible mode needs a fitted GMM and thresholds")

    def __call__(self, x, target) -> CounterfactualResult:
        if self.mode == "closest":
            if isinstance(self.model, LinearBinaryModel) and _reg(self.metric) == "l2sq":
                if self.model.predict(_origin(x)) == int(target):
                    return CounterfactualResult(_origin(x).copy(), 0.0, int(target), True, 0.0, None, OPTIMAL)
                return closest_cf_linear(x, self.model, target)
            return closest_cf(x, self.model, target, self.metric, self.weights, self.cfg)
        return plausible_cf(
            x, self.model, target, self.gmm, log_threshold=self.log_thresholds, metric=self.metric, cfg=self.cfg
        )
