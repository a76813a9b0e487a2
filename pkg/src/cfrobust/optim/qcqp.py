"""Euclidean projection onto a polytope intersected with one ellipsoid.

The ellipsoid is dualised with a scalar multiplier ``nu``.  For fixed ``nu``
the inner problem ``min |x - x0|^2 + nu * q(x)`` over the polytope is a
strictly convex QP; ``q(x(nu))`` is non-increasing in ``nu``, so the optimal
multiplier is the root of ``q(x(nu)) - c``, found by safeguarded regula falsi.
"""

import numpy as np

from ..core import ConstraintSet, as_vector
from ._types import DEFAULT_CONFIG, INFEASIBLE, MAX_ITER, OPTIMAL, SolveOutcome, SolverConfig
from .qp import solve_quadratic


def _inner(x0, P, mu, nu, A, b, cfg):
    d = x0.shape[0]
    H = np.eye(d) + nu * P
    g = -x0 - nu * (P @ mu)
    return solve_quadratic(H, g, A, b, cfg)


def _kkt(x0, P, mu, bound, nu, A, b, x, lam):
    stat = (x - x0) + nu * (P @ (x - mu))
    if A.shape[0]:
        stat = stat + A.T @ lam
    scale = 1.0 + np.abs(x0).max() + nu * np.abs(P @ (x - mu)).max()
    res = np.abs(stat).max() / scale
    diff = x - mu
    qv = diff @ P @ diff
    res = max(res, max(qv - bound, 0.0) / (1.0 + abs(bound)))
    res = max(res, nu * abs(qv - bound) / (scale * (1.0 + abs(bound))))
    if A.shape[0]:
        slack = A @ x - b
        res = max(res, np.maximum(slack, 0.0).max() / (1.0 + np.abs(b).max()))
    return float(res)


def solve_qcqp(x0, cs: ConstraintSet, cfg: SolverConfig = DEFAULT_CONFIG) -> SolveOutcome:
    """Minimise ``|x - x0|^2`` subject to ``cs`` (linear rows plus exactly one quadratic)."""
    x0 = as_vector(x0, "x0")
    if len(cs.quads) != 1:
        raise ValueError("solve_qcqp needs exactly one quadratic constraint")
    if cs.dim != x0.shape[0]:
        raise ValueError("constraint set and x0 have different dimensions")
    quad = cs.quads[0]
    P, mu, bound = quad.P, quad.center, quad.bound
    A = np.ascontiguousarray(cs.A)
    b = np.ascontiguousarray(cs.b)
    d = x0.shape[0]
    ctol = cfg.feas_tol * max(1.0, abs(bound))
    if bound < 0:
        return SolveOutcome(x0.copy(), float("inf"), INFEASIBLE, float("inf"), 0)

    def qval(x):
        diff = x - mu
        return float(diff @ P @ diff)

    def outcome(x, lam, nu, status, iters):
        diff = x - x0
        kkt = _kkt(x0, P, mu, bound, nu, A, b, x, lam) if status == OPTIMAL else float("inf")
        return SolveOutcome(x, float(diff @ diff), status, kkt, iters, lam, float(nu))

    x, lam, status, iters = _inner(x0, P, mu, 0.0, A, b, cfg)
    if status != OPTIMAL:
        return outcome(x, lam, 0.0, status, iters)
    g_lo = qval(x) - bound
    if g_lo <= ctol:
        return outcome(x, lam, 0.0, OPTIMAL, iters)

    # the polytope must reach into the ellipsoid at all
    pscale = max(np.abs(P).max(), 1e-300)
    ridge = 1e-12 * pscale
    xc, _, st, it = solve_quadratic(P + ridge * np.eye(d), -(P @ mu) - ridge * mu, A, b, cfg)
    iters += it
    if st != OPTIMAL or qval(xc) > bound + ctol:
        return SolveOutcome(xc, float("inf"), INFEASIBLE, float("inf"), iters)

    nu_lo, nu_hi = 0.0, 1.0 / pscale
    x_hi = None
    for _ in range(200):
        x_hi, lam_hi, st, it = _inner(x0, P, mu, nu_hi, A, b, cfg)
        iters += it
        g_hi = qval(x_hi) - bound
        if g_hi <= 0.0:
            break
        nu_lo, g_lo = nu_hi, g_hi
        nu_hi *= 4.0
    else:
        return outcome(x_hi, lam_hi, nu_hi, MAX_ITER, iters)
    if g_hi >= -ctol:
        return outcome(x_hi, lam_hi, nu_hi, OPTIMAL, iters)

    # Illinois regula falsi on g(nu) = q(x(nu)) - c, keeping the feasible end
    side = 0
    for _ in range(300):
        nu = nu_lo + (nu_hi - nu_lo) * g_lo / (g_lo - g_hi)
        if not (nu_lo < nu < nu_hi):
            nu = 0.5 * (nu_lo + nu_hi)
        xm, lam_m, st, it = _inner(x0, P, mu, nu, A, b, cfg)
        iters += it
        gm = qval(xm) - bound
        if gm <= 0.0:
            nu_hi, g_hi, x_hi, lam_hi = nu, gm, xm, lam_m
            if gm >= -ctol:
                break
            if side == 1:
                g_lo *= 0.5
            side = 1
        else:
            nu_lo, g_lo = nu, gm
            if side == -1:
                g_hi *= 0.5
            side = -1
        if nu_hi - nu_lo <= 1e-15 * nu_hi:
            break
    return outcome(x_hi, lam_hi, nu_hi, OPTIMAL, iters)
