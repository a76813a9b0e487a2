"""Weighted-l1 projection onto a polytope as a linear program.

With ``x = x0 + u - v`` (``u, v >= 0``) the problem becomes
``min w'(u + v)  s.t.  A(u - v) + s = b - A x0,  s >= 0``.  Positive weights
make the all-slack basis dual feasible, so a dual simplex runs without a
phase-1 problem; a row that cannot be repaired proves the polytope empty.
"""

import numpy as np

from .._accel import jit
from ..core import ConstraintSet, as_vector
from ._types import _STATUS, DEFAULT_CONFIG, OPTIMAL, SolveOutcome, SolverConfig


@jit
def dual_simplex_kernel(A, r, w, tol, max_iter):
    """Returns (u - v, row duals, status, iterations)."""
    m, d = A.shape
    n = 2 * d + m
    T = np.zeros((m, n))
    T[:, :d] = A
    T[:, d:2 * d] = -A
    for i in range(m):
        T[i, 2 * d + i] = 1.0
    rhs = r.copy()
    cost = np.zeros(n)
    cost[:d] = w
    cost[d:2 * d] = w
    basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        basis[i] = 2 * d + i
    it = 0
    status = 0
    while True:
        row = -1
        most = -tol
        for i in range(m):
            if rhs[i] < most:
                most = rhs[i]
                row = i
        if row < 0:
            break
        it += 1
        if it > max_iter:
            status = 2
            break
        col = -1
        best = np.inf
        for j in range(n):
            if T[row, j] < -tol:
                ratio = cost[j] / -T[row, j]
                if ratio < best - 1e-14:
                    best = ratio
                    col = j
        if col < 0:
            status = 1
            break
        piv = T[row, col]
        T[row] /= piv
        rhs[row] /= piv
        for i in range(m):
            if i != row and T[i, col] != 0.0:
                f = T[i, col]
                T[i] -= f * T[row]
                rhs[i] -= f * rhs[row]
        f = cost[col]
        cost -= f * T[row]
        basis[row] = col
    y = np.zeros(n)
    for i in range(m):
        y[basis[i]] = rhs[i]
    # reduced cost of slack i equals the multiplier of constraint i
    duals = cost[2 * d:].copy()
    return y[:d] - y[d:2 * d], duals, status, it


def l1_kkt_residual(A, b, w, x0, x, lam):
    """Subgradient optimality of ``sum w|x - x0|`` plus complementarity."""
    g = -(A.T @ lam) if A.shape[0] else np.zeros_like(x0)
    moved = np.abs(x - x0) > 1e-9 * (1.0 + np.abs(x0))
    res = np.maximum(np.abs(g) - w, 0.0).max(initial=0.0)
    if np.any(moved):
        res = max(res, np.abs(g[moved] - w[moved] * np.sign(x - x0)[moved]).max())
    res /= 1.0 + w.max()
    if A.shape[0]:
        slack = A @ x - b
        res = max(res, np.maximum(slack, 0.0).max() / (1.0 + np.abs(b).max()))
        res = max(res, np.abs(lam * slack).max() / (1.0 + np.abs(lam).max() * (1.0 + np.abs(b).max())))
    return float(res)


def solve_lp_l1(x0, weights, cs: ConstraintSet, cfg: SolverConfig = DEFAULT_CONFIG) -> SolveOutcome:
    """Minimise ``sum_i w_i |x_i - x0_i|`` over the polytope of ``cs``."""
    x0 = as_vector(x0, "x0")
    d = x0.shape[0]
    w = np.ones(d) if weights is None else as_vector(weights, "weights")
    if w.shape[0] != d or np.any(w <= 0):
        raise ValueError("weights must be positive and match the dimension")
    if cs.quads:
        raise ValueError("solve_lp_l1 handles linear constraints only")
    if cs.dim != d:
        raise ValueError("constraint set and x0 have different dimensions")
    A = np.ascontiguousarray(cs.A)
    if A.shape[0] == 0:
        return SolveOutcome(x0.copy(), 0.0, OPTIMAL, 0.0, 0, np.zeros(0))
    scale = np.sqrt((A * A).sum(axis=1))
    scale[scale == 0] = 1.0
    An = A / scale[:, None]
    bn = cs.b / scale
    r = bn - An @ x0
    step, duals, code, it = dual_simplex_kernel(An, np.ascontiguousarray(r), w, cfg.feas_tol, cfg.max_iter)
    status = _STATUS[int(code)]
    x = x0 + step
    lam = duals / scale
    kkt = l1_kkt_residual(A, cs.b, w, x0, x, lam) if status == OPTIMAL else float("inf")
    return SolveOutcome(x, float(w @ np.abs(x - x0)), status, kkt, int(it), lam)
