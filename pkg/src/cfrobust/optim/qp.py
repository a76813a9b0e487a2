"""Strictly convex QP with linear inequality constraints.

Dual active-set method of Goldfarb and Idnani.  It starts from the
unconstrained minimiser and adds violated constraints one at a time, so it
needs no feasible starting point and reports an empty polytope on its own.
"""

import numpy as np

from .._accel import jit
from ..core import ConstraintSet, as_vector
from ._types import _STATUS, DEFAULT_CONFIG, SolveOutcome, SolverConfig


@jit
def _active_basis(J0, A, act, q):
    d = J0.shape[0]
    # QR of [J0^T N | I] keeps a full orthonormal Q; its first q columns span J0^T N
    B = np.zeros((d, q + d))
    J0t = np.ascontiguousarray(J0.T)
    for k in range(q):
        B[:, k] = J0t @ A[act[k]]
    for i in range(d):
        B[i, q + i] = 1.0
    Q, R = np.linalg.qr(B)
    return np.ascontiguousarray(J0) @ np.ascontiguousarray(Q), np.ascontiguousarray(R[:q, :q])


@jit
def gi_kernel(H, g, A, b, feas_tol, max_iter):
    """Minimise 0.5 x'Hx + g'x subject to A x <= b.

    Returns (x, lam, status, iterations); status 0 optimal, 1 infeasible,
    2 iteration limit.
    """
    d = H.shape[0]
    m = A.shape[0]
    L = np.linalg.cholesky(H)
    J0 = np.ascontiguousarray(np.linalg.solve(np.ascontiguousarray(L.T), np.eye(d)))
    x = -(J0 @ (J0.T @ g))
    lam = np.zeros(m)
    act = np.zeros(max(m, 1), dtype=np.int64)
    is_act = np.zeros(m, dtype=np.bool_)
    q = 0
    norms = np.empty(m)
    for i in range(m):
        norms[i] = np.sqrt(A[i] @ A[i])
    J, R = _active_basis(J0, A, act, q)
    it = 0
    while True:
        # most violated constraint, measured as distance to its hyperplane
        p = -1
        worst = feas_tol
        for i in range(m):
            if is_act[i] or norms[i] == 0.0:
                continue
            v = (A[i] @ x - b[i]) / norms[i]
            if v > worst:
                worst = v
                p = i
        if p < 0:
            for i in range(m):
                if norms[i] == 0.0 and b[i] < -feas_tol:
                    return x, lam, 1, it
            return x, lam, 0, it
        lam_p = 0.0
        while True:
            it += 1
            if it > max_iter:
                return x, lam, 2, it
            dv = np.ascontiguousarray(J.T) @ A[p]
            d2 = dv[q:]
            z = -(np.ascontiguousarray(J[:, q:]) @ d2)
            r = np.zeros(q)
            if q > 0:
                r = -np.linalg.solve(R, dv[:q])
            # partial step: first active multiplier driven to zero
            t1 = np.inf
            drop = -1
            for k in range(q):
                if r[k] < 0.0:
                    tk = -lam[act[k]] / r[k]
                    if tk < t1:
                        t1 = tk
                        drop = k
            # full step: constraint p becomes active
            t2 = np.inf
            zn = A[p] @ z
            if np.sqrt(d2 @ d2) > 1e-12 * max(1.0, np.sqrt(dv @ dv)) and zn < 0.0:
                t2 = (b[p] - A[p] @ x) / zn
            if t1 == np.inf and t2 == np.inf:
                return x, lam, 1, it
            t = min(t1, t2)
            if t2 < np.inf:
                x = x + t * z
            for k in range(q):
                lam[act[k]] += t * r[k]
            lam_p += t
            if t2 <= t1:
                lam[p] = lam_p
                act[q] = p
                is_act[p] = True
                q += 1
                J, R = _active_basis(J0, A, act, q)
                break
            removed = act[drop]
            lam[removed] = 0.0
            is_act[removed] = False
            for k in range(drop, q - 1):
                act[k] = act[k + 1]
            q -= 1
            J, R = _active_basis(J0, A, act, q)


def qp_kkt_residual(H, g, A, b, x, lam):
    """Max of stationarity, primal violation and complementarity, relative to problem scale."""
    grad = H @ x + g
    stat = grad + A.T @ lam if A.shape[0] else grad
    scale = 1.0 + np.abs(g).max(initial=0.0) + np.abs(H @ x).max(initial=0.0)
    res = np.abs(stat).max(initial=0.0) / scale
    if A.shape[0]:
        slack = A @ x - b
        res = max(res, np.maximum(slack, 0.0).max() / (1.0 + np.abs(b).max()))
        res = max(res, np.abs(lam * slack).max() / (1.0 + np.abs(lam).max() * (1.0 + np.abs(b).max())))
        res = max(res, np.maximum(-lam, 0.0).max())
    return float(res)


def solve_quadratic(H, g, A, b, cfg: SolverConfig = DEFAULT_CONFIG):
    """Raw entry point: minimise 0.5 x'Hx + g'x s.t. A x <= b."""
    H = np.ascontiguousarray(H, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64).reshape(-1, H.shape[0])
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1)
    x, lam, code, it = gi_kernel(H, g, A, b, cfg.feas_tol, cfg.max_iter)
    return x, lam, _STATUS[int(code)], int(it)


def solve_qp(x0, cs: ConstraintSet, cfg: SolverConfig = DEFAULT_CONFIG) -> SolveOutcome:
    """Closest point (squared Euclidean) to ``x0`` inside the polytope of ``cs``."""
    x0 = as_vector(x0, "x0")
    if cs.quads:
        raise ValueError("solve_qp handles linear constraints only; use solve_qcqp")
    if cs.dim != x0.shape[0]:
        raise ValueError("constraint set and x0 have different dimensions")
    d = x0.shape[0]
    H = np.eye(d)
    x, lam, status, it = solve_quadratic(H, -x0, cs.A, cs.b, cfg)
    kkt = qp_kkt_residual(H, -x0, cs.A, cs.b, x, lam)
    diff = x - x0
    return SolveOutcome(x, float(diff @ diff), status, kkt, it, lam)
