import numpy as np

from ..core import as_vector
from ._types import INFEASIBLE, OPTIMAL, SolveOutcome


def project_box(x0, lower, upper) -> SolveOutcome:
    """Clamp ``x0`` into ``[lower, upper]``.

    Exact minimiser for any separable objective (squared l2, weighted l1), so
    the reported objective is the squared Euclidean distance and callers
    recompute their own metric from the point.
    """
    x0 = as_vector(x0, "x0")
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), x0.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), x0.shape)
    if np.any(lower > upper):
        return SolveOutcome(x0.copy(), float("inf"), INFEASIBLE, float("inf"), 0)
    x = np.minimum(np.maximum(x0, lower), upper)
    diff = x - x0
    return SolveOutcome(x, float(diff @ diff), OPTIMAL, 0.0, 0)
