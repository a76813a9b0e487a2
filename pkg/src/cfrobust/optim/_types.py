from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"

# kernel status codes
_STATUS = {0: OPTIMAL, 1: INFEASIBLE, 2: MAX_ITER}


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-8
    kkt_tol: float = 1e-6
    max_iter: int = 10_000

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.kkt_tol > 0 and self.max_iter > 0):
            raise ValueError("solver tolerances and max_iter must be positive")


DEFAULT_CONFIG = SolverConfig()


@dataclass
class SolveOutcome:
    point: np.ndarray
    objective: float
    status: str
    kkt_residual: float
    iterations: int
    multipliers: np.ndarray = field(default=None, repr=False)
    quad_multiplier: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL
