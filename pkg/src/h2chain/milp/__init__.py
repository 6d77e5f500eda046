"""Dense mixed-integer linear programming toolkit.

Self-contained: a two-phase simplex (numba-accelerated pivot kernel with a
numpy fallback), best-first branch and bound, a brute-force lattice oracle
for cross-checks, and a text dump of models.
"""

from ._kernels import ACTIVE_BACKEND
from .branch_bound import GAP_TOL, INT_TOL, solve_milp
from .lptext import format_lp
from .model import EQ, GE, LE, LinearProgram, ModelBuilder, SolveResult, SolveStats, SolverError
from .oracle import LatticeTooLarge, brute_force_oracle
from .simplex import solve_lp

__all__ = [
    "ACTIVE_BACKEND",
    "EQ",
    "GE",
    "LE",
    "GAP_TOL",
    "INT_TOL",
    "LatticeTooLarge",
    "LinearProgram",
    "ModelBuilder",
    "SolveResult",
    "SolveStats",
    "SolverError",
    "brute_force_oracle",
    "format_lp",
    "solve_lp",
    "solve_milp",
]
