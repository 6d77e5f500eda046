"""Exhaustive reference solver used to cross-check branch and bound.

Every lattice point of the integer variables is pinned in turn and the
remaining continuous problem is solved by the simplex.  Exponential, so it
refuses lattices past a hard point budget; intended for test instances.
"""

from __future__ import annotations

import itertools
from dataclasses import replace

import numpy as np

from .model import LinearProgram, SolveResult, SolveStats
from .simplex import solve_lp

MAX_LATTICE_POINTS = 1_000_000


class LatticeTooLarge(ValueError):
    """The integer search space exceeds the enumeration budget."""


def brute_force_oracle(prog: LinearProgram, *, max_points: int = MAX_LATTICE_POINTS) -> SolveResult:
    prog.validate()
    int_idx = np.flatnonzero(prog.integrality)
    stats = SolveStats()
    if int_idx.size == 0:
        res = solve_lp(prog)
        stats.simplex_iterations = res.stats.simplex_iterations
        stats.lp_solves = 1
        return SolveResult(res.status, res.objective, res.x, res.bound, 0.0, stats)

    ranges = []
    total = 1
    for j in int_idx:
        lo, up = prog.lower[j], prog.upper[j]
        if not (np.isfinite(lo) and np.isfinite(up)):
            raise LatticeTooLarge(f"integer variable {prog.name_of(int(j))} has an unbounded range")
        lo_i = int(np.ceil(lo - 1e-9))
        up_i = int(np.floor(up + 1e-9))
        if up_i < lo_i:
            return SolveResult("infeasible", -np.inf, np.full(prog.n_vars, np.nan), -np.inf, 0.0, stats)
        total *= up_i - lo_i + 1
        if total > max_points:
            raise LatticeTooLarge(f"integer lattice needs more than {max_points} points")
        ranges.append(range(lo_i, up_i + 1))

    best_obj = -np.inf
    best_x: np.ndarray | None = None
    for values in itertools.product(*ranges):
        lo = prog.lower.copy()
        up = prog.upper.copy()
        lo[int_idx] = values
        up[int_idx] = values
        sub = replace(prog, lower=lo, upper=up, integrality=np.zeros(prog.n_vars, dtype=bool))
        res = solve_lp(sub)
        stats.simplex_iterations += res.stats.simplex_iterations
        stats.lp_solves += 1
        if res.status == "optimal" and res.objective > best_obj:
            best_obj = res.objective
            best_x = res.x.copy()
            best_x[int_idx] = values

    if best_x is None:
        return SolveResult("infeasible", -np.inf, np.full(prog.n_vars, np.nan), -np.inf, 0.0, stats)
    return SolveResult("optimal", best_obj, best_x, best_obj, 0.0, stats)
