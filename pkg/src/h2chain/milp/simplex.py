"""Two-phase dense simplex over general bounds.

Variables are reduced to nonnegative ones first (shift when a finite lower
bound exists, mirror when only an upper bound does, split when free), the
remaining finite upper bounds become explicit rows, then phase 1 drives
artificials out and phase 2 maximizes the real objective.  The pivot loop
itself lives in ``_kernels`` so it can run under numba or numpy.

The tableau is refreshed from the original column data every
``_REFRESH_EVERY`` pivots to keep roundoff from accumulating on long runs.
"""

from __future__ import annotations

import numpy as np

from ._kernels import ITER_LIMIT, OPTIMAL, UNBOUNDED, simplex_loop
from .model import EQ, LE, LinearProgram, SolveResult, SolveStats, SolverError

_FEAS_TOL = 1e-7
_PIV_TOL = 1e-9
_BLAND_AFTER = 200
_REFRESH_EVERY = 1000
_MAX_RESUMPTIONS = 50
_OPT_RECHECK_TOL = 1e-8
# SolverError messages carrying these markers describe numerical breakdown
# worth one from-scratch retry under Bland's rule rather than a hard failure.
_RETRY_MARKERS = ("violates", "stabilise", "breakdown", "singular basis")


def _pivot_once(tab, basis, rr, j):
    piv = tab[rr, j]
    tab[rr] /= piv
    tab[rr, j] = 1.0
    f = tab[:, j].copy()
    f[rr] = 0.0
    tab -= np.outer(f, tab[rr])
    tab[:, j] = 0.0
    tab[rr, j] = 1.0
    basis[rr] = j


def _refresh(tab, basis, a_cur, b_cur):
    # Rebuild the constraint rows exactly from the current basis.
    m = basis.shape[0]
    try:
        block = np.linalg.solve(a_cur[:, basis], np.hstack([a_cur, b_cur[:, None]]))
    except np.linalg.LinAlgError as exc:
        raise SolverError("singular basis during tableau refresh") from exc
    tab[:m, :] = block
    for r, jb in enumerate(basis):
        tab[:m, jb] = 0.0
        tab[r, jb] = 1.0


def _run_phase(tab, basis, n_enterable, a_cur, b_cur, price, budget, bland_after):
    """Drive the kernel in chunks, refreshing the tableau between chunks.

    A claimed optimum is never trusted as-is: the tableau is rebuilt exactly
    from the original column data first.  If the exact reduced costs still
    show an improving column the phase resumes (the claim was a drift
    illusion); if the exact basic values have gone negative the pivot path
    itself was corrupted and the solve must restart, signalled by a
    SolverError carrying the "breakdown" marker.
    """
    used = 0
    resumptions = 0
    m = basis.shape[0]
    w = tab.shape[1] - 1
    feas_floor = -_FEAS_TOL * (1.0 + float(np.abs(b_cur).max(initial=0.0)))
    while True:
        chunk = min(_REFRESH_EVERY, budget - used)
        if chunk <= 0:
            raise SolverError(f"simplex iteration budget exhausted after {used} pivots")
        status, it = simplex_loop(tab, basis, n_enterable, chunk, bland_after)
        used += it
        if status == ITER_LIMIT:
            _refresh(tab, basis, a_cur, b_cur)
            price(tab, basis)
            continue
        if status != OPTIMAL:
            return status, used
        _refresh(tab, basis, a_cur, b_cur)
        price(tab, basis)
        if float(tab[:m, w].min(initial=0.0)) < feas_floor:
            raise SolverError("numerical breakdown: basis lost primal feasibility")
        if float(tab[m, :n_enterable].min(initial=0.0)) < -_OPT_RECHECK_TOL:
            resumptions += 1
            if resumptions > _MAX_RESUMPTIONS:
                raise SolverError("phase fails to stabilise after repeated refreshes")
            continue
        return OPTIMAL, used


def solve_lp(prog: LinearProgram, *, max_iterations: int | None = None) -> SolveResult:
    """Solve the continuous relaxation of ``prog`` (integrality is ignored).

    One retry under Bland's rule from the very first pivot is attempted when
    the default run ends in numerical breakdown; Bland's slower smallest-index
    pivoting walks a different (cycling-safe) path that sidesteps the rare
    ill-conditioned basis sequence.
    """
    try:
        return _solve_attempt(prog, max_iterations, _BLAND_AFTER)
    except SolverError as exc:
        if not any(marker in str(exc) for marker in _RETRY_MARKERS):
            raise
    return _solve_attempt(prog, max_iterations, -1)


def _solve_attempt(prog: LinearProgram, max_iterations: int | None, bland_after: int) -> SolveResult:
    prog.validate()
    n = prog.n_vars
    stats = SolveStats(lp_solves=1)

    # --- nonnegative-variable transform ---------------------------------
    col_owner: list[int] = []
    col_sign: list[float] = []
    col_ub: list[float] = []
    offsets = np.zeros(n)
    for j in range(n):
        lo, up = prog.lower[j], prog.upper[j]
        if lo == -np.inf and up == np.inf:
            col_owner += [j, j]
            col_sign += [1.0, -1.0]
            col_ub += [np.inf, np.inf]
        elif lo > -np.inf:
            offsets[j] = lo
            col_owner.append(j)
            col_sign.append(1.0)
            col_ub.append(up - lo if up < np.inf else np.inf)
        else:
            offsets[j] = up
            col_owner.append(j)
            col_sign.append(-1.0)
            col_ub.append(np.inf)
    owner = np.array(col_owner, dtype=np.int64)
    sign = np.array(col_sign)
    ub = np.array(col_ub)
    n_y = owner.shape[0]

    a_y = prog.a[:, owner] * sign
    c_y = prog.objective[owner] * sign
    b_y = prog.rhs - prog.a @ offsets

    fin = np.flatnonzero(np.isfinite(ub))
    if fin.size:
        ub_rows = np.zeros((fin.size, n_y))
        ub_rows[np.arange(fin.size), fin] = 1.0
        a_full = np.vstack([a_y, ub_rows])
        b_full = np.concatenate([b_y, ub[fin]])
        rel = np.concatenate([prog.relations, np.full(fin.size, LE, dtype=np.int64)])
    else:
        a_full = a_y.copy()
        b_full = b_y.copy()
        rel = prog.relations.copy()

    neg = b_full < 0
    a_full[neg] *= -1.0
    b_full[neg] *= -1.0
    rel[neg] *= -1

    # --- column layout: structural | slack/surplus | artificial ---------
    m = b_full.shape[0]
    slack_rows = np.flatnonzero(rel != EQ)
    art_rows = np.flatnonzero(rel != LE)
    n_real = n_y + slack_rows.size
    n_art = art_rows.size
    width = n_real + n_art

    a_std = np.zeros((m, width))
    a_std[:, :n_y] = a_full
    basis = np.empty(m, dtype=np.int64)
    for k, i in enumerate(slack_rows):
        a_std[i, n_y + k] = 1.0 if rel[i] == LE else -1.0
        if rel[i] == LE:
            basis[i] = n_y + k
    for k, i in enumerate(art_rows):
        a_std[i, n_real + k] = 1.0
        basis[i] = n_real + k

    tab = np.zeros((m + 1, width + 1))
    tab[:m, :width] = a_std
    tab[:m, width] = b_full

    budget = max_iterations if max_iterations is not None else 20000 + 40 * (m + width)

    # --- phase 1 ---------------------------------------------------------
    if n_art:
        def price1(tb, bs):
            tb[m, :] = 0.0
            tb[m, n_real:width] = 1.0
            for r in range(m):
                if bs[r] >= n_real:
                    tb[m] -= tb[r]

        price1(tab, basis)
        status, used = _run_phase(tab, basis, n_real, a_std, b_full, price1, budget, bland_after)
        stats.simplex_iterations += used
        budget -= used
        if status != OPTIMAL:
            raise SolverError("phase 1 terminated abnormally")
        if tab[m, width] < -_FEAS_TOL * (1.0 + float(np.abs(b_full).max(initial=0.0))):
            return SolveResult("infeasible", -np.inf, np.full(n, np.nan), -np.inf, 0.0, stats)

        # pivot out artificials still basic at zero; rows that offer no
        # pivot are redundant and get dropped
        drop = []
        for r in np.flatnonzero(basis >= n_real):
            j = int(np.argmax(np.abs(tab[r, :n_real])))
            if abs(tab[r, j]) <= _PIV_TOL:
                drop.append(r)
            else:
                _pivot_once(tab, basis, r, j)
        if drop:
            tab = np.delete(tab, drop, axis=0)
            basis = np.delete(basis, drop)
            m -= len(drop)
            keep = np.ones(b_full.shape[0], dtype=bool)
            keep[drop] = False
            a_std = a_std[keep]
            b_full = b_full[keep]

    tab = np.ascontiguousarray(np.hstack([tab[:, :n_real], tab[:, -1:]]))
    a_cur = np.ascontiguousarray(a_std[:, :n_real])
    width = n_real

    # --- phase 2 ---------------------------------------------------------
    c2 = np.zeros(n_real)
    c2[:n_y] = c_y

    def price2(tb, bs):
        tb[m, :width] = -c2
        tb[m, width] = 0.0
        for r in range(m):
            cb = c2[bs[r]]
            if cb != 0.0:
                tb[m] += cb * tb[r]

    price2(tab, basis)
    status, used = _run_phase(tab, basis, n_real, a_cur, b_full, price2, budget, bland_after)
    stats.simplex_iterations += used
    if status == UNBOUNDED:
        return SolveResult("unbounded", np.inf, np.full(n, np.nan), np.inf, 0.0, stats)
    if status != OPTIMAL:
        raise SolverError("phase 2 terminated abnormally")

    y = np.zeros(n_real)
    for r in range(m):
        y[basis[r]] = tab[r, width]
    x = offsets.copy()
    np.add.at(x, owner, sign * y[:n_y])

    _check_residuals(prog, x)
    obj = float(prog.objective @ x + prog.objective_offset)
    return SolveResult("optimal", obj, x, obj, 0.0, stats)


def _check_residuals(prog: LinearProgram, x: np.ndarray) -> None:
    # Defensive: a drifted tableau must never leak out as a "solution".
    ax = prog.a @ x
    for i in range(prog.n_rows):
        tol = 1e-5 * (1.0 + abs(prog.rhs[i]))
        resid = ax[i] - prog.rhs[i]
        rel_i = int(prog.relations[i])
        bad = (rel_i == LE and resid > tol) or (rel_i == EQ and abs(resid) > tol) or (rel_i == 1 and resid < -tol)
        if bad:
            raise SolverError(f"solution violates row {i} by {abs(resid):.3e}")
    tolb = 1e-7 * (1.0 + float(np.abs(x).max(initial=0.0)))
    if np.any(x < prog.lower - tolb) or np.any(x > prog.upper + tolb):
        raise SolverError("solution violates a variable bound")
