"""Dense simplex pivot loop, the hot kernel of the whole package.

Two interchangeable implementations live here: a numba ``@njit`` version
and a pure-numpy twin with identical pivot selection rules.  The active
backend is chosen once at import time:

* ``H2CHAIN_PURE_NUMPY=1`` in the environment forces the numpy path;
* otherwise numba is used when importable, numpy when not.

Both paths must make bit-identical *decisions* (entering column, leaving
row) given the same tableau; tests compare them on shared instances and
``benchmarks/bench_kernels.py`` times them against each other.

Pivot selection is stabilised in two ways.  The leaving row is chosen
among all rows whose ratio lies within a tiny window of the minimum,
preferring the largest pivot element (a lightweight Harris ratio test) —
a pivot of magnitude 1e-8 scales the whole tableau by 1e8 and one such
pivot is enough to drown every later iteration in roundoff.  Second, an
entering column whose best available pivot is still below ``_PIV_ACCEPT``
is set aside and another improving column is tried instead; only when
every improving column offers nothing better does the loop take the
least-bad pivot so progress is never blocked.  Under Bland's rule (after
prolonged degeneracy, or from the first pivot when ``bland_after`` is
negative) the classic smallest-index rules run unmodified, keeping the
anti-cycling guarantee intact.
"""

from __future__ import annotations

import os

import numpy as np

# Kernel status codes.
OPTIMAL = 0
UNBOUNDED = 1
ITER_LIMIT = 2

# Reduced-cost optimality tolerance, pivot-eligibility tolerance, and the
# ratio below which a pivot counts as degenerate (anti-cycling bookkeeping).
_TOL = 1e-9
_PIV_TOL = 1e-9
_DEGEN_TOL = 1e-12
# Smallest pivot element accepted without first trying other entering
# columns, and the relative width of the min-ratio tie window.
_PIV_ACCEPT = 1e-6
_RATIO_SLACK = 1e-9


def _simplex_loop_py(tab, basis, n_enterable, max_iter, bland_after):
    # Maximization tableau: row m is the objective row in reduced-cost form
    # (entry < 0 means the column improves the objective), column W is rhs.
    m = tab.shape[0] - 1
    w = tab.shape[1] - 1
    degen = 0
    use_bland = bland_after < 0
    tried = np.zeros(n_enterable, dtype=np.bool_)
    it = 0
    while it < max_iter:
        j = -1
        rr = -1
        accept_ratio = np.inf
        if use_bland:
            # Bland: first improving column, exact min ratio, ties by
            # smallest basis index.  No pivot-quality games here — the
            # termination proof needs the smallest-index rules verbatim.
            for k in range(n_enterable):
                if tab[m, k] < -_TOL:
                    j = k
                    break
            if j < 0:
                return OPTIMAL, it
            best_ratio = np.inf
            best_basis = 1 << 62
            for i in range(m):
                a = tab[i, j]
                if a > _PIV_TOL:
                    ratio = tab[i, w] / a
                    if ratio < best_ratio or (ratio == best_ratio and basis[i] < best_basis):
                        best_ratio = ratio
                        rr = i
                        best_basis = basis[i]
            if rr < 0:
                return UNBOUNDED, it
            accept_ratio = best_ratio
        else:
            # Dantzig with pivot-quality retry: most-negative reduced cost
            # first; a column whose best in-window pivot is tiny is parked
            # and the next column tried, remembering the least-bad option.
            for k in range(n_enterable):
                tried[k] = False
            fb_j = -1
            fb_rr = -1
            fb_piv = 0.0
            fb_ratio = np.inf
            while True:
                j = -1
                best = -_TOL
                for k in range(n_enterable):
                    if not tried[k] and tab[m, k] < best:
                        best = tab[m, k]
                        j = k
                if j < 0:
                    if fb_j >= 0:
                        j = fb_j
                        rr = fb_rr
                        accept_ratio = fb_ratio
                        break
                    return OPTIMAL, it
                best_ratio = np.inf
                for i in range(m):
                    a = tab[i, j]
                    if a > _PIV_TOL:
                        ratio = tab[i, w] / a
                        if ratio < best_ratio:
                            best_ratio = ratio
                if best_ratio == np.inf:
                    return UNBOUNDED, it
                thresh = best_ratio + _RATIO_SLACK * (1.0 + abs(best_ratio))
                rr = -1
                best_a = 0.0
                best_basis = 1 << 62
                for i in range(m):
                    a = tab[i, j]
                    if a > _PIV_TOL and tab[i, w] / a <= thresh:
                        if a > best_a or (a == best_a and basis[i] < best_basis):
                            best_a = a
                            rr = i
                            best_basis = basis[i]
                if best_a >= _PIV_ACCEPT:
                    accept_ratio = best_ratio
                    break
                tried[j] = True
                if best_a > fb_piv:
                    fb_piv = best_a
                    fb_j = j
                    fb_rr = rr
                    fb_ratio = best_ratio

        if accept_ratio <= _DEGEN_TOL:
            degen += 1
            if bland_after >= 0 and degen > bland_after:
                use_bland = True
        else:
            degen = 0

        # pivot on (rr, j)
        piv = tab[rr, j]
        for k in range(w + 1):
            tab[rr, k] /= piv
        tab[rr, j] = 1.0
        for i in range(m + 1):
            if i == rr:
                continue
            f = tab[i, j]
            if f != 0.0:
                for k in range(w + 1):
                    tab[i, k] -= f * tab[rr, k]
                tab[i, j] = 0.0
        basis[rr] = j
        it += 1
    return ITER_LIMIT, it


def _simplex_loop_numpy(tab, basis, n_enterable, max_iter, bland_after):
    m = tab.shape[0] - 1
    w = tab.shape[1] - 1
    obj = tab[m]
    rhs = tab[:m, w]
    degen = 0
    use_bland = bland_after < 0
    it = 0
    while it < max_iter:
        if use_bland:
            eligible = obj[:n_enterable] < -_TOL
            if not eligible.any():
                return OPTIMAL, it
            j = int(np.argmax(eligible))
            col = tab[:m, j]
            ok = col > _PIV_TOL
            if not ok.any():
                return UNBOUNDED, it
            ratios = np.full(m, np.inf)
            ratios[ok] = rhs[ok] / col[ok]
            best_ratio = float(ratios.min())
            cand = np.flatnonzero(ratios == best_ratio)
            rr = int(cand[np.argmin(basis[cand])])
            accept_ratio = best_ratio
        else:
            masked = obj[:n_enterable].copy()
            fb_j = -1
            fb_rr = -1
            fb_piv = 0.0
            fb_ratio = np.inf
            while True:
                j = int(np.argmin(masked))
                if masked[j] >= -_TOL:
                    if fb_j >= 0:
                        j = fb_j
                        rr = fb_rr
                        accept_ratio = fb_ratio
                        break
                    return OPTIMAL, it
                col = tab[:m, j]
                ok = col > _PIV_TOL
                if not ok.any():
                    return UNBOUNDED, it
                ratios = np.full(m, np.inf)
                ratios[ok] = rhs[ok] / col[ok]
                best_ratio = float(ratios.min())
                thresh = best_ratio + _RATIO_SLACK * (1.0 + abs(best_ratio))
                cand = np.flatnonzero(ok & (ratios <= thresh))
                order = np.lexsort((basis[cand], -col[cand]))
                rr = int(cand[order[0]])
                best_a = float(col[rr])
                if best_a >= _PIV_ACCEPT:
                    accept_ratio = best_ratio
                    break
                masked[j] = np.inf
                if best_a > fb_piv:
                    fb_piv = best_a
                    fb_j = j
                    fb_rr = rr
                    fb_ratio = best_ratio

        if accept_ratio <= _DEGEN_TOL:
            degen += 1
            if bland_after >= 0 and degen > bland_after:
                use_bland = True
        else:
            degen = 0

        piv = tab[rr, j]
        tab[rr] /= piv
        tab[rr, j] = 1.0
        f = tab[:, j].copy()
        f[rr] = 0.0
        tab -= np.outer(f, tab[rr])
        tab[:, j] = 0.0
        tab[rr, j] = 1.0
        basis[rr] = j
        it += 1
    return ITER_LIMIT, it


def _pick_backend():
    if os.environ.get("H2CHAIN_PURE_NUMPY", "").strip().lower() in ("1", "true", "yes"):
        return "numpy", _simplex_loop_numpy
    try:
        from numba import njit
    except ImportError:
        return "numpy", _simplex_loop_numpy
    jitted = njit(cache=True)(_simplex_loop_py)
    return "numba", jitted


ACTIVE_BACKEND, simplex_loop = _pick_backend()
