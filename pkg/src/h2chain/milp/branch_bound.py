"""Best-first branch and bound over the two-phase simplex.

Node relaxations are solved eagerly at creation, so the frontier is always
ordered by known bounds.  Until a first incumbent exists the search plunges:
it follows the better-bound child depth-first (stack), parking the sibling
on the best-first heap, and tries a cheap rounding probe at the root.  With
an incumbent in hand the search reverts to pure best-first with
``(-bound, -depth, direction, sequence)`` keys, so the first pop whose bound
is within tolerance of the incumbent proves optimality.  Shallow nodes pick
their branch variable by strong branching (trial child solves, product rule),
deeper ones by objective-weighted fractionality.  No wall-clock state
influences any decision; a given model always explores the identical tree.
"""

from __future__ import annotations

import heapq
from dataclasses import replace

import numpy as np

from .model import LinearProgram, SolveResult, SolveStats, SolverError
from .simplex import solve_lp

INT_TOL = 1e-6
GAP_TOL = 1e-6

# strong branching applies at nodes this shallow, trying this many candidates
_STRONG_DEPTH = 6
_STRONG_CANDIDATES = 6


class _Search:
    def __init__(self, prog: LinearProgram, int_idx: np.ndarray, gap_tol: float, int_tol: float):
        self.prog = prog
        self.int_idx = int_idx
        self.gap_tol = gap_tol
        self.int_tol = int_tol
        # branching priority: fractional distance scaled by objective weight,
        # so ties between value-neutral splits never crowd out variables
        # whose rounding actually moves the bound
        self.weight = 1.0 + np.abs(prog.objective[int_idx])
        self.stats = SolveStats()
        self.heap: list[tuple] = []
        self.stack: list[tuple] = []
        self.seq = 0
        self.best_x: np.ndarray | None = None
        self.best_obj = -np.inf

    def cutoff(self) -> float:
        return self.best_obj + self.gap_tol * max(1.0, abs(self.best_obj))

    def solve_node(self, lower: np.ndarray, upper: np.ndarray):
        res = solve_lp(replace(self.prog, lower=lower, upper=upper))
        self.stats.lp_solves += 1
        self.stats.simplex_iterations += res.stats.simplex_iterations
        return res

    def offer_incumbent(self, x_lp: np.ndarray) -> None:
        x = x_lp.copy()
        x[self.int_idx] = np.round(x[self.int_idx])
        val = float(self.prog.objective @ x + self.prog.objective_offset)
        if val > self.best_obj:
            self.best_obj = val
            self.best_x = x

    def fractional(self, x_lp: np.ndarray) -> np.ndarray:
        return np.abs(x_lp[self.int_idx] - np.round(x_lp[self.int_idx]))

    def push(self, depth: int, direction: int, res, lower: np.ndarray, upper: np.ndarray, *, diving: bool) -> None:
        self.seq += 1
        node = (-res.objective, -depth, direction, self.seq, res.objective, res.x, lower, upper)
        if diving:
            self.stack.append(node)
        else:
            heapq.heappush(self.heap, node)

    def rounding_probe(self, x_lp: np.ndarray, *, mode: str = "nearest") -> None:
        """Iterative rounding dive: repeatedly pin the near-integral integer
        variables at their rounded values and re-solve, letting the rest of
        the model react. Reaches a feasible incumbent far more often than a
        one-shot rounding, at a few LP solves' cost. ``mode="floor"`` rounds
        down instead, which for ship-or-hold models is nearly always
        feasible and guarantees some incumbent exists before branching."""
        snap = np.floor if mode == "floor" else np.round
        lower = self.prog.lower.copy()
        upper = self.prog.upper.copy()
        x = x_lp
        for _ in range(self.int_idx.size + 1):
            frac = self.fractional(x)
            if np.all(frac <= self.int_tol):
                self.offer_incumbent(x)
                return
            unfixed = lower[self.int_idx] < upper[self.int_idx]
            near = unfixed & (frac <= 0.1)
            pick = near if np.any(near) else np.zeros_like(near)
            if not np.any(pick):
                # nothing close to integral: pin the single most decided one
                masked = np.where(unfixed, frac, np.inf)
                pick[int(np.argmin(masked))] = True
            idx = self.int_idx[pick]
            vals = np.clip(snap(x[idx] + self.int_tol), lower[idx], upper[idx])
            lower[idx] = vals
            upper[idx] = vals
            res = self.solve_node(lower, upper)
            if res.status != "optimal":
                return
            x = res.x

    def solve_children(self, j: int, pivot: float, lo: np.ndarray, up: np.ndarray) -> list[tuple]:
        """Solve both branch children of variable ``j``; integral or pruned
        children are consumed here, so only live subproblems come back."""
        children = []
        for direction in (0, 1):
            child_lo, child_up = lo.copy(), up.copy()
            if direction == 0:
                child_up[j] = np.floor(pivot)
            else:
                child_lo[j] = np.ceil(pivot)
            if child_lo[j] > child_up[j]:
                continue
            res = self.solve_node(child_lo, child_up)
            if res.status != "optimal":
                continue
            if np.all(self.fractional(res.x) <= self.int_tol):
                self.offer_incumbent(res.x)
                continue
            if self.best_x is not None and res.objective <= self.cutoff():
                continue
            children.append((direction, res, child_lo, child_up))
        return children

    def strong_branch(self, x_lp: np.ndarray, frac: np.ndarray, bound: float, lo: np.ndarray, up: np.ndarray):
        """Pick the branch variable by trial-solving candidate children.

        Fractional scores stall whenever the fractionality that holds the
        bound up carries a tiny objective coefficient, so at shallow depth
        the search pays for trial solves instead: candidates whose split
        prunes one or both sides win outright (both pruned fathoms the node
        on the spot), and the rest are ranked by the product of child bound
        decreases.  The winner's already-solved children are reused.
        """
        score = np.where(frac > self.int_tol, frac * self.weight, -1.0)
        order = np.argsort(-score, kind="stable")[:_STRONG_CANDIDATES]
        best = None
        for pos, idx in enumerate(order):
            if score[idx] <= 0.0:
                break
            j = int(self.int_idx[idx])
            children = self.solve_children(j, float(x_lp[j]), lo, up)
            if not children:
                return j, children
            drops = [max(bound - child[1].objective, 1e-9) for child in children]
            key = (len(children), -float(np.prod(drops)), pos)
            if best is None or key < best[0]:
                best = (key, j, children)
        return best[1], best[2]


def solve_milp(
    prog: LinearProgram,
    *,
    gap_tol: float = GAP_TOL,
    int_tol: float = INT_TOL,
    max_nodes: int = 500_000,
) -> SolveResult:
    """Maximize ``prog`` honoring its integrality flags."""
    prog.validate()
    int_idx = np.flatnonzero(prog.integrality)
    s = _Search(prog, int_idx, gap_tol, int_tol)

    root = solve_lp(prog)
    s.stats.lp_solves += 1
    s.stats.simplex_iterations += root.stats.simplex_iterations
    if root.status != "optimal":
        return SolveResult(root.status, root.objective, root.x, root.bound, 0.0, s.stats)
    if int_idx.size == 0:
        return SolveResult("optimal", root.objective, root.x, root.objective, 0.0, s.stats)

    if np.all(s.fractional(root.x) <= int_tol):
        s.offer_incumbent(root.x)
        return SolveResult("optimal", s.best_obj, s.best_x, root.objective, 0.0, s.stats)

    s.rounding_probe(root.x)
    if s.best_x is None:
        s.rounding_probe(root.x, mode="floor")
    s.push(0, 0, root, prog.lower, prog.upper, diving=s.best_x is None)

    while s.stack or s.heap:
        if s.stack:
            node = s.stack.pop()
        else:
            node = heapq.heappop(s.heap)
        _nb, nd, _dir, _seq, bound, x_lp, lo, up = node
        s.stats.nodes_explored += 1
        if s.stats.nodes_explored > max_nodes:
            if s.best_x is None:
                raise SolverError(f"node budget {max_nodes} exhausted with no feasible point")
            best_bound = max(bound, -s.heap[0][0] if s.heap else -np.inf)
            best_bound = max(best_bound, *(-n[0] for n in s.stack)) if s.stack else best_bound
            gap = max(0.0, (best_bound - s.best_obj) / max(1.0, abs(s.best_obj)))
            return SolveResult("gap_limit", s.best_obj, s.best_x, best_bound, gap, s.stats)

        if s.best_x is not None and bound <= s.cutoff():
            if s.stack:
                # a stack node's bound is not the global max; just discard it
                continue
            gap = max(0.0, (bound - s.best_obj) / max(1.0, abs(s.best_obj)))
            return SolveResult("optimal", s.best_obj, s.best_x, bound, gap, s.stats)

        frac = s.fractional(x_lp)
        if np.all(frac <= int_tol):
            s.offer_incumbent(x_lp)
            if s.best_x is not None and s.stack:
                _drain_stack(s)
            continue

        node_depth = -nd
        if node_depth <= _STRONG_DEPTH and int(np.count_nonzero(frac > int_tol)) > 1:
            _j, children = s.strong_branch(x_lp, frac, bound, lo, up)
        else:
            j = int(int_idx[int(np.argmax(np.where(frac > int_tol, frac * s.weight, -1.0)))])
            children = s.solve_children(j, float(x_lp[j]), lo, up)

        depth = node_depth + 1
        if s.best_x is None and children:
            children.sort(key=lambda c: (-c[1].objective, c[0]))
            for direction, res, clo, cup in reversed(children[1:]):
                s.push(depth, direction, res, clo, cup, diving=False)
            direction, res, clo, cup = children[0]
            s.push(depth, direction, res, clo, cup, diving=True)
        else:
            for direction, res, clo, cup in children:
                s.push(depth, direction, res, clo, cup, diving=False)
            if s.best_x is not None and s.stack:
                _drain_stack(s)

    if s.best_x is None:
        return SolveResult("infeasible", -np.inf, np.full(prog.n_vars, np.nan), -np.inf, 0.0, s.stats)
    return SolveResult("optimal", s.best_obj, s.best_x, s.best_obj, 0.0, s.stats)


def _drain_stack(s: _Search) -> None:
    # first incumbent found: move parked dive nodes onto the best-first heap
    for node in s.stack:
        heapq.heappush(s.heap, node)
    s.stack.clear()
