"""Problem container and row-by-row model builder for linear programs.

A :class:`LinearProgram` is a dense maximization problem

    maximize  c . x + offset
    subject   A x (<=, =, >=) b
              lower <= x <= upper
              x[j] integer where integrality[j] is True

Relations are encoded per row: -1 for <=, 0 for =, +1 for >=.  Bounds may
be ``-inf`` / ``+inf``.  :class:`ModelBuilder` assembles these incrementally
with named variables, which keeps the scheduling models readable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LE = -1
EQ = 0
GE = 1

_REL_TEXT = {LE: "<=", EQ: "=", GE: ">="}


class SolverError(RuntimeError):
    """Raised when the numerical method breaks down (not for infeasible models)."""


@dataclass
class LinearProgram:
    objective: np.ndarray
    a: np.ndarray
    relations: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integrality: np.ndarray
    objective_offset: float = 0.0
    names: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def n_rows(self) -> int:
        return self.rhs.shape[0]

    def validate(self) -> None:
        n, m = self.n_vars, self.n_rows
        if self.a.shape != (m, n):
            raise ValueError(f"constraint matrix shape {self.a.shape} != ({m}, {n})")
        for arr, label, size in (
            (self.relations, "relations", m),
            (self.lower, "lower", n),
            (self.upper, "upper", n),
            (self.integrality, "integrality", n),
        ):
            if arr.shape != (size,):
                raise ValueError(f"{label} has shape {arr.shape}, expected ({size},)")
        if self.names and len(self.names) != n:
            raise ValueError(f"{len(self.names)} names for {n} variables")
        if np.any(self.lower > self.upper):
            j = int(np.argmax(self.lower > self.upper))
            raise ValueError(f"variable {self.name_of(j)}: lower {self.lower[j]} > upper {self.upper[j]}")
        if not np.all(np.isfinite(self.rhs)):
            raise ValueError("non-finite right-hand side")
        if not np.all(np.isfinite(self.a)):
            raise ValueError("non-finite constraint coefficient")

    def name_of(self, j: int) -> str:
        return self.names[j] if self.names else f"x{j}"

    def relation_text(self, i: int) -> str:
        return _REL_TEXT[int(self.relations[i])]


@dataclass
class SolveStats:
    simplex_iterations: int = 0
    nodes_explored: int = 0
    lp_solves: int = 0


@dataclass
class SolveResult:
    status: str  # "optimal", "infeasible", "unbounded", "gap_limit"
    objective: float
    x: np.ndarray
    bound: float
    gap: float
    stats: SolveStats

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


class ModelBuilder:
    """Incremental construction of a :class:`LinearProgram`.

    Variables are registered first (name, bounds, objective coefficient,
    integrality); rows are then added as {name: coefficient} dicts.
    """

    def __init__(self) -> None:
        self._index: dict[str, int] = {}
        self._obj: list[float] = []
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._integer: list[bool] = []
        self._rows: list[dict[int, float]] = []
        self._rels: list[int] = []
        self._rhs: list[float] = []
        self.objective_offset = 0.0

    def add_var(
        self,
        name: str,
        *,
        lower: float = 0.0,
        upper: float = np.inf,
        objective: float = 0.0,
        integer: bool = False,
    ) -> str:
        if name in self._index:
            raise ValueError(f"duplicate variable name {name!r}")
        self._index[name] = len(self._obj)
        self._obj.append(float(objective))
        self._lower.append(float(lower))
        self._upper.append(float(upper))
        self._integer.append(bool(integer))
        return name

    def add_objective(self, name: str, coefficient: float) -> None:
        self._obj[self._index[name]] += float(coefficient)

    def add_row(self, terms: dict[str, float], relation: int, rhs: float) -> None:
        if relation not in (LE, EQ, GE):
            raise ValueError(f"relation must be LE/EQ/GE, got {relation}")
        row = {}
        for name, coef in terms.items():
            if coef == 0.0:
                continue
            j = self._index[name]
            row[j] = row.get(j, 0.0) + float(coef)
        self._rows.append(row)
        self._rels.append(relation)
        self._rhs.append(float(rhs))

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def build(self) -> LinearProgram:
        n = len(self._obj)
        m = len(self._rows)
        a = np.zeros((m, n))
        for i, row in enumerate(self._rows):
            for j, coef in row.items():
                a[i, j] = coef
        names = [None] * n
        for name, j in self._index.items():
            names[j] = name
        prog = LinearProgram(
            objective=np.array(self._obj),
            a=a,
            relations=np.array(self._rels, dtype=np.int64),
            rhs=np.array(self._rhs),
            lower=np.array(self._lower),
            upper=np.array(self._upper),
            integrality=np.array(self._integer, dtype=bool),
            objective_offset=self.objective_offset,
            names=names,
        )
        prog.validate()
        return prog
