"""Scheduling-stage leader-follower pricing game.

The cavern retailer quotes a per-period buying-price schedule inside a
regulated band; the plants respond with exactly optimal shipping schedules
(a joint mixed-integer program, since the cavern's per-period intake
allowance couples them). The retailer's margin is resale price minus the
quoted price on every kilogram transacted. Prices are searched with a
seeded, fully deterministic genetic algorithm whose in-loop responses run
at a coarse certificate and whose final answer is re-solved tight.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .coalition import enumerate_structures, solve_planning, stability_report
from .milp import SolverError, solve_milp
from .plant import (
    CostBreakdown,
    ModelBuildError,
    PlanDecision,
    Schedule,
    build_schedule_model,
    cost_breakdown,
    extract_schedules,
)
from .scenario import Scenario

__all__ = [
    "PriceSchedule",
    "GAConfig",
    "EquilibriumReport",
    "FlatPricePoint",
    "FlatSweep",
    "SensitivityPoint",
    "follower_best_response",
    "leader_fitness",
    "optimize_prices",
    "fixed_price_sweep",
    "sensitivity_sweep",
]

ARRIVAL_CONVENTIONS = ("departure", "strict")

# price grid used to deduplicate fitness evaluations ($/kg); fine enough that
# the follower response is insensitive below it
_PRICE_STEP = 1e-3
_FLAT_SEEDS = 8


@dataclass(frozen=True)
class PriceSchedule:
    """A per-period buying-price quote, one value per scheduling period."""

    prices: tuple[float, ...]

    @classmethod
    def flat(cls, value: float, n_periods: int) -> "PriceSchedule":
        return cls(tuple(float(value) for _ in range(n_periods)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.prices, dtype=float)

    def validate(self, scenario: Scenario) -> "PriceSchedule":
        _price_vector(self, scenario)
        return self


@dataclass(frozen=True)
class GAConfig:
    population: int = 60
    generations: int = 150
    crossover_rate: float = 0.9
    mutation_rate: float = 0.2
    mutation_scale: float = 0.5  # $/kg standard deviation of a mutation nudge
    elitism: int = 2
    seed: int = 0

    def validate(self) -> "GAConfig":
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.mutation_scale < 0.0:
            raise ValueError("mutation_scale must be >= 0")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must satisfy 0 <= elitism < population")
        return self


@dataclass(frozen=True)
class EquilibriumReport:
    """Best price schedule found plus the full follower response at it."""

    best_prices: PriceSchedule
    leader_profit: float
    follower_profits: dict[int, float]
    transaction_series: dict[int, np.ndarray]  # delivered kg per departure period, cavern-bound plants
    injection_series: np.ndarray  # kg arriving at the cavern per period
    fitness_history: tuple[float, ...]  # best leader profit seen up to each generation
    discarded_series: dict[int, np.ndarray]
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class FlatPricePoint:
    price: float
    leader_profit: float
    total_volume: float  # kg transacted over the horizon


@dataclass(frozen=True)
class FlatSweep:
    points: tuple[FlatPricePoint, ...]
    best_index: int

    @property
    def best(self) -> FlatPricePoint:
        return self.points[self.best_index]


@dataclass(frozen=True)
class SensitivityPoint:
    """One row of a parameter sweep; planning sweeps fill the structure
    fields, scheduling sweeps fill the pricing-equilibrium fields."""

    value: float
    stable_structure: str | None = None
    structure_total: float | None = None
    block_values: tuple[float, ...] | None = None
    leader_profit: float | None = None
    follower_profits: dict[int, float] | None = None
    notes: tuple[str, ...] = ()


def _price_vector(prices, scenario: Scenario) -> np.ndarray:
    """Coerce a PriceSchedule or plain sequence to a validated array."""
    arr = prices.as_array() if isinstance(prices, PriceSchedule) else np.asarray(prices, dtype=float)
    if arr.shape != (scenario.n_periods,):
        raise ValueError(f"price schedule must have length {scenario.n_periods}, got shape {arr.shape}")
    floor = np.asarray(scenario.cavern.price_floor, dtype=float)
    ceiling = np.asarray(scenario.cavern.price_ceiling, dtype=float)
    if np.any(arr < floor - 1e-9) or np.any(arr > ceiling + 1e-9):
        bad = int(np.argmax((arr < floor - 1e-9) | (arr > ceiling + 1e-9)))
        raise ValueError(
            f"price {arr[bad]:.6f} at period {bad + 1} leaves the allowed band "
            f"[{floor[bad]:.6f}, {ceiling[bad]:.6f}]"
        )
    return arr


def _routing_units(plans: Sequence[PlanDecision], scenario: Scenario) -> list[list[PlanDecision]]:
    """Group plans into independent routing units: a cavern-bound plant plus
    every plant feeding it. Units share nothing but the cavern allowance."""
    cavern = scenario.cavern_index()
    by_id = {p.plant_id: p for p in plans}
    if len(by_id) != len(plans):
        raise ModelBuildError("duplicate plant ids in plan set")
    roots = {p.plant_id: [p] for p in plans if p.route == cavern}
    for p in plans:
        if p.route == cavern:
            continue
        hub = by_id.get(p.route)
        if hub is None or hub.route != cavern:
            raise ModelBuildError(
                f"plant {p.plant_id} routes to plant {p.route}, which is not a cavern-bound hub in the plan set"
            )
        roots[hub.plant_id].append(p)
    return [sorted(unit, key=lambda p: p.plant_id) for _, unit in sorted(roots.items())]


def _solve_follower_models(
    plans: Sequence[PlanDecision],
    scenario: Scenario,
    prices: np.ndarray,
    *,
    gap_tol: float,
    max_nodes: int,
    accept_gap: bool,
    cap_mode: str = "joint",
) -> tuple[dict[int, Schedule], float, tuple[str, ...]]:
    """Best response of every plant to a price quote, plans fixed.

    Tries the decoupled per-unit relaxation first: when the summed cavern
    arrivals stay inside the intake allowance the relaxation is jointly
    optimal and much cheaper. When the allowance couples the units,
    ``cap_mode`` picks the fallback: ``"joint"`` solves the single coupled
    model exactly, while ``"sequential"`` re-solves the units one at a time
    against the allowance left over by the previous ones (largest shipper
    first). The sequential schedules are feasible by construction and their
    summed objective is a lower bound on the coupled optimum, which makes
    them a cheap search surrogate — not a certificate, so every reported
    equilibrium must be re-solved with ``cap_mode="joint"``.
    Returns (schedules by plant, summed objective, notes).
    """
    plans = list(plans)
    units = _routing_units(plans, scenario)

    def run(
        unit_plans: list[PlanDecision], used: dict[int, float] | None = None
    ) -> tuple[dict[int, Schedule], float, tuple[str, ...]]:
        prog = build_schedule_model(unit_plans, scenario, prices, planning=False, injection_used=used)
        res = solve_milp(prog, gap_tol=gap_tol, max_nodes=max_nodes)
        notes: tuple[str, ...] = ()
        if res.status != "optimal":
            detail = (
                f"best response for plants {[p.plant_id for p in unit_plans]}: "
                f"proven bound {res.bound:.6f} vs incumbent {res.objective:.6f} "
                f"(relative gap {abs(res.bound - res.objective) / max(1.0, abs(res.objective)):.2e})"
            )
            if not accept_gap:
                raise SolverError("follower certificate not reached: " + detail)
            notes = (detail,)
        return extract_schedules(prog, res.x, unit_plans, scenario, status=res.status), res.objective, notes

    if len(units) > 1:
        unit_results = [run(unit) for unit in units]
        merged: dict[int, Schedule] = {}
        total = 0.0
        notes: tuple[str, ...] = ()
        for sched, obj, unit_notes in unit_results:
            merged.update(sched)
            total += obj
            notes += unit_notes
        if np.all(_injection_series(plans, merged, scenario) <= scenario.cavern.max_injection + 1e-6):
            return merged, total, notes
        if cap_mode == "sequential":
            return _sequential_fallback(units, unit_results, run, scenario)

    return run(plans)


def _sequential_fallback(
    units: list[list[PlanDecision]],
    standalone: list[tuple[dict[int, Schedule], float, tuple[str, ...]]],
    run,
    scenario: Scenario,
) -> tuple[dict[int, Schedule], float, tuple[str, ...]]:
    """Greedy allowance packing: units re-solved largest-shipper-first, each
    charged with the cavern arrivals already committed by earlier units.
    The first unit in the packing order keeps its standalone solution (its
    model is identical when nothing is committed yet)."""
    cavern = scenario.cavern_index()

    def unit_volume(k: int) -> float:
        sched = standalone[k][0]
        return sum(
            float(sched[p.plant_id].shipped.sum()) for p in units[k] if p.route == cavern
        )

    order = sorted(range(len(units)), key=lambda k: (-unit_volume(k), units[k][0].plant_id))
    used: dict[int, float] = {}
    merged: dict[int, Schedule] = {}
    total = 0.0
    notes: tuple[str, ...] = (
        "shared allowance split sequentially across routing units "
        "(search surrogate; reported equilibria are re-solved jointly)",
    )
    for pos, k in enumerate(order):
        unit = units[k]
        if pos == 0:
            sched, obj, unit_notes = standalone[k]
        else:
            sched, obj, unit_notes = run(unit, used)
        merged.update(sched)
        total += obj
        notes += unit_notes
        for p in unit:
            if p.route != cavern:
                continue
            travel = scenario.travel(p.plant_id, cavern)
            shipped = sched[p.plant_id].shipped
            for s in range(shipped.shape[0]):
                kg = float(shipped[s])
                if kg > 0.0:
                    arrival = s + 1 + travel
                    used[arrival] = used.get(arrival, 0.0) + kg
    return merged, total, notes


def _injection_series(
    plans: Sequence[PlanDecision], schedules: Mapping[int, Schedule], scenario: Scenario
) -> np.ndarray:
    """Kilograms arriving at the cavern per period, departures shifted by
    their travel time. Index 0 is period 1."""
    cavern = scenario.cavern_index()
    horizon = scenario.n_periods
    travels = [scenario.travel(p.plant_id, cavern) for p in plans if p.route == cavern]
    length = horizon + (max(travels) if travels else 0)
    arrivals = np.zeros(length)
    for plan in plans:
        if plan.route != cavern:
            continue
        travel = scenario.travel(plan.plant_id, cavern)
        shipped = schedules[plan.plant_id].shipped
        arrivals[travel : travel + horizon] += shipped
    return arrivals


def _leader_accounting(
    plans: Sequence[PlanDecision],
    schedules: Mapping[int, Schedule],
    scenario: Scenario,
    prices: np.ndarray,
    arrival_convention: str,
) -> tuple[float, float]:
    """(leader profit, total transacted kg) for a given follower response.

    Purchases are always priced at the departure period's quote. Resale
    income counts every delivered kilogram under the default "departure"
    convention (deliveries landing after the horizon sell at the same
    resale price the next day); under "strict" only arrivals inside the
    horizon are resold.
    """
    if arrival_convention not in ARRIVAL_CONVENTIONS:
        raise ValueError(f"arrival_convention must be one of {ARRIVAL_CONVENTIONS}")
    cavern = scenario.cavern_index()
    horizon = scenario.n_periods
    purchase = 0.0
    resold = 0.0
    volume = 0.0
    for plan in plans:
        if plan.route != cavern:
            continue
        shipped = schedules[plan.plant_id].shipped
        purchase += float(prices @ shipped)
        volume += float(shipped.sum())
        if arrival_convention == "departure":
            resold += float(shipped.sum())
        else:
            travel = scenario.travel(plan.plant_id, cavern)
            keep = max(0, horizon - travel)
            resold += float(shipped[:keep].sum())
    return scenario.cavern.retail_price * resold - purchase, volume


def follower_best_response(
    prices,
    plans: Sequence[PlanDecision],
    scenario: Scenario,
    *,
    gap_tol: float = 1e-6,
    max_nodes: int = 200_000,
) -> tuple[dict[int, Schedule], dict[int, CostBreakdown]]:
    """Jointly optimal plant schedules under a price quote, with proven
    certificates; raises SolverError with diagnostics if the certificate
    cannot be reached within the node budget."""
    arr = _price_vector(prices, scenario)
    schedules, _objective, _notes = _solve_follower_models(
        plans, scenario, arr, gap_tol=gap_tol, max_nodes=max_nodes, accept_gap=False
    )
    breakdowns = {p.plant_id: cost_breakdown(schedules[p.plant_id], p, scenario, arr) for p in plans}
    return schedules, breakdowns


def leader_fitness(
    prices,
    scenario: Scenario,
    plans: Sequence[PlanDecision],
    *,
    arrival_convention: str = "departure",
    gap_tol: float = 1e-6,
    max_nodes: int = 200_000,
) -> float:
    """Retailer profit (resale income minus purchase outlay) at the plants'
    best response to the quoted schedule."""
    arr = _price_vector(prices, scenario)
    schedules, _objective, _notes = _solve_follower_models(
        plans, scenario, arr, gap_tol=gap_tol, max_nodes=max_nodes, accept_gap=False
    )
    profit, _volume = _leader_accounting(plans, schedules, scenario, arr, arrival_convention)
    return profit


class _FitnessEngine:
    """Deduplicating fitness evaluator: one follower solve per distinct
    (quantized) price vector, incumbents accepted at the search gap and the
    allowance-coupled fallback replaced by the cheap sequential surrogate —
    fast enough for population loops, never reported without a joint
    re-solve."""

    def __init__(
        self,
        scenario: Scenario,
        plans: Sequence[PlanDecision],
        *,
        arrival_convention: str,
        gap_tol: float,
        max_nodes: int,
    ) -> None:
        self.scenario = scenario
        self.plans = list(plans)
        self.arrival_convention = arrival_convention
        self.gap_tol = gap_tol
        self.max_nodes = max_nodes
        self.cache: dict[bytes, tuple[float, float]] = {}

    def evaluate(self, arr: np.ndarray) -> tuple[float, float]:
        key = arr.tobytes()
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        schedules, _objective, _notes = _solve_follower_models(
            self.plans,
            self.scenario,
            arr,
            gap_tol=self.gap_tol,
            max_nodes=self.max_nodes,
            accept_gap=True,
            cap_mode="sequential",
        )
        out = _leader_accounting(self.plans, schedules, self.scenario, arr, self.arrival_convention)
        self.cache[key] = out
        return out


def _quantize(arr: np.ndarray, floor: np.ndarray, ceiling: np.ndarray) -> np.ndarray:
    snapped = np.round(arr / _PRICE_STEP) * _PRICE_STEP
    return np.clip(snapped, floor, ceiling)


def _seed_population(config: GAConfig, floor: np.ndarray, ceiling: np.ndarray) -> list[np.ndarray]:
    """Initial individuals: both band edges, a grid of flat schedules where
    a flat quote fits the band, then uniform random fill."""
    rows = [floor.copy(), ceiling.copy()]
    lo, hi = float(floor.max()), float(ceiling.min())
    if hi >= lo:
        n_flat = max(0, min(_FLAT_SEEDS, config.population - len(rows)))
        for v in np.linspace(lo, hi, n_flat):
            rows.append(np.full_like(floor, v))
    while len(rows) < config.population:
        rng = np.random.default_rng([config.seed, 0, len(rows)])
        rows.append(rng.uniform(floor, ceiling))
    return [_quantize(r, floor, ceiling) for r in rows[: config.population]]


def _offspring(
    parents: list[np.ndarray],
    fitness: list[float],
    config: GAConfig,
    generation: int,
    slot: int,
    floor: np.ndarray,
    ceiling: np.ndarray,
) -> np.ndarray:
    """One child, drawn from a dedicated substream so that evaluation order
    (or concurrency) cannot change the run."""
    rng = np.random.default_rng([config.seed, generation, slot])
    n = len(parents)

    def tournament() -> int:
        a, b = (int(v) for v in rng.integers(0, n, size=2))
        if fitness[a] != fitness[b]:
            return a if fitness[a] > fitness[b] else b
        return min(a, b)

    pa, pb = tournament(), tournament()
    if rng.random() < config.crossover_rate:
        mask = rng.random(floor.size) < 0.5
        child = np.where(mask, parents[pa], parents[pb])
    else:
        child = parents[pa].copy()
    mutate = rng.random(floor.size) < config.mutation_rate
    noise = rng.normal(0.0, config.mutation_scale, floor.size)
    child = child + np.where(mutate, noise, 0.0)
    return _quantize(np.clip(child, floor, ceiling), floor, ceiling)


def optimize_prices(
    scenario: Scenario,
    plans: Sequence[PlanDecision],
    config: GAConfig | None = None,
    *,
    arrival_convention: str = "departure",
    search_gap: float = 1e-4,
    search_nodes: int = 20_000,
    final_gap: float = 1e-6,
    final_nodes: int = 200_000,
    stall_generations: int | None = None,
) -> EquilibriumReport:
    """Genetic search over price schedules against exact follower responses.

    In-loop responses run at ``search_gap`` (allowance-coupled candidates
    use the sequential packing surrogate, so ``fitness_history`` is the
    search trajectory, not a certificate); the winning schedule is re-solved
    jointly at ``final_gap`` and the report's profits, transactions and
    injections all come from that exact response. ``stall_generations``
    stops early after that many generations without improvement (None runs
    the full budget). Deterministic for a fixed config: every random draw
    comes from substreams of ``config.seed``.
    """
    config = (config or GAConfig()).validate()
    if arrival_convention not in ARRIVAL_CONVENTIONS:
        raise ValueError(f"arrival_convention must be one of {ARRIVAL_CONVENTIONS}")
    plans = list(plans)
    floor = np.asarray(scenario.cavern.price_floor, dtype=float)
    ceiling = np.asarray(scenario.cavern.price_ceiling, dtype=float)
    engine = _FitnessEngine(
        scenario, plans, arrival_convention=arrival_convention, gap_tol=search_gap, max_nodes=search_nodes
    )

    degenerate = float((ceiling - floor).max()) <= 0.0
    population = [floor.copy()] if degenerate else _seed_population(config, floor, ceiling)
    fitness = [engine.evaluate(ind)[0] for ind in population]

    best_idx = min(range(len(population)), key=lambda i: (-fitness[i], i))
    best_arr = population[best_idx].copy()
    best_fit = fitness[best_idx]
    history = [best_fit]
    since_improve = 0

    if not degenerate:
        for generation in range(1, config.generations + 1):
            order = sorted(range(len(population)), key=lambda i: (-fitness[i], i))
            elites = [population[i].copy() for i in order[: config.elitism]]
            children = [
                _offspring(population, fitness, config, generation, slot, floor, ceiling)
                for slot in range(config.population - config.elitism)
            ]
            population = elites + children
            fitness = [engine.evaluate(ind)[0] for ind in population]
            gen_idx = min(range(len(population)), key=lambda i: (-fitness[i], i))
            if fitness[gen_idx] > best_fit + 1e-9:
                best_fit = fitness[gen_idx]
                best_arr = population[gen_idx].copy()
                since_improve = 0
            else:
                since_improve += 1
            history.append(best_fit)
            if stall_generations is not None and since_improve >= stall_generations:
                break

    schedules, _objective, notes = _solve_follower_models(
        plans, scenario, best_arr, gap_tol=final_gap, max_nodes=final_nodes, accept_gap=True
    )
    profit, _volume = _leader_accounting(plans, schedules, scenario, best_arr, arrival_convention)
    cavern = scenario.cavern_index()
    return EquilibriumReport(
        best_prices=PriceSchedule(tuple(float(v) for v in best_arr)),
        leader_profit=profit,
        follower_profits={
            p.plant_id: cost_breakdown(schedules[p.plant_id], p, scenario, best_arr).profit for p in plans
        },
        transaction_series={
            p.plant_id: schedules[p.plant_id].shipped.copy() for p in plans if p.route == cavern
        },
        injection_series=_injection_series(plans, schedules, scenario),
        fitness_history=tuple(history),
        discarded_series={p.plant_id: schedules[p.plant_id].discarded.copy() for p in plans},
        notes=notes,
    )


def fixed_price_sweep(
    scenario: Scenario,
    plans: Sequence[PlanDecision],
    grid: Iterable[float],
    *,
    arrival_convention: str = "departure",
    gap_tol: float = 1e-6,
    max_nodes: int = 200_000,
) -> FlatSweep:
    """Leader profit under time-invariant quotes, one follower solve per
    grid point; every grid price must fit the band in every period."""
    engine = _FitnessEngine(
        scenario, plans, arrival_convention=arrival_convention, gap_tol=gap_tol, max_nodes=max_nodes
    )
    points = []
    for value in grid:
        arr = _price_vector(PriceSchedule.flat(float(value), scenario.n_periods), scenario)
        profit, volume = engine.evaluate(arr)
        points.append(FlatPricePoint(price=float(value), leader_profit=profit, total_volume=volume))
    if not points:
        raise ValueError("price grid is empty")
    best_index = min(range(len(points)), key=lambda i: (-points[i].leader_profit, i))
    return FlatSweep(points=tuple(points), best_index=best_index)


def _with_equipment_invest(scenario: Scenario, index: int, value: float) -> Scenario:
    invest = list(scenario.catalog.invest_daily)
    if not 0 <= index < len(invest):
        raise ValueError(f"equipment index {index} outside catalog of {len(invest)} types")
    invest[index] = float(value)
    return dataclasses.replace(scenario, catalog=dataclasses.replace(scenario.catalog, invest_daily=tuple(invest)))


def sensitivity_sweep(
    scenario: Scenario,
    parameter: str,
    values: Iterable[float],
    *,
    plans: Sequence[PlanDecision] | None = None,
    config: GAConfig | None = None,
    arrival_convention: str = "departure",
    planning_gap: float = 1e-4,
    planning_nodes: int = 4_000,
    **ga_kwargs,
) -> tuple[SensitivityPoint, ...]:
    """Re-run a study stage across values of one driver.

    ``parameter`` names what varies:
    - ``"op_cost"`` — the per-period vehicle operating cost while in
      transit; planning is re-run (the preferred coalition structure may
      change) and each point reports the stable structure and its block
      values.
    - ``"equipment_invest:<k>"`` — the daily invest cost of catalog slot k;
      planning is re-run as for ``"op_cost"``.
    - ``"injection_cap"`` — the cavern's per-period intake allowance; the
      pricing equilibrium is re-run with the given ``plans`` and each point
      reports leader and follower profits.
    """

    def planning_point(swept: Scenario, value: float) -> SensitivityPoint:
        structures = enumerate_structures(swept.n_plants)
        solved = [
            solve_planning(s, swept, gap_tol=planning_gap, max_nodes=planning_nodes) for s in structures
        ]
        report = stability_report(solved)
        pick = report.stable[0] if report.stable else max(
            range(len(solved)), key=lambda i: solved[i].total
        )
        chosen = solved[pick]
        return SensitivityPoint(
            value=float(value),
            stable_structure=chosen.structure.label(),
            structure_total=chosen.total,
            block_values=tuple(chosen.block_values),
            notes=() if report.stable else ("no stable structure; reporting the best total",),
        )

    points: list[SensitivityPoint] = []
    if parameter == "op_cost":
        for value in values:
            swept = dataclasses.replace(
                scenario,
                transport=dataclasses.replace(scenario.transport, op_cost_per_period=float(value)),
            )
            points.append(planning_point(swept, value))
    elif parameter.startswith("equipment_invest:"):
        index = int(parameter.split(":", 1)[1])
        for value in values:
            points.append(planning_point(_with_equipment_invest(scenario, index, value), value))
    elif parameter == "injection_cap":
        if plans is None:
            raise ValueError("injection_cap sweeps need the fixed plan set")
        for value in values:
            swept = dataclasses.replace(
                scenario, cavern=dataclasses.replace(scenario.cavern, max_injection=float(value))
            )
            report = optimize_prices(
                swept, plans, config, arrival_convention=arrival_convention, **ga_kwargs
            )
            points.append(
                SensitivityPoint(
                    value=float(value),
                    leader_profit=report.leader_profit,
                    follower_profits=dict(report.follower_profits),
                    notes=report.notes,
                )
            )
    else:
        raise ValueError(
            f"unknown sweep parameter {parameter!r}; use 'op_cost', 'equipment_invest:<k>' or 'injection_cap'"
        )
    return tuple(points)
