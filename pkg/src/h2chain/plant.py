"""Per-plant physics and economics translated into solvable models.

Given fixed discrete planning choices (equipment type, route, fleet), a
plant's day is a mixed-integer program over processing, buffering, vehicle
departures and discard decisions.  Plants whose route points at another
plant (a transit hub) feed that hub's unprocessed tank after the travel
delay; plants routed at the cavern earn revenue and share its per-period
injection allowance.

Shipped mass within a period is always a whole number of vehicle loads, net
of in-transit retention for liquid routes.  The bracketing rule "vehicles
depart exactly when full" is expressed by the buffer recursion plus the
bound vehicle_buffer < one load, which together pin departures to
floor(available / load).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .milp import EQ, LE, LinearProgram, ModelBuilder
from .scenario import Scenario, TransportParams


class ModelBuildError(ValueError):
    """Raised when plan/scenario combinations cannot form a valid model."""


@dataclass(frozen=True)
class PlanDecision:
    plant_id: int  # 1-based
    equipment_index: int  # 0-based position in the catalog
    route: int  # 1-based destination: plant id, or n_plants+1 for the cavern
    fleet_size: int = 0

    def label(self, n_plants: int) -> str:
        dest = "cavern" if self.route == n_plants + 1 else f"plant {self.route}"
        return f"plant {self.plant_id}: equipment {self.equipment_index}, to {dest}, fleet {self.fleet_size}"


@dataclass
class Schedule:
    plant_id: int
    processed: np.ndarray  # kg handled by compressor/liquefier per period
    shipped: np.ndarray  # kg delivered per departure period (retention applied)
    vehicle_buffer: np.ndarray  # kg waiting in partially filled vehicles
    tank_buffer: np.ndarray  # kg in the low-pressure tank
    departures: np.ndarray  # vehicles leaving per period
    discarded: np.ndarray  # kg vented per period
    status: str = "optimal"


@dataclass
class CostBreakdown:
    revenue: float
    processing_cost: float
    transport_cost: float
    equipment_invest: float
    fleet_invest: float

    @property
    def profit(self) -> float:
        return self.revenue - self.processing_cost - self.transport_cost - self.equipment_invest - self.fleet_invest


def transit_retention(transport: TransportParams, travel_time: int, liquid: bool) -> float:
    """Fraction of a load that survives the trip; gas loses nothing."""
    if not liquid:
        return 1.0
    return transport.transit_retention_base ** travel_time


def fleet_size_bounds(daily_generation: float, vehicle_capacity: float, travel_time: int) -> tuple[int, int]:
    """Search range for fleet size: enough vehicles to move a day's output
    plus one full round trip's worth of slack."""
    loads = int(np.ceil(daily_generation / vehicle_capacity)) if daily_generation > 0 else 0
    return 0, loads + 2 * travel_time + 1


@dataclass(frozen=True)
class _PlantCtx:
    plan: PlanDecision
    liquid: bool
    vehicle_capacity: float
    load_retention: float  # per-period decay of the waiting vehicle buffer
    route_retention: float  # survival fraction over the route
    travel_time: int
    cap_mass: float  # processing and tank bound per period, kg
    energy_per_kg: float
    vehicle_invest: float


def _context(plan: PlanDecision, scenario: Scenario) -> _PlantCtx:
    cat = scenario.catalog
    tr = scenario.transport
    n_types = cat.n_compressor_types + cat.n_liquefier_types
    if not 0 <= plan.equipment_index < n_types:
        raise ModelBuildError(f"plant {plan.plant_id}: equipment index {plan.equipment_index} outside catalog")
    if not 1 <= plan.plant_id <= scenario.n_plants:
        raise ModelBuildError(f"unknown plant id {plan.plant_id}")
    if not 1 <= plan.route <= scenario.cavern_index() or plan.route == plan.plant_id:
        raise ModelBuildError(f"plant {plan.plant_id}: invalid route {plan.route}")
    if plan.fleet_size < 0:
        raise ModelBuildError(f"plant {plan.plant_id}: negative fleet size")
    liquid = not cat.is_compressor(plan.equipment_index)
    travel = scenario.travel(plan.plant_id, plan.route)
    return _PlantCtx(
        plan=plan,
        liquid=liquid,
        vehicle_capacity=tr.tanker_capacity if liquid else tr.tube_capacity,
        load_retention=tr.loading_retention if liquid else 1.0,
        route_retention=transit_retention(tr, travel, liquid),
        travel_time=travel,
        cap_mass=cat.capacities[plan.equipment_index] * scenario.horizon.period_hours,
        energy_per_kg=cat.energy_per_kg(plan.equipment_index),
        vehicle_invest=tr.tanker_invest_daily if liquid else tr.tube_invest_daily,
    )


def build_schedule_model(
    plans: list[PlanDecision],
    scenario: Scenario,
    prices: np.ndarray,
    *,
    planning: bool = False,
    injection_used: dict[int, float] | None = None,
) -> LinearProgram:
    """Joint model over one or more complete routing units.

    ``plans`` must close under routing: a plan pointing at another plant
    requires that plant to be present and itself routed at the cavern.
    ``planning=True`` makes fleet sizes integer variables (their investment
    joins the objective); otherwise fleets are fixed at plan.fleet_size.
    ``injection_used`` charges already-committed cavern arrivals (kg per
    arrival period) against the shared injection allowance.
    """
    t_count = scenario.n_periods
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (t_count,):
        raise ModelBuildError(f"price vector has shape {prices.shape}, expected ({t_count},)")
    cavern = scenario.cavern_index()
    by_id = {}
    for plan in plans:
        if plan.plant_id in by_id:
            raise ModelBuildError(f"plant {plan.plant_id} appears twice")
        by_id[plan.plant_id] = _context(plan, scenario)
    for ctx in by_id.values():
        route = ctx.plan.route
        if route == cavern:
            continue
        if route not in by_id:
            raise ModelBuildError(f"plant {ctx.plan.plant_id} routes to plant {route} which is not in the model")
        if by_id[route].plan.route != cavern:
            raise ModelBuildError(f"plant {ctx.plan.plant_id} routes to plant {route}, which is not a cavern-bound hub")
        if ctx.travel_time >= t_count:
            raise ModelBuildError(
                f"plant {ctx.plan.plant_id}: travel time {ctx.travel_time} to its hub leaves no arrival inside the horizon"
            )

    w = np.asarray(scenario.tariff.electricity_price, dtype=float)
    k3 = scenario.transport.op_cost_per_period
    b = ModelBuilder()

    for i, ctx in by_id.items():
        tank_ub = ctx.cap_mass if scenario.plant(i).tank_bound_by_equipment else np.inf
        fleet_cap = ctx.plan.fleet_size
        if planning:
            _, fleet_cap = fleet_size_bounds(_unit_generation(ctx, by_id, scenario), ctx.vehicle_capacity, ctx.travel_time)
        for t in range(1, t_count + 1):
            b.add_var(f"pr[{i},{t}]", upper=ctx.cap_mass, objective=-w[t - 1] * ctx.energy_per_kg)
            b.add_var(f"st[{i},{t}]", upper=ctx.vehicle_capacity)
            b.add_var(f"un[{i},{t}]", upper=tank_ub)
            b.add_var(f"dc[{i},{t}]")
            rev = prices[t - 1] * ctx.vehicle_capacity * ctx.route_retention if ctx.plan.route == cavern else 0.0
            b.add_var(
                f"n[{i},{t}]",
                upper=float(fleet_cap),
                integer=True,
                objective=rev - k3 * ctx.travel_time,
            )
        b.objective_offset -= scenario.catalog.invest_daily[ctx.plan.equipment_index]
        if planning:
            b.add_var(f"N[{i}]", upper=float(fleet_cap), integer=True, objective=-ctx.vehicle_invest)
        else:
            b.objective_offset -= ctx.vehicle_invest * ctx.plan.fleet_size

    for i, ctx in by_id.items():
        gen = scenario.plant(i).generation
        q = ctx.vehicle_capacity
        for t in range(1, t_count + 1):
            # vehicle buffer recursion: buffer_t = decay*buffer_{t-1} + processed_t - loads_t
            terms = {f"st[{i},{t}]": 1.0, f"pr[{i},{t}]": -1.0, f"n[{i},{t}]": q}
            if t > 1:
                terms[f"st[{i},{t - 1}]"] = -ctx.load_retention
            b.add_row(terms, EQ, 0.0)

            # tank balance: tank_t = tank_{t-1} + generated - processed + inbound - discarded
            terms = {f"un[{i},{t}]": 1.0, f"pr[{i},{t}]": 1.0, f"dc[{i},{t}]": 1.0}
            if t > 1:
                terms[f"un[{i},{t - 1}]"] = -1.0
            for j, src in by_id.items():
                if src.plan.route == i:
                    dep = t - src.travel_time
                    if dep >= 1:
                        terms[f"n[{j},{dep}]"] = -src.vehicle_capacity * src.route_retention
            b.add_row(terms, EQ, float(gen[t - 1]))

            # fleet window: departures in one round trip cannot exceed the fleet
            window = {f"n[{i},{s}]": 1.0 for s in range(max(1, t - 2 * ctx.travel_time), t + 1)}
            if planning:
                window[f"N[{i}]"] = -1.0
                b.add_row(window, LE, 0.0)
            else:
                b.add_row(window, LE, float(ctx.plan.fleet_size))

    # Prefix load-count cuts: departures through period t are an integer
    # count bounded by the mass that could possibly have been processed by
    # then, so the floor of that budget is valid for every integer point.
    # They change no integer solution but pull the relaxation close to the
    # integer hull, which is what keeps branch and bound shallow.
    periods = np.arange(1, t_count + 1, dtype=float)
    member_loads: dict[int, np.ndarray] = {}
    for i, ctx in by_id.items():
        if ctx.plan.route != cavern:
            budget = np.minimum(np.cumsum(scenario.plant(i).generation), ctx.cap_mass * periods)
            member_loads[i] = np.floor(budget / ctx.vehicle_capacity + 1e-9)
    for i, ctx in by_id.items():
        cum = np.cumsum(scenario.plant(i).generation).astype(float)
        for j, src in by_id.items():
            if src.plan.route != i:
                continue
            for t in range(1, t_count + 1):
                dep = t - src.travel_time
                if dep >= 1:
                    cum[t - 1] += member_loads[j][dep - 1] * src.vehicle_capacity * src.route_retention
        budget = np.minimum(cum, ctx.cap_mass * periods)
        for t in range(1, t_count + 1):
            terms = {f"n[{i},{s}]": 1.0 for s in range(1, t + 1)}
            b.add_row(terms, LE, float(np.floor(budget[t - 1] / ctx.vehicle_capacity + 1e-9)))

    # shared injection allowance on arrivals, one row per arrival period
    used = injection_used or {}
    max_travel = max((c.travel_time for c in by_id.values() if c.plan.route == cavern), default=0)
    for arrival in range(1, t_count + max_travel + 1):
        terms = {}
        for i, ctx in by_id.items():
            if ctx.plan.route != cavern:
                continue
            dep = arrival - ctx.travel_time
            if 1 <= dep <= t_count:
                terms[f"n[{i},{dep}]"] = ctx.vehicle_capacity * ctx.route_retention
        if terms:
            allowance = scenario.cavern.max_injection - used.get(arrival, 0.0)
            b.add_row(terms, LE, max(allowance, 0.0))

    return b.build()


def _unit_generation(ctx: _PlantCtx, by_id: dict[int, _PlantCtx], scenario: Scenario) -> float:
    total = float(np.sum(scenario.plant(ctx.plan.plant_id).generation))
    for j, src in by_id.items():
        if src.plan.route == ctx.plan.plant_id:
            total += float(np.sum(scenario.plant(j).generation))
    return total


def extract_schedules(prog: LinearProgram, x: np.ndarray, plans: list[PlanDecision], scenario: Scenario, status: str = "optimal") -> dict[int, Schedule]:
    """Read per-plant time series back out of a solved model."""
    t_count = scenario.n_periods
    col = {name: k for k, name in enumerate(prog.names)}
    out: dict[int, Schedule] = {}
    for plan in plans:
        ctx = _context(plan, scenario)
        i = plan.plant_id

        def series(prefix: str) -> np.ndarray:
            return np.array([x[col[f"{prefix}[{i},{t}]"]] for t in range(1, t_count + 1)])

        departures = np.round(series("n")).astype(np.int64)
        out[i] = Schedule(
            plant_id=i,
            processed=series("pr"),
            shipped=departures * ctx.vehicle_capacity * ctx.route_retention,
            vehicle_buffer=series("st"),
            tank_buffer=series("un"),
            departures=departures,
            discarded=series("dc"),
            status=status,
        )
    return out


def extract_fleets(prog: LinearProgram, x: np.ndarray, plans: list[PlanDecision]) -> dict[int, int]:
    """Chosen fleet sizes from a planning-mode solution."""
    col = {name: k for k, name in enumerate(prog.names)}
    return {p.plant_id: int(round(x[col[f"N[{p.plant_id}]"]])) for p in plans}


def cost_breakdown(schedule: Schedule, plan: PlanDecision, scenario: Scenario, prices: np.ndarray) -> CostBreakdown:
    ctx = _context(plan, scenario)
    prices = np.asarray(prices, dtype=float)
    w = np.asarray(scenario.tariff.electricity_price, dtype=float)
    to_cavern = plan.route == scenario.cavern_index()
    return CostBreakdown(
        revenue=float(prices @ schedule.shipped) if to_cavern else 0.0,
        processing_cost=float((w * ctx.energy_per_kg) @ schedule.processed),
        transport_cost=float(scenario.transport.op_cost_per_period * ctx.travel_time * schedule.departures.sum()),
        equipment_invest=float(scenario.catalog.invest_daily[plan.equipment_index]),
        fleet_invest=float(ctx.vehicle_invest * plan.fleet_size),
    )


SCHEDULE_CSV_COLUMNS = ["period", "processed_kg", "shipped_kg", "vehicle_buffer_kg", "tank_buffer_kg", "departures", "discarded_kg"]


def schedule_csv(schedule: Schedule) -> str:
    buf = io.StringIO()
    buf.write(",".join(SCHEDULE_CSV_COLUMNS) + "\n")
    for t in range(schedule.processed.shape[0]):
        row = [
            str(t + 1),
            f"{schedule.processed[t]:.6f}",
            f"{schedule.shipped[t]:.6f}",
            f"{schedule.vehicle_buffer[t]:.6f}",
            f"{schedule.tank_buffer[t]:.6f}",
            str(int(schedule.departures[t])),
            f"{schedule.discarded[t]:.6f}",
        ]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


COST_CSV_COLUMNS = ["revenue", "processing_cost", "transport_cost", "equipment_invest", "fleet_invest", "profit"]


def cost_csv(breakdown: CostBreakdown) -> str:
    vals = [breakdown.revenue, breakdown.processing_cost, breakdown.transport_cost, breakdown.equipment_invest, breakdown.fleet_invest, breakdown.profit]
    return ",".join(COST_CSV_COLUMNS) + "\n" + ",".join(f"{v:.6f}" for v in vals) + "\n"
