"""Shared builders for the test suite: scenarios, random models, plans."""

from __future__ import annotations

import numpy as np
import pytest

from h2chain.plant import PlanDecision
from h2chain.scenario import bundled_fixture, from_dict, load_scenario


@pytest.fixture(scope="session")
def tiny_case():
    return load_scenario(bundled_fixture("tiny_case.json"))


@pytest.fixture(scope="session")
def paper_case():
    return load_scenario(bundled_fixture("paper_case.json"))


def paper_stable_plans(scenario):
    """The planning outcome of the bundled day-ahead case: plants 1 and 2
    cooperate through plant 2 as hub, plant 3 ships on its own."""
    cavern = scenario.cavern_index()
    return [
        PlanDecision(1, 0, 2, 5),
        PlanDecision(2, 2, cavern, 5),
        PlanDecision(3, 2, cavern, 5),
    ]


def make_scenario(
    *,
    n_plants=2,
    n_periods=3,
    generation=None,
    tariff=None,
    travel_to_cavern=None,
    max_injection=500.0,
    retail_price=10.0,
    price_floor=2.0,
    price_ceiling=8.0,
    op_cost=2.0,
    capacities=(60.0, 100.0),
    n_compressor_types=1,
    invest_daily=(30.0, 80.0),
    tube_capacity=40.0,
    tanker_capacity=100.0,
    period_hours=1.0,
    tank_bound_by_equipment=True,
    loading_retention=0.99,
    transit_retention_base=0.995,
):
    """A small scenario with every knob overridable; defaults give a feasible
    two-plant, three-period case."""
    if generation is None:
        generation = [[50.0] * n_periods for _ in range(n_plants)]
    if tariff is None:
        tariff = [0.5] * n_periods
    if travel_to_cavern is None:
        travel_to_cavern = [1] * n_plants
    travel = []
    for i in range(n_plants):
        row = [0] * n_plants + [travel_to_cavern[i]]
        travel.append(row)
    floor = [price_floor] * n_periods if np.isscalar(price_floor) else list(price_floor)
    ceiling = [price_ceiling] * n_periods if np.isscalar(price_ceiling) else list(price_ceiling)
    raw = {
        "schema_version": 1,
        "horizon": {"n_periods": n_periods, "period_hours": period_hours},
        "plants": [
            {
                "id": i + 1,
                "generation": list(generation[i]),
                "tank_bound_by_equipment": tank_bound_by_equipment,
            }
            for i in range(n_plants)
        ],
        "catalog": {
            "capacities": list(capacities),
            "invest_daily": list(invest_daily),
            "n_compressor_types": n_compressor_types,
            "n_liquefier_types": len(capacities) - n_compressor_types,
            "energy_per_kg_compress": 1.0,
            "energy_per_kg_liquefy": 8.18,
        },
        "transport": {
            "tube_capacity": tube_capacity,
            "tanker_capacity": tanker_capacity,
            "tube_invest_daily": 8.0,
            "tanker_invest_daily": 20.0,
            "op_cost_per_period": op_cost,
            "travel_periods": travel,
            "loading_retention": loading_retention,
            "transit_retention_base": transit_retention_base,
        },
        "cavern": {
            "retail_price": retail_price,
            "price_floor": floor,
            "price_ceiling": ceiling,
            "max_injection": max_injection,
        },
        "tariff": {"electricity_price": list(tariff)},
    }
    return from_dict(raw)


def random_lp(rng, *, n_vars=None, n_rows=None):
    """A random dense LP with finite bounds (always feasible at lower bounds
    unless rows conflict; statuses vary across draws)."""
    from h2chain.milp import EQ, GE, LE, LinearProgram

    n = n_vars or int(rng.integers(2, 7))
    m = n_rows or int(rng.integers(1, 6))
    a = np.round(rng.uniform(-4.0, 4.0, size=(m, n)), 3)
    x_ref = np.round(rng.uniform(0.0, 5.0, size=n), 3)
    slack = np.round(rng.uniform(0.0, 3.0, size=m), 3)
    relations = rng.choice([LE, GE, EQ], size=m, p=[0.6, 0.25, 0.15]).astype(np.int8)
    rhs = a @ x_ref
    rhs = np.where(relations == LE, rhs + slack, rhs)
    rhs = np.where(relations == GE, rhs - slack, rhs)
    lower = np.zeros(n)
    upper = np.full(n, 10.0)
    objective = np.round(rng.uniform(-5.0, 5.0, size=n), 3)
    prog = LinearProgram(
        objective=objective,
        a=a,
        relations=relations,
        rhs=np.asarray(rhs, dtype=float),
        lower=lower,
        upper=upper,
        integrality=np.zeros(n, dtype=bool),
        objective_offset=float(np.round(rng.uniform(-10, 10), 3)),
    )
    prog.validate()
    return prog


def random_tiny_milp(rng, *, max_range=6):
    """A random MILP small enough for the lattice oracle: <= 4 integers with
    tight ranges plus a couple of continuous variables."""
    from h2chain.milp import EQ, GE, LE, LinearProgram

    n_int = int(rng.integers(1, 5))
    n_cont = int(rng.integers(0, 3))
    n = n_int + n_cont
    m = int(rng.integers(1, 5))
    a = np.round(rng.uniform(-3.0, 3.0, size=(m, n)), 2)
    x_ref = np.concatenate(
        [rng.integers(0, max_range, size=n_int).astype(float), np.round(rng.uniform(0, 4, size=n_cont), 2)]
    )
    slack = np.round(rng.uniform(0.0, 4.0, size=m), 2)
    relations = rng.choice([LE, GE, EQ], size=m, p=[0.6, 0.25, 0.15]).astype(np.int8)
    rhs = a @ x_ref
    rhs = np.where(relations == LE, rhs + slack, rhs)
    rhs = np.where(relations == GE, rhs - slack, rhs)
    lower = np.zeros(n)
    upper = np.concatenate([np.full(n_int, float(max_range)), np.full(n_cont, 8.0)])
    integrality = np.zeros(n, dtype=bool)
    integrality[:n_int] = True
    prog = LinearProgram(
        objective=np.round(rng.uniform(-5.0, 5.0, size=n), 2),
        a=a,
        relations=relations,
        rhs=np.asarray(rhs, dtype=float),
        lower=lower,
        upper=upper,
        integrality=integrality,
    )
    prog.validate()
    return prog


def assert_schedule_physics(scenario, plans, schedules, *, tol=1e-6):
    """The invariants every solved schedule must satisfy:

    1. per-period tank mass balance with discard slack;
    2. round-trip fleet window: departures within one round trip <= fleet;
    3. cavern arrival cap per arrival period;
    4. liquid retention compounding: shipped mass = departures x load x base^travel;
    5. gas shipments are exact integer multiples of the tube load.
    """
    from h2chain.plant import _context

    t_count = scenario.n_periods
    cavern = scenario.cavern_index()
    ctx_of = {p.plant_id: _context(p, scenario) for p in plans}

    arrivals: dict[int, float] = {}
    for plan in plans:
        ctx = ctx_of[plan.plant_id]
        s = schedules[plan.plant_id]

        # 4 & 5: shipped mass is departures x one load x route retention
        expect = s.departures * ctx.vehicle_capacity * ctx.route_retention
        assert np.allclose(s.shipped, expect, atol=tol), f"plant {plan.plant_id}: shipped != loads x retention"
        if not ctx.liquid:
            assert ctx.route_retention == 1.0
            multiples = s.shipped / scenario.transport.tube_capacity
            assert np.allclose(multiples, np.round(multiples), atol=tol), "gas shipment not whole tube loads"
        else:
            assert ctx.route_retention == pytest.approx(
                scenario.transport.transit_retention_base**ctx.travel_time, abs=1e-12
            )

        # 2: fleet round-trip window
        for t in range(1, t_count + 1):
            lo = max(1, t - 2 * ctx.travel_time)
            window = int(np.sum(s.departures[lo - 1 : t]))
            assert window <= plan.fleet_size + tol, f"plant {plan.plant_id}: window {window} > fleet {plan.fleet_size}"

        # 1: tank balance, i.e. un_t - un_{t-1} = gen + inbound - processed - discarded
        gen = np.asarray(scenario.plant(plan.plant_id).generation, dtype=float)
        inbound = np.zeros(t_count)
        for other in plans:
            if other.route == plan.plant_id:
                src = ctx_of[other.plant_id]
                osched = schedules[other.plant_id]
                for dep in range(1, t_count + 1):
                    arr = dep + src.travel_time
                    if arr <= t_count:
                        inbound[arr - 1] += osched.shipped[dep - 1]
        prev = 0.0
        for t in range(t_count):
            delta = gen[t] + inbound[t] - s.processed[t] - s.discarded[t]
            assert s.tank_buffer[t] == pytest.approx(prev + delta, abs=1e-5), (
                f"plant {plan.plant_id}, period {t + 1}: tank balance violated"
            )
            prev = s.tank_buffer[t]
        assert np.all(s.discarded >= -tol)
        assert np.all(s.tank_buffer >= -tol)
        assert np.all(s.vehicle_buffer >= -tol)
        assert np.all(s.vehicle_buffer <= ctx.vehicle_capacity + tol)

        # collect cavern arrivals for 3
        if plan.route == cavern:
            for dep in range(1, t_count + 1):
                arr = dep + ctx.travel_time
                arrivals[arr] = arrivals.get(arr, 0.0) + s.shipped[dep - 1]

    # 3: shared injection allowance per arrival period
    for arr, mass in arrivals.items():
        assert mass <= scenario.cavern.max_injection + tol, f"arrival {arr}: {mass} over the cap"


def random_feasible_plan(rng, scenario, plant_id, *, to_cavern=True):
    """A random plan for one plant with a workable fleet."""
    cat = scenario.catalog
    n_types = cat.n_compressor_types + cat.n_liquefier_types
    route = scenario.cavern_index() if to_cavern else int(rng.integers(1, scenario.n_plants + 1))
    return PlanDecision(
        plant_id=plant_id,
        equipment_index=int(rng.integers(0, n_types)),
        route=route,
        fleet_size=int(rng.integers(1, 5)),
    )
