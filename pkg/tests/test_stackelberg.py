"""Retailer-pricing tests: follower responses against the lattice oracle,
leader accounting identities, supply monotonicity under flat quotes, and the
genetic price search (determinism, band safety, dominance over flat quotes)."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from h2chain.milp import brute_force_oracle
from h2chain.milp.model import SolverError
from h2chain.plant import PlanDecision, build_schedule_model
from h2chain.stackelberg import (
    GAConfig,
    PriceSchedule,
    fixed_price_sweep,
    follower_best_response,
    leader_fitness,
    optimize_prices,
    sensitivity_sweep,
)
from h2chain.stackelberg import _solve_follower_models  # white-box: surrogate check

from conftest import make_scenario, paper_stable_plans


def _single_plant_case(**kw):
    defaults = dict(n_plants=1, n_periods=3, travel_to_cavern=[1], max_injection=500.0)
    defaults.update(kw)
    return make_scenario(**defaults)


def _cavern_plan(scenario, plant_id=1, equipment=0, fleet=2):
    return PlanDecision(plant_id, equipment, scenario.cavern_index(), fleet)


# ---------------------------------------------------------------------------
# price schedules and configs


class TestPriceSchedule:
    def test_flat_constructor(self):
        sched = PriceSchedule.flat(4.5, 3)
        assert sched.prices == (4.5, 4.5, 4.5)
        assert sched.as_array().tolist() == [4.5, 4.5, 4.5]

    def test_validate_accepts_in_band(self):
        sc = _single_plant_case()
        PriceSchedule.flat(5.0, sc.n_periods).validate(sc)

    def test_validate_rejects_out_of_band(self):
        sc = _single_plant_case()  # band [2, 8]
        with pytest.raises(ValueError, match="band"):
            PriceSchedule.flat(9.0, sc.n_periods).validate(sc)
        with pytest.raises(ValueError, match="band"):
            PriceSchedule.flat(1.0, sc.n_periods).validate(sc)

    def test_validate_rejects_wrong_length(self):
        sc = _single_plant_case()
        with pytest.raises(ValueError, match="length"):
            PriceSchedule.flat(5.0, sc.n_periods + 1).validate(sc)


class TestGAConfig:
    def test_defaults_valid(self):
        GAConfig().validate()

    @pytest.mark.parametrize(
        "kw",
        [
            {"population": 1},
            {"generations": -1},
            {"crossover_rate": 1.5},
            {"mutation_rate": -0.1},
            {"mutation_scale": -1.0},
            {"elitism": 4, "population": 4},
        ],
    )
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ValueError):
            GAConfig(**kw).validate()


# ---------------------------------------------------------------------------
# follower responses


class TestFollowerBestResponse:
    def test_matches_lattice_oracle(self):
        sc = _single_plant_case(n_periods=2, generation=[[60.0, 40.0]])
        plan = _cavern_plan(sc)
        prices = np.array([6.0, 7.5])
        schedules, breakdowns = follower_best_response(prices, [plan], sc)
        mine = breakdowns[1].profit
        prog = build_schedule_model([plan], sc, prices)
        want = brute_force_oracle(prog, max_points=500_000)
        assert want.status == "optimal"
        assert mine == pytest.approx(want.objective, rel=1e-6, abs=1e-6)

    def test_profit_weakly_increasing_in_flat_price(self):
        sc = _single_plant_case()
        plan = _cavern_plan(sc)
        profits = []
        for p in (3.0, 5.0, 7.0):
            _, breakdowns = follower_best_response(
                PriceSchedule.flat(p, sc.n_periods), [plan], sc
            )
            profits.append(breakdowns[1].profit)
        for lo, hi in zip(profits, profits[1:]):
            assert hi >= lo - 1e-6

    def test_certificate_failure_raises(self, paper_case):
        plans = paper_stable_plans(paper_case)
        prices = PriceSchedule.flat(8.0, paper_case.n_periods)
        with pytest.raises(SolverError, match="certificate"):
            follower_best_response(prices, plans, paper_case, gap_tol=1e-12, max_nodes=3)

    def test_schedules_returned_for_every_plant(self):
        sc = make_scenario(n_plants=2)
        plans = [_cavern_plan(sc, 1), _cavern_plan(sc, 2)]
        schedules, breakdowns = follower_best_response(
            PriceSchedule.flat(6.0, sc.n_periods), plans, sc
        )
        assert set(schedules) == {1, 2} and set(breakdowns) == {1, 2}


class TestLeaderAccounting:
    def test_identity_against_recomputation(self):
        sc = make_scenario(n_plants=2)
        plans = [_cavern_plan(sc, 1), _cavern_plan(sc, 2)]
        prices = np.array([4.0, 6.5, 7.0])
        fit = leader_fitness(prices, sc, plans)
        schedules, _ = follower_best_response(prices, plans, sc)
        resale = sc.cavern.retail_price * sum(s.shipped.sum() for s in schedules.values())
        outlay = sum(float(prices @ s.shipped) for s in schedules.values())
        assert fit == pytest.approx(resale - outlay, rel=1e-9, abs=1e-9)

    def test_strict_convention_never_exceeds_departure(self):
        sc = _single_plant_case(travel_to_cavern=[2])
        plan = _cavern_plan(sc, fleet=4)
        prices = PriceSchedule.flat(6.0, sc.n_periods)
        loose = leader_fitness(prices, sc, [plan], arrival_convention="departure")
        strict = leader_fitness(prices, sc, [plan], arrival_convention="strict")
        assert strict <= loose + 1e-9

    def test_invalid_convention_rejected(self):
        sc = _single_plant_case()
        with pytest.raises(ValueError, match="arrival_convention"):
            leader_fitness(
                PriceSchedule.flat(5.0, sc.n_periods),
                sc,
                [_cavern_plan(sc)],
                arrival_convention="midpoint",
            )


# ---------------------------------------------------------------------------
# flat-quote sweeps


class TestFixedPriceSweep:
    def test_supply_curve_monotone_and_best_is_max(self):
        sc = make_scenario(n_plants=2)
        plans = [_cavern_plan(sc, 1), _cavern_plan(sc, 2)]
        grid = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
        sweep = fixed_price_sweep(sc, plans, grid)
        assert [pt.price for pt in sweep.points] == grid
        profits = [pt.leader_profit for pt in sweep.points]
        assert sweep.best.leader_profit == max(profits)
        # revealed preference: delivered volume weakly increases with a
        # flat quote when revenue is priced at departure
        volumes = [pt.total_volume for pt in sweep.points]
        for lo, hi in zip(volumes, volumes[1:]):
            assert hi >= lo - 1e-3

    def test_matches_leader_fitness_pointwise(self):
        sc = _single_plant_case()
        plans = [_cavern_plan(sc)]
        sweep = fixed_price_sweep(sc, plans, [4.0, 6.0])
        for pt in sweep.points:
            direct = leader_fitness(
                PriceSchedule.flat(pt.price, sc.n_periods), sc, plans
            )
            assert pt.leader_profit == pytest.approx(direct, rel=1e-9, abs=1e-9)

    def test_empty_grid_rejected(self):
        sc = _single_plant_case()
        with pytest.raises(ValueError, match="empty"):
            fixed_price_sweep(sc, [_cavern_plan(sc)], [])

    def test_out_of_band_grid_rejected(self):
        sc = _single_plant_case()
        with pytest.raises(ValueError, match="band"):
            fixed_price_sweep(sc, [_cavern_plan(sc)], [9.5])


# ---------------------------------------------------------------------------
# genetic price search


class TestOptimizePrices:
    @pytest.fixture(scope="class")
    def small(self):
        sc = make_scenario(n_plants=2, tariff=[0.3, 0.9, 0.5])
        plans = [_cavern_plan(sc, 1), _cavern_plan(sc, 2)]
        return sc, plans

    @pytest.fixture(scope="class")
    def report(self, small):
        sc, plans = small
        return optimize_prices(sc, plans, GAConfig(population=8, generations=6, seed=3))

    def test_prices_stay_inside_band(self, small, report):
        sc, _ = small
        arr = report.best_prices.as_array()
        assert np.all(arr >= np.asarray(sc.cavern.price_floor) - 1e-9)
        assert np.all(arr <= np.asarray(sc.cavern.price_ceiling) + 1e-9)

    def test_fitness_history_is_best_so_far(self, report):
        hist = report.fitness_history
        assert len(hist) == 7  # initial population + one entry per generation
        assert all(b >= a - 1e-12 for a, b in zip(hist, hist[1:]))

    def test_report_accounting_identity(self, small, report):
        sc, _ = small
        arr = report.best_prices.as_array()
        delivered = sum(float(s.sum()) for s in report.transaction_series.values())
        outlay = sum(float(arr @ s) for s in report.transaction_series.values())
        assert report.leader_profit == pytest.approx(
            sc.cavern.retail_price * delivered - outlay, rel=1e-9, abs=1e-6
        )

    def test_injection_series_consistent_with_transactions(self, small, report):
        sc, plans = small
        want = np.zeros(sc.n_periods + 1)
        for plan in plans:
            travel = sc.travel(plan.plant_id, sc.cavern_index())
            shipped = report.transaction_series[plan.plant_id]
            want[travel : travel + sc.n_periods] += shipped
        assert report.injection_series == pytest.approx(want, abs=1e-9)
        assert np.all(report.injection_series <= sc.cavern.max_injection + 1e-6)

    def test_deterministic_for_fixed_seed(self, small):
        sc, plans = small
        cfg = GAConfig(population=6, generations=3, seed=11)
        a = optimize_prices(sc, plans, cfg)
        b = optimize_prices(sc, plans, cfg)
        assert a.best_prices == b.best_prices
        assert a.leader_profit == b.leader_profit
        assert a.fitness_history == b.fitness_history

    def test_beats_or_ties_flat_quotes(self, small, report):
        sc, plans = small
        sweep = fixed_price_sweep(sc, plans, [3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
        assert report.leader_profit >= sweep.best.leader_profit - 1e-6

    def test_stall_zero_stops_after_one_generation(self, small):
        sc, plans = small
        rep = optimize_prices(
            sc, plans, GAConfig(population=4, generations=40, seed=1), stall_generations=0
        )
        assert len(rep.fitness_history) == 2

    def test_degenerate_band_collapses_to_single_quote(self):
        sc = make_scenario(price_floor=5.0, price_ceiling=5.0)
        plans = [_cavern_plan(sc, 1), _cavern_plan(sc, 2)]
        rep = optimize_prices(sc, plans, GAConfig(population=4, generations=10, seed=0))
        assert rep.best_prices.prices == (5.0, 5.0, 5.0)
        assert len(rep.fitness_history) == 1
        direct = leader_fitness(PriceSchedule.flat(5.0, sc.n_periods), sc, plans)
        assert rep.leader_profit == pytest.approx(direct, rel=1e-9, abs=1e-9)

    def test_contains_coarse_schedule_grid_optimum(self):
        # every (p1, p2) pair on a coarse grid is a feasible schedule; the
        # search (which seeds band edges and flat quotes, then mutates) must
        # do at least as well as the best of them on a two-period case
        sc = _single_plant_case(n_periods=2, generation=[[60.0, 40.0]], tariff=[0.4, 1.0])
        plans = [_cavern_plan(sc)]
        grid_best = max(
            leader_fitness(np.array(pair), sc, plans)
            for pair in itertools.product([2.0, 3.5, 5.0, 6.5, 8.0], repeat=2)
        )
        rep = optimize_prices(
            sc, plans, GAConfig(population=10, generations=12, seed=2), final_gap=1e-6
        )
        assert rep.leader_profit >= grid_best - 1e-6

    def test_invalid_convention_rejected(self, small):
        sc, plans = small
        with pytest.raises(ValueError, match="arrival_convention"):
            optimize_prices(sc, plans, GAConfig(population=4, generations=1), arrival_convention="bad")


# ---------------------------------------------------------------------------
# shared-allowance coupling


class TestSharedAllowance:
    @pytest.fixture(scope="class")
    def binding(self):
        # two gas plants, 40 kg tubes, 45 kg/period intake: joint arrivals
        # must alternate, so the allowance couples the units
        sc = make_scenario(n_plants=2, max_injection=45.0)
        plans = [_cavern_plan(sc, 1), _cavern_plan(sc, 2)]
        return sc, plans

    def test_joint_solution_respects_cap(self, binding):
        sc, plans = binding
        prices = np.array([7.0, 7.5, 8.0])
        schedules, _ = follower_best_response(prices, plans, sc)
        cavern = sc.cavern_index()
        arrivals = np.zeros(sc.n_periods + 2)
        for plan in plans:
            travel = sc.travel(plan.plant_id, cavern)
            arrivals[travel : travel + sc.n_periods] += schedules[plan.plant_id].shipped
        assert np.all(arrivals <= sc.cavern.max_injection + 1e-6)

    def test_sequential_surrogate_is_feasible_lower_bound(self, binding):
        sc, plans = binding
        prices = np.array([7.0, 7.5, 8.0])
        seq_sched, seq_total, seq_notes = _solve_follower_models(
            plans, sc, prices, gap_tol=1e-6, max_nodes=100_000, accept_gap=True, cap_mode="sequential"
        )
        joint_sched, joint_total, _ = _solve_follower_models(
            plans, sc, prices, gap_tol=1e-6, max_nodes=100_000, accept_gap=True, cap_mode="joint"
        )
        assert any("sequential" in n for n in seq_notes)
        assert seq_total <= joint_total + 1e-6
        cavern = sc.cavern_index()
        arrivals = np.zeros(sc.n_periods + 2)
        for plan in plans:
            travel = sc.travel(plan.plant_id, cavern)
            arrivals[travel : travel + sc.n_periods] += seq_sched[plan.plant_id].shipped
        assert np.all(arrivals <= sc.cavern.max_injection + 1e-6)

    def test_equilibrium_report_respects_cap(self, binding):
        sc, plans = binding
        rep = optimize_prices(sc, plans, GAConfig(population=6, generations=4, seed=5))
        assert np.all(rep.injection_series <= sc.cavern.max_injection + 1e-6)


# ---------------------------------------------------------------------------
# sensitivity sweeps


class TestSensitivitySweep:
    def test_op_cost_totals_weakly_decreasing(self, tiny_case):
        points = sensitivity_sweep(tiny_case, "op_cost", [1.0, 6.0])
        assert len(points) == 2
        assert all(p.stable_structure is not None for p in points)
        assert points[0].structure_total >= points[1].structure_total - 1e-6

    def test_equipment_invest_mode_runs_planning(self, tiny_case):
        points = sensitivity_sweep(tiny_case, "equipment_invest:0", [20.0])
        assert points[0].structure_total is not None
        assert points[0].block_values

    def test_injection_cap_needs_plans(self, tiny_case):
        with pytest.raises(ValueError, match="plan"):
            sensitivity_sweep(tiny_case, "injection_cap", [100.0])

    def test_injection_cap_mode_reports_profits(self):
        sc = make_scenario(n_plants=2, max_injection=45.0)
        plans = [_cavern_plan(sc, 1), _cavern_plan(sc, 2)]
        points = sensitivity_sweep(
            sc,
            "injection_cap",
            [45.0, 500.0],
            plans=plans,
            config=GAConfig(population=4, generations=2, seed=0),
            stall_generations=1,
        )
        assert len(points) == 2
        assert all(p.leader_profit is not None for p in points)
        assert all(set(p.follower_profits) == {1, 2} for p in points)

    def test_unknown_parameter_rejected(self, tiny_case):
        with pytest.raises(ValueError, match="unknown sweep parameter"):
            sensitivity_sweep(tiny_case, "weather", [1.0])

    def test_bad_equipment_slot_rejected(self, tiny_case):
        with pytest.raises(ValueError, match="outside the catalog|outside catalog"):
            sensitivity_sweep(tiny_case, "equipment_invest:9", [10.0])
