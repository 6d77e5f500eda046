"""Planning-game tests: structure enumeration, Shapley arithmetic against a
permutation oracle, stability verdicts, and exhaustive planning cross-checks."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from h2chain.coalition import (
    MAX_PLANTS,
    CoalitionStructure,
    Imputation,
    StructureValue,
    enumerate_structures,
    iterate_best_response,
    planning_price_default,
    shapley_allocate,
    solve_planning,
    stability_report,
)
from h2chain.milp import brute_force_oracle
from h2chain.plant import PlanDecision, build_schedule_model

from conftest import make_scenario


# ---------------------------------------------------------------------------
# enumeration


class TestEnumeration:
    def test_counts_small(self):
        assert len(enumerate_structures(1)) == 1
        assert len(enumerate_structures(2)) == 3  # singletons + one pair with 2 hub choices
        assert len(enumerate_structures(3)) == 10

    def test_count_matches_hub_weighted_partitions(self):
        # independent count: over all partitions, each block of size >= 2
        # contributes a factor of its size (hub choices)
        def partitions(items):
            if not items:
                yield []
                return
            first, rest = items[0], items[1:]
            for sub in partitions(rest):
                yield [[first]] + sub
                for k in range(len(sub)):
                    yield sub[:k] + [sub[k] + [first]] + sub[k + 1 :]

        for n in (2, 3, 4):
            want = 0
            for part in partitions(list(range(n))):
                w = 1
                for block in part:
                    if len(block) > 1:
                        w *= len(block)
                want += w
            assert len(enumerate_structures(n)) == want

    def test_all_singleton_leads(self):
        structures = enumerate_structures(3)
        assert structures[0].is_all_singletons()

    def test_guard_on_plant_count(self):
        with pytest.raises(ValueError):
            enumerate_structures(0)
        with pytest.raises(ValueError):
            enumerate_structures(MAX_PLANTS + 1)

    def test_labels_mark_hubs(self):
        labels = {s.label() for s in enumerate_structures(2)}
        assert labels == {"{1},{2}", "{1*,2}", "{1,2*}"}

    def test_structures_validate(self):
        with pytest.raises(ValueError):
            CoalitionStructure(((1, 2),), (None,)).validate(2)  # pair needs a hub
        with pytest.raises(ValueError):
            CoalitionStructure(((1,), (2,)), (1, None)).validate(2)  # singleton with hub
        with pytest.raises(ValueError):
            CoalitionStructure(((1,),), (None,)).validate(2)  # not a partition


# ---------------------------------------------------------------------------
# Shapley


def _perm_shapley(players, value_of):
    """Independent oracle: average marginal contribution over all join orders."""
    players = tuple(sorted(players))
    totals = {p: 0.0 for p in players}
    orders = list(itertools.permutations(players))
    for order in orders:
        seen = []
        for p in order:
            before = value_of(frozenset(seen))
            seen.append(p)
            totals[p] += value_of(frozenset(seen)) - before
    return {p: t / len(orders) for p, t in totals.items()}


class TestShapley:
    def test_two_player_paper_values(self):
        table = {
            frozenset(): 0.0,
            frozenset({1}): 54052.0,
            frozenset({2}): 81060.0,
            frozenset({1, 2}): 170589.0,
        }
        imp = shapley_allocate([1, 2], table.__getitem__)
        assert imp.players == (1, 2)
        assert imp.payoffs[0] == pytest.approx(71790.5, abs=1e-9)
        assert imp.payoffs[1] == pytest.approx(98798.5, abs=1e-9)

    def test_matches_permutation_oracle(self):
        rng = np.random.default_rng(13)
        for n in (2, 3, 4):
            players = tuple(range(1, n + 1))
            table = {frozenset(): 0.0}
            for r in range(1, n + 1):
                for combo in itertools.combinations(players, r):
                    base = sum(100.0 * p for p in combo)
                    table[frozenset(combo)] = base + float(np.round(rng.uniform(0, 50 * r), 3))
            value_of = table.__getitem__
            imp = shapley_allocate(players, value_of)
            want = _perm_shapley(players, value_of)
            for p, phi in zip(imp.players, imp.payoffs):
                assert phi == pytest.approx(want[p], abs=1e-9)

    def test_efficiency(self):
        value_of = lambda s: float(len(s)) ** 2
        imp = shapley_allocate([1, 2, 3], value_of)
        assert sum(imp.payoffs) == pytest.approx(9.0, abs=1e-12)

    def test_symmetry(self):
        value_of = lambda s: 10.0 * len(s)  # all players interchangeable
        imp = shapley_allocate([4, 7, 9], value_of)
        assert imp.payoffs[0] == pytest.approx(imp.payoffs[1], abs=1e-12)
        assert imp.payoffs[1] == pytest.approx(imp.payoffs[2], abs=1e-12)

    def test_dummy_player_gets_standalone_value(self):
        # player 3 always adds exactly 5 regardless of who joined before
        def value_of(s):
            return 20.0 * len(s - {3}) + (5.0 if 3 in s else 0.0)

        imp = shapley_allocate([1, 2, 3], value_of)
        assert imp.payoff_of(3) == pytest.approx(5.0, abs=1e-12)

    def test_additivity(self):
        rng = np.random.default_rng(5)
        players = (1, 2, 3)
        games = []
        for _ in range(2):
            table = {frozenset(): 0.0}
            for r in range(1, 4):
                for combo in itertools.combinations(players, r):
                    table[frozenset(combo)] = float(np.round(rng.uniform(0, 100), 3))
            games.append(table)
        joint = {k: games[0][k] + games[1][k] for k in games[0]}
        a = shapley_allocate(players, games[0].__getitem__)
        b = shapley_allocate(players, games[1].__getitem__)
        c = shapley_allocate(players, joint.__getitem__)
        for k in range(3):
            assert c.payoffs[k] == pytest.approx(a.payoffs[k] + b.payoffs[k], abs=1e-9)

    def test_runtime_fast(self):
        import time

        table = {
            frozenset(): 0.0,
            frozenset({1}): 54052.0,
            frozenset({2}): 81060.0,
            frozenset({1, 2}): 170589.0,
        }
        t0 = time.perf_counter()
        shapley_allocate([1, 2], table.__getitem__)
        assert time.perf_counter() - t0 < 1e-3


# ---------------------------------------------------------------------------
# stability on synthetic data


def _value(blocks, hubs, block_values, plant_count=3):
    structure = CoalitionStructure(tuple(tuple(b) for b in blocks), tuple(hubs))
    structure.validate(plant_count)
    return StructureValue(
        structure=structure,
        block_values=tuple(float(v) for v in block_values),
        total=float(sum(block_values)),
        plan=(),
        schedules=(),
    )


def _published_three_plant_values():
    """The reference three-plant planning outcome used for the logic checks:
    five structures, block incomes as published (54052 / 81060 / 236814;
    170589+236814; 286531+107868; 53562+323154; 383925)."""
    return [
        _value([(1,), (2,), (3,)], (None, None, None), [54052, 81060, 236814]),
        _value([(1, 2), (3,)], (2, None), [170589, 236814]),
        _value([(1, 3), (2,)], (3, None), [286531, 107868]),
        _value([(1,), (2, 3)], (None, 3), [53562, 323154]),
        _value([(1, 2, 3)], (3,), [383925]),
    ]


class TestStability:
    def test_reference_three_plant_verdicts(self):
        report = stability_report(_published_three_plant_values())
        v = report.verdicts
        # structure 3 (index 2) fails collective rationality: 286531 < 54052 + 236814
        assert not v[2].collectively_rational
        assert "286531.00 < standalone sum 290866.00" in v[2].cr_notes[0]
        # structures 4 and 5 (indexes 3, 4) are dominated by structure 2 (index 1)
        assert v[3].dominated_by == 1
        assert v[4].dominated_by == 1
        # structure 2 is the unique stable structure
        assert report.stable == (1,)
        assert v[1].stable and v[1].collectively_rational and v[1].dominated_by is None

    def test_reference_totals(self):
        values = _published_three_plant_values()
        assert [round(v.total) for v in values] == [371926, 407403, 394399, 376716, 383925]

    def test_singletons_required(self):
        with pytest.raises(ValueError, match="all-singleton"):
            stability_report([_value([(1, 2), (3,)], (2, None), [100, 50])])

    def test_domination_needs_credible_blocks(self):
        # alternative has a higher total but its new block is below standalone
        # sums, so it cannot dominate
        values = [
            _value([(1,), (2,)], (None, None), [100, 100], plant_count=2),
            _value([(1, 2)], (1,), [190], plant_count=2),
        ]
        report = stability_report(values)
        assert report.verdicts[0].dominated_by is None
        assert report.stable == (0,)

    def test_higher_total_credible_block_dominates(self):
        values = [
            _value([(1,), (2,)], (None, None), [100, 100], plant_count=2),
            _value([(1, 2)], (1,), [230], plant_count=2),
        ]
        report = stability_report(values)
        assert report.verdicts[0].dominated_by == 1
        assert report.stable == (1,)

    def test_runtime_fast(self):
        import time

        values = _published_three_plant_values()
        t0 = time.perf_counter()
        stability_report(values)
        assert time.perf_counter() - t0 < 1e-3


# ---------------------------------------------------------------------------
# planning solves against exhaustive enumeration


def _exhaustive_structure_value(structure, scenario, prices):
    """Independent oracle: enumerate every equipment/fleet combination per
    routing unit and solve each fixed-plan model with the lattice oracle."""
    cavern = scenario.cavern_index()
    cat = scenario.catalog
    n_types = cat.n_compressor_types + cat.n_liquefier_types
    total = 0.0
    for k, block in enumerate(structure.blocks):
        best = -np.inf
        for equipment in itertools.product(range(n_types), repeat=len(block)):
            skeleton = structure.block_plans(k, equipment, cavern)
            ranges = []
            for p in skeleton:
                gen = float(np.sum(scenario.plant(p.plant_id).generation))
                travel = scenario.travel(p.plant_id, p.route)
                cap = (
                    scenario.transport.tube_capacity
                    if cat.is_compressor(p.equipment_index)
                    else scenario.transport.tanker_capacity
                )
                # enough vehicles to haul everything plus a full round trip
                hi = int(math.ceil(gen / cap)) + 2 * travel + 2
                ranges.append(range(0, hi + 1))
            for fleets in itertools.product(*ranges):
                plans = [
                    PlanDecision(p.plant_id, p.equipment_index, p.route, f)
                    for p, f in zip(skeleton, fleets)
                ]
                prog = build_schedule_model(plans, scenario, prices)
                res = brute_force_oracle(prog, max_points=200_000)
                if res.status == "optimal":
                    best = max(best, res.objective)
        total += best
    return total


class TestPlanning:
    @pytest.fixture(scope="class")
    def micro(self):
        # one period, coarse loads: small enough for full enumeration
        return make_scenario(
            n_plants=2,
            n_periods=2,
            generation=[[60.0, 0.0], [80.0, 0.0]],
            travel_to_cavern=[1, 1],
            capacities=(70.0, 90.0),
            max_injection=200.0,
        )

    def test_matches_exhaustive_enumeration(self, micro):
        prices = planning_price_default(micro)
        for structure in enumerate_structures(2):
            mine = solve_planning(structure, micro, gap_tol=1e-9, max_nodes=50_000)
            want = _exhaustive_structure_value(structure, micro, prices)
            assert mine.total == pytest.approx(want, rel=1e-6, abs=1e-6), structure.label()

    def test_tiny_case_regressions(self, tiny_case):
        totals = {}
        for structure in enumerate_structures(2):
            sv = solve_planning(structure, tiny_case, gap_tol=1e-6, max_nodes=20_000)
            totals[structure.label()] = sv.total
        assert totals["{1},{2}"] == pytest.approx(1409.28, abs=0.01)
        assert totals["{1*,2}"] == pytest.approx(793.80, abs=0.01)
        assert totals["{1,2*}"] == pytest.approx(833.08, abs=0.01)

    def test_tiny_case_stability(self, tiny_case):
        values = [
            solve_planning(s, tiny_case, gap_tol=1e-6, max_nodes=20_000) for s in enumerate_structures(2)
        ]
        report = stability_report(values)
        labels = [v.structure.label() for v in values]
        assert report.stable == (labels.index("{1},{2}"),)

    def test_plan_covers_every_plant_in_order(self, tiny_case):
        sv = solve_planning(enumerate_structures(2)[0], tiny_case, gap_tol=1e-6, max_nodes=20_000)
        assert [p.plant_id for p in sv.plan] == [1, 2]
        assert len(sv.schedules) == 2


class TestBestResponse:
    def test_converges_to_joint_optimum_on_tiny(self, tiny_case):
        structure = enumerate_structures(2)[0]  # singletons: two independent units
        joint = solve_planning(structure, tiny_case, gap_tol=1e-9, max_nodes=50_000)
        rng = np.random.default_rng(11)
        for _ in range(3):
            total, rounds, plans = iterate_best_response(
                structure, tiny_case, rng=rng, gap_tol=1e-9, max_nodes=50_000
            )
            assert total == pytest.approx(joint.total, rel=1e-6, abs=1e-6)
            assert rounds >= 1
            assert {p.plant_id for p in plans} == {1, 2}

    def test_improvement_is_monotone(self, tiny_case):
        # starting from the default zero-index equipment profile must reach
        # at least the standalone optimum of that restricted start
        structure = enumerate_structures(2)[0]
        total, _, _ = iterate_best_response(structure, tiny_case, gap_tol=1e-9, max_nodes=50_000)
        joint = solve_planning(structure, tiny_case, gap_tol=1e-9, max_nodes=50_000)
        assert total <= joint.total + 1e-6
