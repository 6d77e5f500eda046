"""Command-line entry point: scenario load -> plan -> schedule -> sweep -> report.

Subcommands
-----------
validate     check a scenario file and print a parameter summary
plan         enumerate coalition structures, solve the planning game, write
             the structure table, Shapley imputations and a plan artifact
schedule     run the pricing game with the planned (or supplied) fleet and
             equipment decisions; optional flat-price and sensitivity studies
sweep        run only a sensitivity study
report       re-export tables from a saved study bundle
oracle-check solve randomized tiny scheduling models with both the
             branch-and-bound solver and the lattice oracle, compare

Exit codes: 0 success, 2 usage error, 3 validation error, 4 solver failure.

Every run writes its outputs into ``--out`` plus a ``run_manifest.json``
recording the subcommand, scenario hash, seed, overrides, tool version,
wall time and output paths. The manifest is written atomically and is the
one file allowed to differ between reruns (it carries wall time); all other
outputs are byte-identical for identical (scenario hash, seed, config).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

_PROGRESS_PREFIX = "[h2chain]"

USAGE_ERROR = 2
VALIDATION_ERROR = 3
SOLVER_ERROR = 4


def _progress(stage: str, **fields) -> None:
    parts = " ".join(f"{k}={v}" for k, v in fields.items())
    print(f"{_PROGRESS_PREFIX} {stage}" + (f" {parts}" if parts else ""), file=sys.stderr, flush=True)


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _resolve_scenario_path(name: str) -> Path:
    """A bare name falls back to the bundled fixtures (``.json`` appended)."""
    p = Path(name)
    if p.exists():
        return p
    from .scenario import bundled_fixture

    candidate = name if name.endswith(".json") else name + ".json"
    try:
        bundled = Path(bundled_fixture(candidate))
    except (FileNotFoundError, ValueError):
        raise FileNotFoundError(f"scenario file not found: {name}")
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"scenario file not found: {name}")


def _parse_value_list(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise _Usage(f"expected a comma-separated number list, got {text!r}")
    if not values:
        raise _Usage(f"expected at least one value in {text!r}")
    return values


_SWEEP_ALIASES = {
    "qtrans": "injection_cap",
    "injection_cap": "injection_cap",
    "k3": "op_cost",
    "op_cost": "op_cost",
}


def _parse_sensitivity(text: str) -> tuple[str, list[float]]:
    name, sep, rest = text.partition("=")
    if not sep:
        raise _Usage(f"--sensitivity expects NAME=V1,V2,..., got {text!r}")
    key = name.strip()
    parameter = _SWEEP_ALIASES.get(key.lower())
    if parameter is None:
        if key.startswith("equipment_invest:"):
            parameter = key
        else:
            raise _Usage(
                f"unknown sensitivity axis {key!r}; use K3, Qtrans or equipment_invest:<k>"
            )
    return parameter, _parse_value_list(rest)


class _Usage(Exception):
    """Bad flag content discovered after argparse (exit 2)."""


# ---------------------------------------------------------------------------
# plan artifact


def _plan_file_dict(value, scenario) -> dict:
    from .report import _plan_dict

    return {
        "scenario_fingerprint": scenario.fingerprint(),
        "structure": {
            "blocks": [list(b) for b in value.structure.blocks],
            "hub_of": list(value.structure.hub_of),
            "label": value.structure.label(),
        },
        "total": value.total,
        "block_values": list(value.block_values),
        "notes": list(value.notes),
        "plans": [_plan_dict(p) for p in value.plan],
    }


def _load_plan_file(path: Path, scenario):
    from .report import _plan_from
    from .scenario import ValidationError

    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError("plan-file", f"not valid JSON: {exc}") from exc
    if raw.get("scenario_fingerprint") != scenario.fingerprint():
        raise ValidationError(
            "plan-file",
            "plan was produced for a different scenario "
            f"(fingerprint {raw.get('scenario_fingerprint', '?')[:12]}... vs {scenario.fingerprint()[:12]}...)",
        )
    return [_plan_from(d) for d in raw["plans"]]


def _run_planning(scenario, *, gap_tol: float, max_nodes: int):
    from .coalition import enumerate_structures, solve_planning, stability_report
    from .report import PlanningStudy

    structures = enumerate_structures(scenario.n_plants)
    solved = []
    for s in structures:
        t0 = time.time()
        v = solve_planning(s, scenario, gap_tol=gap_tol, max_nodes=max_nodes)
        solved.append(v)
        _progress(
            "plan.structure",
            label=s.label(),
            total=f"{v.total:.2f}",
            seconds=f"{time.time() - t0:.1f}",
        )
    stability = stability_report(solved)
    study = PlanningStudy(values=tuple(solved), stability=stability)
    if stability.stable:
        pick = stability.stable[0]
        _progress("plan.stable", label=solved[pick].structure.label())
    else:
        pick = max(range(len(solved)), key=lambda i: solved[i].total)
        _progress("plan.no-stable", fallback=solved[pick].structure.label())
    return study, solved[pick]


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_validate(args) -> int:
    from .scenario import load_scenario

    scenario = load_scenario(_resolve_scenario_path(args.scenario))
    cat = scenario.catalog
    print(f"scenario: {args.scenario}")
    print(f"fingerprint: {scenario.fingerprint()}")
    print(f"plants: {scenario.n_plants}, periods: {scenario.n_periods}")
    for p in scenario.plants:
        print(f"  plant {p.id}: {sum(p.generation):.1f} kg/day generated")
    print(
        f"equipment catalog: {cat.n_compressor_types} compressor and "
        f"{cat.n_liquefier_types} liquefier classes, "
        f"capacities {[round(c, 1) for c in cat.capacities]} kg/h"
    )
    print(
        f"cavern: allowance {scenario.cavern.max_injection:.0f} kg/period, "
        f"resale {scenario.cavern.retail_price:.2f} $/kg, "
        f"price band [{min(scenario.cavern.price_floor):.2f}, {max(scenario.cavern.price_ceiling):.2f}] $/kg"
    )
    print(
        f"transport: tube {scenario.transport.tube_capacity:.0f} kg, "
        f"tanker {scenario.transport.tanker_capacity:.0f} kg, "
        f"op cost {scenario.transport.op_cost_per_period:.2f} $/vehicle/period"
    )
    print("valid")
    return 0


def _cmd_plan(args) -> int:
    from .report import PlanningStudy, StudyBundle, export_tables, save_bundle

    t0 = time.time()
    from .scenario import load_scenario

    path = _resolve_scenario_path(args.scenario)
    scenario = load_scenario(path)
    study, best = _run_planning(scenario, gap_tol=args.planning_gap, max_nodes=args.planning_nodes)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = StudyBundle(scenario_fingerprint=scenario.fingerprint(), planning=study)
    save_bundle(bundle, out / "bundle.json")
    manifest = export_tables(bundle, out)
    _write_atomic(out / "plan.json", json.dumps(_plan_file_dict(best, scenario), indent=2, sort_keys=True) + "\n")

    outputs = sorted(["bundle.json", "plan.json"] + list(manifest["files"]) + ["manifest.json"])
    _finish_manifest(args, scenario, path, out, outputs, t0)
    for v in study.values:
        star = " *stable*" if study.stability.verdicts[study.values.index(v)].stable else ""
        print(f"{v.structure.label():18s} total {v.total:12.2f}{star}")
    print(f"wrote {out}/plan.json and tables ({len(outputs)} files)")
    return 0


def _plans_for_scheduling(args, scenario):
    if args.plan:
        return _load_plan_file(Path(args.plan), scenario), None
    study, best = _run_planning(scenario, gap_tol=args.planning_gap, max_nodes=args.planning_nodes)
    return list(best.plan), study


def _ga_config(args):
    from .stackelberg import GAConfig

    base = GAConfig()
    return GAConfig(
        population=args.ga_pop if args.ga_pop is not None else base.population,
        generations=args.ga_gens if args.ga_gens is not None else base.generations,
        crossover_rate=base.crossover_rate,
        mutation_rate=base.mutation_rate,
        mutation_scale=base.mutation_scale,
        elitism=base.elitism,
        seed=args.seed,
    )


def _cmd_schedule(args) -> int:
    from .report import StudyBundle, export_tables, save_bundle
    from .scenario import load_scenario
    from .stackelberg import fixed_price_sweep, optimize_prices, sensitivity_sweep

    t0 = time.time()
    path = _resolve_scenario_path(args.scenario)
    scenario = load_scenario(path)
    plans, study = _plans_for_scheduling(args, scenario)
    _progress("schedule.plans", plants=len(plans))

    config = _ga_config(args)
    report = optimize_prices(
        scenario,
        plans,
        config,
        arrival_convention=args.arrival_convention,
        stall_generations=args.stall_generations,
    )
    _progress(
        "schedule.equilibrium",
        leader=f"{report.leader_profit:.2f}",
        generations=len(report.fitness_history) - 1,
    )

    flat = None
    if args.flat_sweep:
        flat = fixed_price_sweep(
            scenario, plans, _parse_value_list(args.flat_sweep), arrival_convention=args.arrival_convention
        )
        _progress("schedule.flat-sweep", best=f"{flat.best.price:g}", profit=f"{flat.best.leader_profit:.2f}")

    sensitivity = None
    if args.sensitivity:
        parameter, values = _parse_sensitivity(args.sensitivity)
        sensitivity = sensitivity_sweep(
            scenario,
            parameter,
            values,
            plans=plans,
            config=config,
            arrival_convention=args.arrival_convention,
            stall_generations=args.stall_generations,
        )
        _progress("schedule.sensitivity", parameter=parameter, points=len(sensitivity))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = StudyBundle(
        scenario_fingerprint=scenario.fingerprint(),
        planning=study,
        equilibrium=report,
        flat_sweep=flat,
        sensitivity=sensitivity,
    )
    save_bundle(bundle, out / "bundle.json")
    manifest = export_tables(bundle, out)
    outputs = sorted(["bundle.json"] + list(manifest["files"]) + ["manifest.json"])
    _finish_manifest(args, scenario, path, out, outputs, t0)

    print(f"leader profit {report.leader_profit:.2f} $/day")
    for pid in sorted(report.follower_profits):
        print(f"  plant {pid} profit {report.follower_profits[pid]:.2f} $/day")
    for note in report.notes:
        print(f"  note: {note}")
    print(f"wrote {out}/bundle.json and tables ({len(outputs)} files)")
    return 0


def _cmd_sweep(args) -> int:
    from .report import StudyBundle, export_tables, save_bundle
    from .scenario import load_scenario
    from .stackelberg import sensitivity_sweep

    t0 = time.time()
    if not args.sensitivity:
        raise _Usage("sweep requires --sensitivity NAME=V1,V2,...")
    parameter, values = _parse_sensitivity(args.sensitivity)
    path = _resolve_scenario_path(args.scenario)
    scenario = load_scenario(path)

    plans = None
    study = None
    kwargs: dict = {
        "planning_gap": args.planning_gap,
        "planning_nodes": args.planning_nodes,
    }
    if parameter == "injection_cap":
        plans, study = _plans_for_scheduling(args, scenario)
        kwargs.update(
            plans=plans,
            config=_ga_config(args),
            arrival_convention=args.arrival_convention,
            stall_generations=args.stall_generations,
        )
    points = sensitivity_sweep(scenario, parameter, values, **kwargs)
    _progress("sweep.done", parameter=parameter, points=len(points))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = StudyBundle(
        scenario_fingerprint=scenario.fingerprint(), planning=study, sensitivity=points
    )
    save_bundle(bundle, out / "bundle.json")
    manifest = export_tables(bundle, out)
    outputs = sorted(["bundle.json"] + list(manifest["files"]) + ["manifest.json"])
    _finish_manifest(args, scenario, path, out, outputs, t0)

    for p in points:
        if p.leader_profit is not None:
            print(f"{parameter} = {p.value:g}: leader profit {p.leader_profit:.2f}")
        else:
            print(f"{parameter} = {p.value:g}: stable {p.stable_structure}, total {p.structure_total:.2f}")
    print(f"wrote {out}/bundle.json and tables ({len(outputs)} files)")
    return 0


def _cmd_report(args) -> int:
    from .report import export_tables, load_bundle

    t0 = time.time()
    bundle_path = Path(args.bundle)
    if not bundle_path.exists():
        raise FileNotFoundError(f"bundle file not found: {args.bundle}")
    bundle = load_bundle(bundle_path)
    tables = [t.strip() for t in args.tables.split(",")] if args.tables else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = export_tables(bundle, out, tables=tables)
    outputs = sorted(list(manifest["files"]) + ["manifest.json"])

    run_manifest = {
        "subcommand": "report",
        "bundle_path": str(bundle_path),
        "scenario_fingerprint": bundle.scenario_fingerprint,
        "overrides": {"tables": tables},
        "seed": None,
        "tool_version": _tool_version(),
        "wall_time_seconds": round(time.time() - t0, 3),
        "outputs": outputs,
    }
    _write_atomic(out / "run_manifest.json", json.dumps(run_manifest, indent=2, sort_keys=True) + "\n")
    print(f"exported {len(manifest['files'])} tables to {out}")
    return 0


def _cmd_oracle_check(args) -> int:
    import numpy as np

    from .milp import brute_force_oracle, solve_milp

    rng = np.random.default_rng(args.seed)
    failures = 0
    t0 = time.time()
    for trial in range(args.trials):
        prog, label = _random_follower_case(rng)
        expected = brute_force_oracle(prog)
        got = solve_milp(prog, gap_tol=1e-9, max_nodes=200_000)
        if expected.status in ("infeasible", "unbounded"):
            ok = got.status == expected.status
        else:
            ok = (
                got.status == "optimal"
                and abs(got.objective - expected.objective) <= 1e-6 * (1.0 + abs(expected.objective))
            )
        tag = "ok" if ok else "MISMATCH"
        _progress("oracle", trial=trial, case=label, result=tag)
        if not ok:
            failures += 1
            print(
                f"MISMATCH on trial {trial} ({label}): solver {got.status} {got.objective!r} "
                f"vs oracle {expected.status} {expected.objective!r}"
            )
    elapsed = time.time() - t0
    print(f"oracle-check: {args.trials - failures}/{args.trials} matched in {elapsed:.1f}s")
    if failures:
        return SOLVER_ERROR
    return 0


def _random_follower_case(rng):
    """A random tiny scheduling model: 1-2 plants, 2-3 periods, an integer
    lattice small enough for the brute-force oracle (well under 1e5 points)."""
    import numpy as np

    from .plant import PlanDecision, build_schedule_model
    from .scenario import from_dict

    n_plants = int(rng.integers(1, 3))
    n_periods = int(rng.integers(2, 4))
    plants = [
        {
            "id": i,
            "generation": [float(g) for g in np.round(rng.uniform(50.0, 600.0, n_periods), 1)],
            "tank_bound_by_equipment": bool(rng.integers(0, 2)),
        }
        for i in range(1, n_plants + 1)
    ]
    travel = [[0] * n_plants + [int(rng.integers(0, 2))] for _ in range(n_plants)]
    raw = {
        "schema_version": 1,
        "horizon": {"n_periods": n_periods, "period_hours": 2.0},
        "plants": plants,
        "catalog": {
            "capacities": [200.0, 600.0],
            "invest_daily": [40.0, 90.0],
            "n_compressor_types": 1,
            "n_liquefier_types": 1,
            "energy_per_kg_compress": 1.0,
            "energy_per_kg_liquefy": 8.18,
        },
        "transport": {
            "tube_capacity": 200.0,
            "tanker_capacity": 500.0,
            "tube_invest_daily": 8.0,
            "tanker_invest_daily": 20.0,
            "op_cost_per_period": float(rng.integers(5, 60)),
            "travel_periods": travel,
            "loading_retention": 0.99,
            "transit_retention_base": 0.995,
        },
        "cavern": {
            "retail_price": 15.0,
            "price_floor": [3.0] * n_periods,
            "price_ceiling": [9.0] * n_periods,
            "max_injection": float(rng.integers(300, 1500)),
        },
        "tariff": {"electricity_price": [float(round(v, 2)) for v in rng.uniform(0.3, 1.5, n_periods)]},
    }
    scenario = from_dict(raw)
    plans = [
        PlanDecision(
            plant_id=i,
            equipment_index=int(rng.integers(0, 2)),
            route=scenario.cavern_index(),
            fleet_size=int(rng.integers(1, 4)),
        )
        for i in range(1, n_plants + 1)
    ]
    prices = np.round(rng.uniform(3.0, 9.0, n_periods), 2)
    prog = build_schedule_model(plans, scenario, prices, planning=False)
    label = f"I={n_plants},T={n_periods}"
    return prog, label


def _tool_version() -> str:
    from . import __version__

    return __version__


def _finish_manifest(args, scenario, scenario_path: Path, out: Path, outputs: list[str], t0: float) -> None:
    overrides = {
        key: getattr(args, key)
        for key in (
            "seed",
            "threads",
            "ga_pop",
            "ga_gens",
            "flat_sweep",
            "sensitivity",
            "arrival_convention",
            "stall_generations",
            "planning_gap",
            "planning_nodes",
            "plan",
        )
        if hasattr(args, key) and getattr(args, key) is not None
    }
    run_manifest = {
        "subcommand": args.subcommand,
        "scenario_path": str(scenario_path),
        "scenario_fingerprint": scenario.fingerprint(),
        "overrides": overrides,
        "seed": getattr(args, "seed", None),
        "tool_version": _tool_version(),
        "wall_time_seconds": round(time.time() - t0, 3),
        "outputs": outputs,
    }
    _write_atomic(out / "run_manifest.json", json.dumps(run_manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="h2chain",
        description="Two-stage hydrogen supply-chain game: cooperative planning plus leader-follower pricing.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, scenario_arg=True):
        if scenario_arg:
            p.add_argument("scenario", help="scenario file path, or the name of a bundled fixture")
        p.add_argument("--out", default="h2chain_out", help="output directory (default: h2chain_out)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
        p.add_argument("--threads", type=int, default=None, help="cap numeric-kernel threads")

    def planning_flags(p):
        p.add_argument("--planning-gap", type=float, default=1e-4, help="planning certificate gap")
        p.add_argument("--planning-nodes", type=int, default=4_000, help="planning node budget per solve")

    def ga_flags(p):
        p.add_argument("--plan", default=None, help="plan artifact from a previous `plan` run")
        p.add_argument("--ga-pop", type=int, default=None, help="GA population size")
        p.add_argument("--ga-gens", type=int, default=None, help="GA generation budget")
        p.add_argument(
            "--stall-generations",
            type=int,
            default=None,
            help="stop the GA after this many generations without improvement",
        )
        p.add_argument(
            "--arrival-convention",
            choices=["departure", "strict"],
            default="departure",
            help="how deliveries landing after the horizon are credited",
        )

    p = sub.add_parser("validate", help="check a scenario file and print a summary")
    p.add_argument("scenario")

    p = sub.add_parser("plan", help="solve the cooperative planning game")
    common(p)
    planning_flags(p)

    p = sub.add_parser("schedule", help="solve the pricing game")
    common(p)
    planning_flags(p)
    ga_flags(p)
    p.add_argument("--flat-sweep", default=None, help="comma-separated flat prices to benchmark")
    p.add_argument("--sensitivity", default=None, help="NAME=V1,V2,... (K3, Qtrans or equipment_invest:<k>)")

    p = sub.add_parser("sweep", help="run a sensitivity study")
    common(p)
    planning_flags(p)
    ga_flags(p)
    p.add_argument("--sensitivity", required=False, default=None, help="NAME=V1,V2,... (K3, Qtrans or equipment_invest:<k>)")

    p = sub.add_parser("report", help="re-export tables from a saved bundle")
    p.add_argument("bundle", help="path to a bundle.json from a previous run")
    p.add_argument("--out", default="h2chain_out", help="output directory")
    p.add_argument("--tables", default=None, help="comma-separated table subset")

    p = sub.add_parser("oracle-check", help="compare the solver against the lattice oracle")
    p.add_argument("--trials", type=int, default=50, help="number of random tiny models")
    p.add_argument("--seed", type=int, default=0, help="random seed")

    return parser


_HANDLERS = {
    "validate": _cmd_validate,
    "plan": _cmd_plan,
    "schedule": _cmd_schedule,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
    "oracle-check": _cmd_oracle_check,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    threads = getattr(args, "threads", None)
    if threads is not None:
        if threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return USAGE_ERROR
        os.environ["NUMBA_NUM_THREADS"] = str(threads)
        os.environ["OMP_NUM_THREADS"] = str(threads)

    from .milp.model import SolverError
    from .plant import ModelBuildError
    from .scenario import ValidationError

    try:
        return _HANDLERS[args.subcommand](args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ValidationError, ModelBuildError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return VALIDATION_ERROR
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return VALIDATION_ERROR
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return SOLVER_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
