"""Pivot-kernel backend timing: numba JIT versus the pure-numpy fallback.

The simplex pivot loop is the package's hot spot — every branch-and-bound
node re-solves an LP relaxation.  Both backends make bit-identical pivot
decisions; this script measures what the JIT actually buys on realistic
scheduling models.

Each backend runs in its own subprocess because the backend is chosen once
at import time from the H2CHAIN_PURE_NUMPY environment variable.

Usage:  python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _batch_spec(repeats: int) -> list[dict]:
    """The workload: the bundled day-ahead case solved at several price
    schedules, plus a planning relaxation."""
    return [
        {"kind": "schedule", "price": p, "repeats": repeats}
        for p in (5.0, 6.5, 8.0, 9.5, 11.0)
    ] + [{"kind": "planning", "price": 7.0, "repeats": repeats}]


def _worker(spec: list[dict]) -> dict:
    import numpy as np

    from h2chain.milp import ACTIVE_BACKEND, solve_milp
    from h2chain.plant import PlanDecision, build_schedule_model
    from h2chain.scenario import bundled_fixture, load_scenario

    scenario = load_scenario(bundled_fixture("paper_case.json"))
    plans = [
        PlanDecision(1, 0, 2, 5),
        PlanDecision(2, 2, scenario.cavern_index(), 5),
        PlanDecision(3, 2, scenario.cavern_index(), 5),
    ]

    def build(entry):
        prices = np.full(scenario.n_periods, entry["price"])
        return build_schedule_model(plans, scenario, prices, planning=entry["kind"] == "planning")

    # first solve includes JIT compilation on the numba backend
    t0 = time.perf_counter()
    solve_milp(build(spec[0]), gap_tol=1e-6, max_nodes=50_000)
    warmup = time.perf_counter() - t0

    t0 = time.perf_counter()
    objectives = []
    for entry in spec:
        prog = build(entry)
        for _ in range(entry["repeats"]):
            res = solve_milp(prog, gap_tol=1e-6, max_nodes=50_000)
            objectives.append(res.objective)
    batch = time.perf_counter() - t0
    return {"backend": ACTIVE_BACKEND, "warmup_s": warmup, "batch_s": batch, "objectives": objectives}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=2, help="solves per model (default 2)")
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    spec = _batch_spec(args.repeats)
    if args.worker:
        print(json.dumps(_worker(spec)))
        return 0

    results = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, H2CHAIN_PURE_NUMPY=flag)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker", "--repeats", str(args.repeats)],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        results[label] = json.loads(out.stdout.splitlines()[-1])
        r = results[label]
        print(f"{label:6s} backend={r['backend']:6s} warmup {r['warmup_s']:7.2f}s  batch {r['batch_s']:7.2f}s")

    if results["numba"]["objectives"] != results["numpy"]["objectives"]:
        print("WARNING: backends disagree on objectives — twin-kernel drift")
        return 1
    speedup = results["numpy"]["batch_s"] / results["numba"]["batch_s"]
    print(f"numba speedup over numpy: {speedup:.1f}x (identical objectives on all solves)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
