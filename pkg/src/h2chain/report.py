"""Tabulation and export of study results.

Collects the outputs of the planning game, the pricing equilibrium, and any
parameter sweeps into one immutable bundle, serializes it losslessly to
JSON, and renders deterministic CSV tables. Money and mass columns appear
twice: a fixed two-decimal display column and a full-precision companion
(shortest round-tripping float repr), so downstream checks never inherit
rounding drift. An export manifest lists every written file with its
SHA-256 content hash; exporting the same bundle twice yields identical
hashes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .coalition import (
    CoalitionStructure,
    Imputation,
    StabilityReport,
    StructureValue,
    StructureVerdict,
    shapley_allocate,
)
from .plant import PlanDecision, Schedule
from .stackelberg import (
    EquilibriumReport,
    FlatPricePoint,
    FlatSweep,
    PriceSchedule,
    SensitivityPoint,
)

__all__ = [
    "MissingSectionError",
    "PlanningStudy",
    "StudyBundle",
    "subset_value_table",
    "stable_structure_imputations",
    "export_tables",
    "bundle_to_dict",
    "bundle_from_dict",
    "save_bundle",
    "load_bundle",
]

SECTIONS = ("planning", "equilibrium", "flat_sweep", "sensitivity")


class MissingSectionError(ValueError):
    """A requested table's study section is absent from the bundle."""


@dataclass(frozen=True)
class PlanningStudy:
    values: tuple[StructureValue, ...]
    stability: StabilityReport


@dataclass(frozen=True)
class StudyBundle:
    scenario_fingerprint: str
    planning: PlanningStudy | None = None
    equilibrium: EquilibriumReport | None = None
    flat_sweep: FlatSweep | None = None
    sensitivity: Mapping[str, tuple[SensitivityPoint, ...]] | None = None


def subset_value_table(values: Iterable[StructureValue]) -> dict[frozenset[int], float]:
    """Characteristic values of plant subsets, read off the solved
    structures: a subset's value is its best block value (over hub choices)
    among structures where everyone else stands alone, so the shared
    injection allowance is diluted the same way in every entry."""
    table: dict[frozenset[int], float] = {frozenset(): 0.0}
    for sv in values:
        for block, value in zip(sv.structure.blocks, sv.block_values):
            others = [b for b in sv.structure.blocks if b != block]
            if any(len(b) > 1 for b in others):
                continue
            key = frozenset(block)
            if key not in table or value > table[key]:
                table[key] = value
    return table


def stable_structure_imputations(study: PlanningStudy) -> dict[int, tuple[Imputation, ...]]:
    """Shapley splits for every multi-plant block of every structure,
    using the subset-value table from the same study."""
    table = subset_value_table(study.values)
    out: dict[int, tuple[Imputation, ...]] = {}
    for index, sv in enumerate(study.values):
        imps = []
        for block, value in zip(sv.structure.blocks, sv.block_values):
            if len(block) < 2:
                continue
            local = dict(table)
            local[frozenset(block)] = value  # the block's value in THIS structure

            def value_of(coalition: frozenset[int], _local=local) -> float:
                if not coalition:
                    return 0.0
                try:
                    return _local[coalition]
                except KeyError:
                    raise KeyError(
                        f"no solved structure isolates coalition {sorted(coalition)}"
                    ) from None

            imps.append(shapley_allocate(block, value_of))
        if imps:
            out[index] = tuple(imps)
    return out


# ---------------------------------------------------------------------------
# CSV rendering


def _money(v: float) -> tuple[str, str]:
    return f"{float(v):.2f}", repr(float(v))


def _csv(rows: list[list[str]]) -> str:
    return "\n".join(",".join(cell for cell in row) for row in rows) + "\n"


def _quote(text: str) -> str:
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def _structures_csv(study: PlanningStudy) -> str:
    rows = [[
        "structure", "block", "hub", "block_value", "block_value_full",
        "structure_total", "structure_total_full",
        "collectively_rational", "dominated_by", "stable", "notes",
    ]]
    for sv, verdict in zip(study.values, study.stability.verdicts):
        total2, totalf = _money(sv.total)
        for block, hub, value in zip(sv.structure.blocks, sv.structure.hub_of, sv.block_values):
            v2, vf = _money(value)
            rows.append([
                _quote(sv.structure.label()),
                _quote("{" + ",".join(str(p) for p in block) + "}"),
                "" if hub is None else str(hub),
                v2, vf, total2, totalf,
                str(verdict.collectively_rational),
                "" if verdict.dominated_by is None else str(verdict.dominated_by),
                str(verdict.stable),
                _quote("; ".join(sv.notes)),
            ])
    return _csv(rows)


def _imputations_csv(imputations: Mapping[int, tuple[Imputation, ...]], study: PlanningStudy) -> str:
    rows = [["structure", "plant", "payoff", "payoff_full", "method"]]
    for index in sorted(imputations):
        label = study.values[index].structure.label()
        for imp in imputations[index]:
            for plant, payoff in zip(imp.players, imp.payoffs):
                p2, pf = _money(payoff)
                rows.append([_quote(label), str(plant), p2, pf, imp.method])
    return _csv(rows)


def _prices_csv(report: EquilibriumReport) -> str:
    rows = [["period", "buying_price", "buying_price_full"]]
    for t, price in enumerate(report.best_prices.prices, start=1):
        p2, pf = _money(price)
        rows.append([str(t), p2, pf])
    return _csv(rows)


def _profits_csv(report: EquilibriumReport) -> str:
    rows = [["actor", "profit", "profit_full"]]
    p2, pf = _money(report.leader_profit)
    rows.append(["retailer", p2, pf])
    for plant in sorted(report.follower_profits):
        p2, pf = _money(report.follower_profits[plant])
        rows.append([f"plant {plant}", p2, pf])
    return _csv(rows)


def _transactions_csv(report: EquilibriumReport) -> str:
    trans_ids = sorted(report.transaction_series)
    disc_ids = sorted(report.discarded_series)
    header = ["period"]
    for i in trans_ids:
        header += [f"transacted_plant_{i}", f"transacted_plant_{i}_full"]
    for i in disc_ids:
        header += [f"discarded_plant_{i}", f"discarded_plant_{i}_full"]
    rows = [header]
    n = max([len(report.transaction_series[i]) for i in trans_ids]
            + [len(report.discarded_series[i]) for i in disc_ids], default=0)
    for t in range(n):
        row = [str(t + 1)]
        for i in trans_ids:
            row += list(_money(report.transaction_series[i][t]))
        for i in disc_ids:
            row += list(_money(report.discarded_series[i][t]))
        rows.append(row)
    return _csv(rows)


def _injections_csv(report: EquilibriumReport) -> str:
    rows = [["arrival_period", "mass", "mass_full"]]
    for t, mass in enumerate(report.injection_series, start=1):
        m2, mf = _money(mass)
        rows.append([str(t), m2, mf])
    return _csv(rows)


def _fitness_csv(report: EquilibriumReport) -> str:
    rows = [["generation", "best_leader_profit", "best_leader_profit_full"]]
    for g, fit in enumerate(report.fitness_history):
        f2, ff = _money(fit)
        rows.append([str(g), f2, ff])
    return _csv(rows)


def _flat_sweep_csv(sweep: FlatSweep) -> str:
    rows = [["price", "price_full", "leader_profit", "leader_profit_full",
             "total_volume", "total_volume_full", "is_best"]]
    for k, point in enumerate(sweep.points):
        p2, pf = _money(point.price)
        l2, lf = _money(point.leader_profit)
        v2, vf = _money(point.total_volume)
        rows.append([p2, pf, l2, lf, v2, vf, str(k == sweep.best_index)])
    return _csv(rows)


def _sensitivity_csv(points: tuple[SensitivityPoint, ...]) -> str:
    planning_mode = any(p.stable_structure is not None for p in points)
    if planning_mode:
        rows = [["value", "value_full", "stable_structure",
                 "structure_total", "structure_total_full", "block_values_full", "notes"]]
        for p in points:
            v2, vf = _money(p.value)
            t2, tf = ("", "") if p.structure_total is None else _money(p.structure_total)
            blocks = "" if p.block_values is None else ";".join(repr(float(b)) for b in p.block_values)
            rows.append([v2, vf, _quote(p.stable_structure or ""), t2, tf, _quote(blocks),
                         _quote("; ".join(p.notes))])
        return _csv(rows)
    plant_ids = sorted({i for p in points for i in (p.follower_profits or {})})
    header = ["value", "value_full", "leader_profit", "leader_profit_full"]
    for i in plant_ids:
        header += [f"profit_plant_{i}", f"profit_plant_{i}_full"]
    header.append("notes")
    rows = [header]
    for p in points:
        row = list(_money(p.value))
        row += ["", ""] if p.leader_profit is None else list(_money(p.leader_profit))
        for i in plant_ids:
            have = p.follower_profits or {}
            row += list(_money(have[i])) if i in have else ["", ""]
        row.append(_quote("; ".join(p.notes)))
        rows.append(row)
    return _csv(rows)


def _require(bundle: StudyBundle, section: str, table: str):
    part = getattr(bundle, section)
    if part is None or (section == "sensitivity" and not part):
        raise MissingSectionError(f"bundle has no {section} study (needed for table {table!r})")
    return part


def export_tables(
    bundle: StudyBundle, out_dir: str | Path, tables: Iterable[str] | None = None
) -> dict:
    """Write the bundle's CSV tables under ``out_dir`` plus a
    ``manifest.json`` naming each file with its SHA-256 hash and size.
    ``tables`` selects sections (default: every section the bundle holds);
    naming an absent section raises MissingSectionError. Returns the
    manifest as a dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    wanted = list(tables) if tables is not None else [s for s in SECTIONS if getattr(bundle, s)]
    for name in wanted:
        if name not in SECTIONS:
            raise ValueError(f"unknown table {name!r}; choose among {SECTIONS}")

    files: dict[str, str] = {}
    if "planning" in wanted:
        study = _require(bundle, "planning", "planning")
        files["structures.csv"] = _structures_csv(study)
        imputations = study.stability.imputations or stable_structure_imputations(study)
        files["imputations.csv"] = _imputations_csv(imputations, study)
    if "equilibrium" in wanted:
        eq = _require(bundle, "equilibrium", "equilibrium")
        files["prices.csv"] = _prices_csv(eq)
        files["profits.csv"] = _profits_csv(eq)
        files["transactions.csv"] = _transactions_csv(eq)
        files["injections.csv"] = _injections_csv(eq)
        files["fitness.csv"] = _fitness_csv(eq)
    if "flat_sweep" in wanted:
        files["flat_sweep.csv"] = _flat_sweep_csv(_require(bundle, "flat_sweep", "flat_sweep"))
    if "sensitivity" in wanted:
        sens = _require(bundle, "sensitivity", "sensitivity")
        for name in sorted(sens):
            safe = name.replace(":", "_").replace("/", "_")
            files[f"sensitivity_{safe}.csv"] = _sensitivity_csv(sens[name])

    manifest = {"scenario_fingerprint": bundle.scenario_fingerprint, "files": {}}
    for name in sorted(files):
        data = files[name].encode()
        (out / name).write_bytes(data)
        manifest["files"][name] = {
            "sha256": hashlib.sha256(data).hexdigest(),
            "bytes": len(data),
        }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# Lossless bundle (de)serialization


def _plan_dict(p: PlanDecision) -> dict:
    return {"plant_id": p.plant_id, "equipment_index": p.equipment_index,
            "route": p.route, "fleet_size": p.fleet_size}


def _plan_from(d: dict) -> PlanDecision:
    return PlanDecision(int(d["plant_id"]), int(d["equipment_index"]), int(d["route"]),
                        int(d["fleet_size"]))


def _schedule_dict(s: Schedule) -> dict:
    return {
        "plant_id": s.plant_id,
        "processed": s.processed.tolist(),
        "shipped": s.shipped.tolist(),
        "vehicle_buffer": s.vehicle_buffer.tolist(),
        "tank_buffer": s.tank_buffer.tolist(),
        "departures": s.departures.tolist(),
        "discarded": s.discarded.tolist(),
        "status": s.status,
    }


def _schedule_from(d: dict) -> Schedule:
    arr = lambda key: np.asarray(d[key], dtype=float)
    return Schedule(int(d["plant_id"]), arr("processed"), arr("shipped"), arr("vehicle_buffer"),
                    arr("tank_buffer"), arr("departures"), arr("discarded"), d["status"])


def _structure_value_dict(sv: StructureValue) -> dict:
    return {
        "blocks": [list(b) for b in sv.structure.blocks],
        "hub_of": list(sv.structure.hub_of),
        "block_values": list(sv.block_values),
        "total": sv.total,
        "plan": [_plan_dict(p) for p in sv.plan],
        "schedules": [_schedule_dict(s) for s in sv.schedules],
        "notes": list(sv.notes),
    }


def _structure_value_from(d: dict) -> StructureValue:
    structure = CoalitionStructure(
        blocks=tuple(tuple(int(p) for p in b) for b in d["blocks"]),
        hub_of=tuple(None if h is None else int(h) for h in d["hub_of"]),
    )
    return StructureValue(
        structure=structure,
        block_values=tuple(float(v) for v in d["block_values"]),
        total=float(d["total"]),
        plan=tuple(_plan_from(p) for p in d["plan"]),
        schedules=tuple(_schedule_from(s) for s in d["schedules"]),
        notes=tuple(d["notes"]),
    )


def _imputation_dict(imp: Imputation) -> dict:
    return {"players": list(imp.players), "payoffs": list(imp.payoffs), "method": imp.method}


def _imputation_from(d: dict) -> Imputation:
    return Imputation(tuple(int(p) for p in d["players"]),
                      tuple(float(v) for v in d["payoffs"]), d["method"])


def _stability_dict(rep: StabilityReport) -> dict:
    return {
        "verdicts": [
            {"index": v.index, "label": v.label, "total": v.total,
             "collectively_rational": v.collectively_rational, "cr_notes": list(v.cr_notes),
             "dominated_by": v.dominated_by, "stable": v.stable}
            for v in rep.verdicts
        ],
        "stable": list(rep.stable),
        "singleton_values": {str(k): v for k, v in rep.singleton_values.items()},
        "imputations": None if rep.imputations is None else {
            str(k): [_imputation_dict(i) for i in imps] for k, imps in rep.imputations.items()
        },
    }


def _stability_from(d: dict) -> StabilityReport:
    return StabilityReport(
        verdicts=tuple(
            StructureVerdict(
                index=int(v["index"]), label=v["label"], total=float(v["total"]),
                collectively_rational=bool(v["collectively_rational"]),
                cr_notes=tuple(v["cr_notes"]),
                dominated_by=None if v["dominated_by"] is None else int(v["dominated_by"]),
                stable=bool(v["stable"]),
            )
            for v in d["verdicts"]
        ),
        stable=tuple(int(i) for i in d["stable"]),
        singleton_values={int(k): float(v) for k, v in d["singleton_values"].items()},
        imputations=None if d["imputations"] is None else {
            int(k): tuple(_imputation_from(i) for i in imps) for k, imps in d["imputations"].items()
        },
    )


def _equilibrium_dict(rep: EquilibriumReport) -> dict:
    return {
        "best_prices": list(rep.best_prices.prices),
        "leader_profit": rep.leader_profit,
        "follower_profits": {str(k): v for k, v in rep.follower_profits.items()},
        "transaction_series": {str(k): v.tolist() for k, v in rep.transaction_series.items()},
        "injection_series": rep.injection_series.tolist(),
        "fitness_history": list(rep.fitness_history),
        "discarded_series": {str(k): v.tolist() for k, v in rep.discarded_series.items()},
        "notes": list(rep.notes),
    }


def _equilibrium_from(d: dict) -> EquilibriumReport:
    return EquilibriumReport(
        best_prices=PriceSchedule(tuple(float(v) for v in d["best_prices"])),
        leader_profit=float(d["leader_profit"]),
        follower_profits={int(k): float(v) for k, v in d["follower_profits"].items()},
        transaction_series={int(k): np.asarray(v, dtype=float) for k, v in d["transaction_series"].items()},
        injection_series=np.asarray(d["injection_series"], dtype=float),
        fitness_history=tuple(float(v) for v in d["fitness_history"]),
        discarded_series={int(k): np.asarray(v, dtype=float) for k, v in d["discarded_series"].items()},
        notes=tuple(d["notes"]),
    )


def _sensitivity_point_dict(p: SensitivityPoint) -> dict:
    return {
        "value": p.value,
        "stable_structure": p.stable_structure,
        "structure_total": p.structure_total,
        "block_values": None if p.block_values is None else list(p.block_values),
        "leader_profit": p.leader_profit,
        "follower_profits": None if p.follower_profits is None else {
            str(k): v for k, v in p.follower_profits.items()
        },
        "notes": list(p.notes),
    }


def _sensitivity_point_from(d: dict) -> SensitivityPoint:
    return SensitivityPoint(
        value=float(d["value"]),
        stable_structure=d["stable_structure"],
        structure_total=None if d["structure_total"] is None else float(d["structure_total"]),
        block_values=None if d["block_values"] is None else tuple(float(v) for v in d["block_values"]),
        leader_profit=None if d["leader_profit"] is None else float(d["leader_profit"]),
        follower_profits=None if d["follower_profits"] is None else {
            int(k): float(v) for k, v in d["follower_profits"].items()
        },
        notes=tuple(d["notes"]),
    )


def bundle_to_dict(bundle: StudyBundle) -> dict:
    return {
        "scenario_fingerprint": bundle.scenario_fingerprint,
        "planning": None if bundle.planning is None else {
            "values": [_structure_value_dict(v) for v in bundle.planning.values],
            "stability": _stability_dict(bundle.planning.stability),
        },
        "equilibrium": None if bundle.equilibrium is None else _equilibrium_dict(bundle.equilibrium),
        "flat_sweep": None if bundle.flat_sweep is None else {
            "points": [
                {"price": p.price, "leader_profit": p.leader_profit, "total_volume": p.total_volume}
                for p in bundle.flat_sweep.points
            ],
            "best_index": bundle.flat_sweep.best_index,
        },
        "sensitivity": None if bundle.sensitivity is None else {
            name: [_sensitivity_point_dict(p) for p in points]
            for name, points in bundle.sensitivity.items()
        },
    }


def bundle_from_dict(d: dict) -> StudyBundle:
    planning = None
    if d.get("planning") is not None:
        planning = PlanningStudy(
            values=tuple(_structure_value_from(v) for v in d["planning"]["values"]),
            stability=_stability_from(d["planning"]["stability"]),
        )
    flat = None
    if d.get("flat_sweep") is not None:
        flat = FlatSweep(
            points=tuple(
                FlatPricePoint(float(p["price"]), float(p["leader_profit"]), float(p["total_volume"]))
                for p in d["flat_sweep"]["points"]
            ),
            best_index=int(d["flat_sweep"]["best_index"]),
        )
    return StudyBundle(
        scenario_fingerprint=d["scenario_fingerprint"],
        planning=planning,
        equilibrium=None if d.get("equilibrium") is None else _equilibrium_from(d["equilibrium"]),
        flat_sweep=flat,
        sensitivity=None if d.get("sensitivity") is None else {
            name: tuple(_sensitivity_point_from(p) for p in points)
            for name, points in d["sensitivity"].items()
        },
    )


def save_bundle(bundle: StudyBundle, path: str | Path) -> None:
    Path(path).write_text(json.dumps(bundle_to_dict(bundle), indent=2, sort_keys=True) + "\n")


def load_bundle(path: str | Path) -> StudyBundle:
    return bundle_from_dict(json.loads(Path(path).read_text()))
