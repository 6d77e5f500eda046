"""Market instance data model: plants, cavern, transport, tariffs, horizon.

A scenario is the single source of every exogenous number in the study.
Instances are immutable once validated and round-trip losslessly through a
canonical JSON form (sorted keys, two-space indent, trailing newline), which
is also what gets fingerprinted for reproducibility manifests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class ValidationError(ValueError):
    """A scenario invariant failed; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


def _require(ok: bool, field_name: str, message: str) -> None:
    if not ok:
        raise ValidationError(field_name, message)


@dataclass(frozen=True)
class Horizon:
    n_periods: int
    period_hours: float = 1.0


@dataclass(frozen=True)
class PlantParams:
    id: int
    generation: tuple[float, ...]
    tank_bound_by_equipment: bool = True


@dataclass(frozen=True)
class EquipmentCatalog:
    capacities: tuple[float, ...]  # kg/h, compressor types first
    invest_daily: tuple[float, ...]  # $/day, already discounted
    n_compressor_types: int
    n_liquefier_types: int
    energy_per_kg_compress: float  # kWh/kg
    energy_per_kg_liquefy: float  # kWh/kg

    def is_compressor(self, equipment_index: int) -> bool:
        return equipment_index < self.n_compressor_types

    def energy_per_kg(self, equipment_index: int) -> float:
        return self.energy_per_kg_compress if self.is_compressor(equipment_index) else self.energy_per_kg_liquefy


@dataclass(frozen=True)
class TransportParams:
    tube_capacity: float  # kg per tube-trailer trip
    tanker_capacity: float  # kg per tanker trip
    tube_invest_daily: float  # $/vehicle/day
    tanker_invest_daily: float  # $/vehicle/day
    op_cost_per_period: float  # $/vehicle/period of travel
    travel_periods: tuple[tuple[int, ...], ...]  # rows: plants, cols: plants + cavern
    loading_retention: float  # fraction kept per period while liquid waits in a tanker
    transit_retention_base: float  # fraction kept per period of liquid transit


@dataclass(frozen=True)
class CavernParams:
    retail_price: float  # $/kg sold onward
    price_floor: tuple[float, ...]  # $/kg, per period
    price_ceiling: tuple[float, ...]  # $/kg, per period
    max_injection: float  # kg accepted per period


@dataclass(frozen=True)
class Tariff:
    electricity_price: tuple[float, ...]  # $/kWh per period


@dataclass(frozen=True)
class Scenario:
    horizon: Horizon
    plants: tuple[PlantParams, ...]
    catalog: EquipmentCatalog
    transport: TransportParams
    cavern: CavernParams
    tariff: Tariff
    rng_seed: int = 0
    schema_version: int = SCHEMA_VERSION

    @property
    def n_plants(self) -> int:
        return len(self.plants)

    @property
    def n_periods(self) -> int:
        return self.horizon.n_periods

    def cavern_index(self) -> int:
        # routes are 1-based plant ids; the cavern sits one past the last plant
        return self.n_plants + 1

    def travel(self, i: int, j: int) -> int:
        """Travel periods from plant ``i`` to destination ``j`` (1-based)."""
        return self.transport.travel_periods[i - 1][j - 1]

    def plant(self, i: int) -> PlantParams:
        return self.plants[i - 1]

    def fingerprint(self) -> str:
        return hashlib.sha256(to_canonical_json(self).encode()).hexdigest()


def validate(s: Scenario) -> Scenario:
    t = s.horizon.n_periods
    i_count = len(s.plants)
    _require(s.schema_version == SCHEMA_VERSION, "schema_version", f"expected {SCHEMA_VERSION}, got {s.schema_version}")
    _require(isinstance(s.horizon.n_periods, int) and t >= 1, "horizon.n_periods", "must be an integer >= 1")
    _require(s.horizon.period_hours > 0, "horizon.period_hours", "must be > 0")
    _require(i_count >= 1, "plants", "at least one plant required")

    for k, p in enumerate(s.plants):
        _require(p.id == k + 1, f"plants[{k}].id", f"ids must be 1..{i_count} in order, got {p.id}")
        _require(len(p.generation) == t, f"plants[{k}].generation", f"length {len(p.generation)} != n_periods {t}")
        _require(all(g >= 0 for g in p.generation), f"plants[{k}].generation", "entries must be >= 0")

    c = s.catalog
    n_types = c.n_compressor_types + c.n_liquefier_types
    _require(c.n_compressor_types >= 0 and c.n_liquefier_types >= 0 and n_types >= 1, "catalog", "need at least one equipment type")
    _require(len(c.capacities) == n_types, "catalog.capacities", f"length {len(c.capacities)} != {n_types}")
    _require(len(c.invest_daily) == n_types, "catalog.invest_daily", f"length {len(c.invest_daily)} != {n_types}")
    _require(all(v > 0 for v in c.capacities), "catalog.capacities", "entries must be > 0")
    _require(all(v > 0 for v in c.invest_daily), "catalog.invest_daily", "entries must be > 0")
    _require(c.energy_per_kg_liquefy > c.energy_per_kg_compress, "catalog.energy_per_kg_liquefy", "liquefaction must cost more energy than compression")

    tr = s.transport
    _require(tr.tanker_capacity > tr.tube_capacity, "transport.tanker_capacity", "tanker capacity must exceed tube capacity")
    _require(tr.tube_capacity > 0, "transport.tube_capacity", "must be > 0")
    _require(0 < tr.loading_retention <= 1, "transport.loading_retention", "retention fraction must be in (0, 1]")
    _require(0 < tr.transit_retention_base <= 1, "transport.transit_retention_base", "retention fraction must be in (0, 1]")
    _require(tr.op_cost_per_period >= 0, "transport.op_cost_per_period", "must be >= 0")
    _require(tr.tube_invest_daily >= 0, "transport.tube_invest_daily", "must be >= 0")
    _require(tr.tanker_invest_daily >= 0, "transport.tanker_invest_daily", "must be >= 0")
    _require(len(tr.travel_periods) == i_count, "transport.travel_periods", f"{len(tr.travel_periods)} rows for {i_count} plants")
    for r, row in enumerate(tr.travel_periods):
        _require(len(row) == i_count + 1, f"transport.travel_periods[{r}]", f"needs {i_count + 1} columns")
        _require(row[r] == 0, f"transport.travel_periods[{r}][{r}]", "diagonal must be 0")
        for cc, v in enumerate(row):
            _require(isinstance(v, int) and v >= 0, f"transport.travel_periods[{r}][{cc}]", "entries must be integers >= 0")

    cav = s.cavern
    _require(len(cav.price_floor) == t, "cavern.price_floor", f"length {len(cav.price_floor)} != n_periods {t}")
    _require(len(cav.price_ceiling) == t, "cavern.price_ceiling", f"length {len(cav.price_ceiling)} != n_periods {t}")
    for k in range(t):
        _require(0 <= cav.price_floor[k], f"cavern.price_floor[{k}]", "must be >= 0")
        _require(cav.price_floor[k] <= cav.price_ceiling[k], f"cavern.price_ceiling[{k}]", "ceiling below floor")
        _require(cav.price_ceiling[k] <= cav.retail_price, f"cavern.price_ceiling[{k}]", "ceiling above resale price")
    _require(cav.max_injection > 0, "cavern.max_injection", "must be > 0")

    _require(len(s.tariff.electricity_price) == t, "tariff.electricity_price", f"length {len(s.tariff.electricity_price)} != n_periods {t}")
    _require(all(v >= 0 for v in s.tariff.electricity_price), "tariff.electricity_price", "entries must be >= 0")
    _require(isinstance(s.rng_seed, int), "rng_seed", "must be an integer")
    return s


# ---------------------------------------------------------------------------
# serialization


def _freeze(obj):
    if isinstance(obj, list):
        return tuple(_freeze(v) for v in obj)
    return obj


def from_dict(raw: dict) -> Scenario:
    try:
        scenario = Scenario(
            horizon=Horizon(**raw["horizon"]),
            plants=tuple(PlantParams(**{k: _freeze(v) for k, v in p.items()}) for p in raw["plants"]),
            catalog=EquipmentCatalog(**{k: _freeze(v) for k, v in raw["catalog"].items()}),
            transport=TransportParams(**{k: _freeze(v) for k, v in raw["transport"].items()}),
            cavern=CavernParams(**{k: _freeze(v) for k, v in raw["cavern"].items()}),
            tariff=Tariff(**{k: _freeze(v) for k, v in raw["tariff"].items()}),
            rng_seed=raw.get("rng_seed", 0),
            schema_version=raw.get("schema_version", -1),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError("scenario", f"malformed document: {exc}") from exc
    return validate(scenario)


def to_dict(s: Scenario) -> dict:
    return asdict(s)


def to_canonical_json(s: Scenario) -> str:
    return json.dumps(to_dict(s), indent=2, sort_keys=True) + "\n"


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError("file", f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("file", "top level must be an object")
    return from_dict(raw)


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(to_canonical_json(s))


def generate_generation_profile(mean: float, variance: float, n_periods: int, seed: int) -> np.ndarray:
    """Gaussian per-period production draws, truncated at zero."""
    if mean <= 0:
        raise ValueError(f"mean must be > 0, got {mean}")
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    rng = np.random.default_rng(seed)
    draws = rng.normal(mean, np.sqrt(variance), size=n_periods)
    return np.maximum(draws, 0.0)


def bundled_fixture(name: str) -> Path:
    """Path of a fixture shipped inside the package (``paper_case.json`` etc.)."""
    return Path(__file__).parent / "fixtures" / name
