"""Problem instances: configuration, time series and their validation.

A scenario is loaded from one JSON document whose field names follow the
symbols of the dispatch formulation (``C_r``, ``S_up``, ``eta_cab`` ...).
Data-file paths are resolved relative to the config file. Everything
unspecified falls back to the package defaults.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .battery import (
    DEFAULT_CYCLE_LIFE,
    BatteryCurves,
    BatteryParams,
    CycleLifeTable,
    default_curves,
    load_curves,
    load_cycle_life,
    validate_curves,
    write_curves,
    write_cycle_life,
)
from .errors import DataError, ValidationError
from .solver.options import SolverOptions

TOPOLOGIES = ("no-battery", "onshore", "offshore", "hybrid")
TIERS = ("basic", "dynamic-efficiency", "cycling-degradation", "calendar-degradation")
HORIZON_MODES = ("full", "rolling")
CAPACITY_MODES = ("iso", "self")
FIXTURE_KINDS = ("sinusoid", "spiky", "flat")

SCHEMA_PATH = Path(__file__).resolve().parent / "config.schema.json"

_KW_YEAR_TO_MW_DAY = 1000.0 / 365.0


@dataclass(frozen=True)
class MarketSeries:
    energy_prices: tuple[float, ...]
    capacity_prices: tuple[float, ...]
    start: str = "2013-01-01T00:00:00"

    @property
    def T(self) -> int:
        return len(self.energy_prices)

    @property
    def D(self) -> int:
        return len(self.capacity_prices)

    def violations(self) -> list[str]:
        out = []
        if self.T == 0:
            out.append("energy price series is empty")
        if self.D != -(-self.T // 24):
            out.append(f"{self.T} hourly prices but {self.D} daily capacity prices "
                       "(need one per started day)")
        if not all(math.isfinite(p) for p in self.energy_prices + self.capacity_prices):
            out.append("prices must be finite")
        return out


@dataclass(frozen=True)
class WindSeries:
    capacity_factors: tuple[float, ...]
    installed_capacity: float = 10.0
    capacity_credit: float = 0.38

    @property
    def power(self) -> np.ndarray:
        return np.asarray(self.capacity_factors, dtype=float) * self.installed_capacity

    def violations(self) -> list[str]:
        out = []
        if any(not (0.0 <= f <= 1.0) for f in self.capacity_factors):
            out.append("wind capacity factors must lie in [0, 1]")
        if self.installed_capacity < 0:
            out.append("installed wind capacity must be ≥ 0")
        if not (0.0 <= self.capacity_credit <= 1.0):
            out.append("wind capacity credit must lie in [0, 1]")
        return out


@dataclass(frozen=True)
class CableParams:
    """Export cable. ``capacity`` None means the cable size is optimized."""

    unit_cost: float = 125_000.0
    annuity: float | None = None
    efficiency: float = 0.97
    powerline_efficiency: float = 0.99
    capacity: float | None = None
    allow_curtailment: bool = True

    def violations(self) -> list[str]:
        out = []
        if not (0.0 < self.efficiency <= 1.0):
            out.append("cable efficiency must lie in (0, 1]")
        if not (0.0 < self.powerline_efficiency <= 1.0):
            out.append("power line efficiency must lie in (0, 1]")
        if self.unit_cost < 0:
            out.append("cable unit cost must be ≥ 0")
        if self.annuity is not None and self.annuity < 0:
            out.append("cable annuity must be ≥ 0")
        if self.capacity is not None and self.capacity < 0:
            out.append("pinned cable capacity must be ≥ 0")
        return out


@dataclass(frozen=True)
class Scenario:
    topology: str
    tier: str
    market: MarketSeries
    wind: WindSeries
    battery: BatteryParams = field(default_factory=BatteryParams)
    curves: BatteryCurves | None = None
    cycle_life: CycleLifeTable = DEFAULT_CYCLE_LIFE
    cable: CableParams = field(default_factory=CableParams)
    hybrid_split: float = 0.5
    round_trip_efficiency: float = 0.9
    interest_rate: float = 0.07
    recovery_years: int = 10
    capacity_duration_hours: float = 4.0
    capacity_mode: str = "iso"
    horizon_mode: str = "full"
    solver: SolverOptions = field(default_factory=SolverOptions)
    name: str = "scenario"

    def __post_init__(self):
        if self.curves is None:
            object.__setattr__(self, "curves", default_curves(self.battery))

    @property
    def T(self) -> int:
        return self.market.T

    @property
    def D(self) -> int:
        return self.market.D

    @property
    def prices(self) -> np.ndarray:
        return np.asarray(self.market.energy_prices, dtype=float)

    @property
    def wind_power(self) -> np.ndarray:
        return self.wind.power

    @property
    def cable_annuity(self) -> float:
        if self.cable.annuity is not None:
            return self.cable.annuity
        from .report import annuity_factor

        return annuity_factor(self.interest_rate, self.recovery_years)

    @property
    def horizon_fraction(self) -> float:
        """Share of a year covered by the horizon (prorates annual costs)."""
        return self.D / 365.0

    def violations(self) -> list[str]:
        out = []
        if self.topology not in TOPOLOGIES:
            out.append(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if self.tier not in TIERS:
            out.append(f"tier must be one of {TIERS}, got {self.tier!r}")
        if self.horizon_mode not in HORIZON_MODES:
            out.append(f"horizon_mode must be one of {HORIZON_MODES}")
        elif self.horizon_mode == "rolling" and self.cable.capacity is None:
            out.append("rolling horizon needs a pinned cable capacity (C_cab)")
        if self.capacity_mode not in CAPACITY_MODES:
            out.append(f"capacity_mode must be one of {CAPACITY_MODES}")
        if not (0.0 <= self.hybrid_split <= 1.0):
            out.append("hybrid_split must lie in [0, 1]")
        if not (0.0 < self.round_trip_efficiency <= 1.0):
            out.append("round_trip_efficiency must lie in (0, 1]")
        if self.interest_rate < 0:
            out.append("interest_rate must be ≥ 0")
        if self.recovery_years < 1:
            out.append("recovery_years must be ≥ 1")
        if self.capacity_duration_hours <= 0:
            out.append("capacity_duration_hours must be > 0")
        out += self.battery.violations()
        bat_ok = not self.battery.violations()
        if bat_ok:
            out += validate_curves(self.curves, self.battery)
        out += self.cycle_life.violations()
        out += self.cable.violations()
        out += self.market.violations()
        out += self.wind.violations()
        if len(self.wind.capacity_factors) != self.market.T:
            out.append(f"{len(self.wind.capacity_factors)} wind values but {self.market.T} hourly prices")
        out += self.solver.violations()
        return out

    def validate(self) -> Scenario:
        problems = self.violations()
        if problems:
            raise ValidationError(problems)
        return self

    def with_window(self, soc_lower: float, soc_upper: float) -> Scenario:
        """Same scenario with a different usable SOC window; curves re-binned."""
        battery = replace(self.battery, soc_lower=soc_lower, soc_upper=soc_upper)
        return replace(self, battery=battery,
                       curves=self.curves.fit_window(soc_lower, soc_upper))


# -- time series ----------------------------------------------------------------

def _read_two_columns(path: Path):
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = None
    try:
        float(rows[0][1])
    except (ValueError, IndexError):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: empty file")
    return header, rows


def _parse_rows(path: Path, rows, first_line: int):
    stamps, values = [], []
    for offset, row in enumerate(rows):
        line = first_line + offset
        if len(row) < 2:
            raise DataError(f"{path} line {line}: need (timestamp, value)")
        try:
            stamps.append(datetime.fromisoformat(row[0].strip()))
        except ValueError:
            raise DataError(f"{path} line {line}: bad timestamp {row[0]!r}") from None
        try:
            v = float(row[1])
        except ValueError:
            raise DataError(f"{path} line {line}: non-numeric value {row[1]!r}") from None
        if not math.isfinite(v):
            raise DataError(f"{path} line {line}: non-finite value")
        values.append(v)
    return stamps, values


def _check_regular(path: Path, stamps, values, step: timedelta):
    order = sorted(range(len(stamps)), key=lambda i: stamps[i])
    stamps = [stamps[i] for i in order]
    values = [values[i] for i in order]
    for a, b in zip(stamps, stamps[1:]):
        if b == a:
            raise DataError(f"{path}: duplicate timestamp {b.isoformat()}")
        if b - a != step:
            raise DataError(f"{path}: gap at {(a + step).isoformat()}")
    return stamps, values


def load_hourly_csv(path: str | Path) -> tuple[tuple[float, ...], str]:
    """Read a strictly hourly (timestamp, value) CSV.

    Returns the values in time order and the first timestamp.
    """
    path = Path(path)
    header, rows = _read_two_columns(path)
    stamps, values = _parse_rows(path, rows, 2 if header else 1)
    stamps, values = _check_regular(path, stamps, values, timedelta(hours=1))
    if len(values) % 24:
        raise DataError(f"{path}: {len(values)} hourly rows is not a whole number of days")
    return tuple(values), stamps[0].isoformat()


def load_daily_csv(path: str | Path) -> tuple[float, ...]:
    """Read a daily (date, value) CSV in $/MW-day.

    A value column headed ``usd_per_kw_year`` (or containing ``$/kW-year``)
    is converted with ×1000/365.
    """
    path = Path(path)
    header, rows = _read_two_columns(path)
    stamps, values = _parse_rows(path, rows, 2 if header else 1)
    stamps, values = _check_regular(path, stamps, values, timedelta(days=1))
    unit = (header[1].lower().replace(" ", "") if header and len(header) > 1 else "")
    if "kw_year" in unit or "kw-year" in unit or "kw-yr" in unit:
        values = [v * _KW_YEAR_TO_MW_DAY for v in values]
    return tuple(values)


def write_hourly_csv(path: str | Path, values, start: str) -> None:
    t0 = datetime.fromisoformat(start)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "value"])
        for i, v in enumerate(values):
            w.writerow([(t0 + timedelta(hours=i)).isoformat(), repr(float(v))])


def write_daily_csv(path: str | Path, values, start: str) -> None:
    d0 = datetime.fromisoformat(start).replace(hour=0, minute=0, second=0, microsecond=0)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "usd_per_mw_day"])
        for i, v in enumerate(values):
            w.writerow([(d0 + timedelta(days=i)).date().isoformat(), repr(float(v))])


# -- synthetic fixtures ---------------------------------------------------------

def synthesize_fixture(kind: str, days: int, seed: int) -> tuple[MarketSeries, WindSeries]:
    """Deterministic stand-in market and wind data.

    ``sinusoid``: prices with an exact 24-hour period. ``spiky``: a gentle
    daily sinusoid plus exactly one evening spike per day of at least 5×
    the daily median. ``flat``: constant prices (no arbitrage spread).
    """
    if kind not in FIXTURE_KINDS:
        raise ValueError(f"kind must be one of {FIXTURE_KINDS}")
    if days < 1:
        raise ValueError("days must be ≥ 1")
    rng = np.random.default_rng(seed)
    hod = np.tile(np.arange(24), days)
    if kind == "sinusoid":
        base, amp = rng.uniform(30.0, 40.0), rng.uniform(8.0, 12.0)
        prices = base + amp * np.sin(2 * np.pi * (hod - 12) / 24.0)
        cap = rng.uniform(100.0, 200.0, size=days)
    elif kind == "spiky":
        base, amp = rng.uniform(28.0, 32.0), rng.uniform(3.0, 4.0)
        prices = base + amp * np.sin(2 * np.pi * (hod - 12) / 24.0)
        for d in range(days):
            day = prices[24 * d: 24 * d + 24]
            hour = int(rng.integers(16, 22))
            day[hour] = float(np.median(day)) * rng.uniform(6.0, 8.0)
        cap = rng.uniform(100.0, 200.0, size=days)
    else:
        prices = np.full(24 * days, 35.0)
        cap = np.full(days, 150.0)
    wind = np.empty(24 * days)
    x = rng.uniform(0.3, 0.6)
    for t in range(wind.size):
        x = 0.9 * x + 0.1 * 0.45 + rng.normal(0.0, 0.08)
        x = min(max(x, 0.0), 1.0)
        wind[t] = x
    market = MarketSeries(tuple(float(p) for p in prices), tuple(float(c) for c in cap))
    return market, WindSeries(tuple(float(w) for w in wind))


# -- config documents -----------------------------------------------------------

_BATTERY_KEYS = {
    "C_r": "rated_capacity",
    "p_d_max": "max_discharge_power",
    "p_c_max": "max_charge_power",
    "S_up": "soc_upper",
    "S_dn": "soc_lower",
    "C_int": "initial_energy",
    "Q_int": "initial_capacity",
    "EOL": "eol",
    "L_cal": "calendar_life",
    "gamma_b": "replacement_cost",
    "gamma_b_VOM": "variable_om",
    "fixed_om": "fixed_om",
    "investment_cost": "investment_cost",
    "offshore_cost_multiplier": "offshore_cost_multiplier",
}
_CABLE_KEYS = {
    "gamma_cab": "unit_cost",
    "A_cab": "annuity",
    "eta_cab": "efficiency",
    "eta_pl": "powerline_efficiency",
    "C_cab": "capacity",
    "allow_curtailment": "allow_curtailment",
}
_SOLVER_KEYS = ("gap", "feasibility_tol", "node_limit", "time_limit", "branching", "seed",
                "log_interval")


def _schema_errors(doc) -> list[str]:
    import jsonschema

    schema = json.loads(SCHEMA_PATH.read_text())
    validator = jsonschema.Draft7Validator(schema)
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        out.append(f"{where}: {err.message}")
    return out


def scenario_from_dict(doc: dict, base_dir: str | Path = ".") -> Scenario:
    """Build and validate a scenario from a parsed config document."""
    base = Path(base_dir)
    problems = _schema_errors(doc)
    if problems:
        raise ValidationError(problems)

    bdoc = dict(doc.get("battery", {}))
    eta_rt = bdoc.pop("eta_rt", 0.9)
    kwargs = {_BATTERY_KEYS[k]: v for k, v in bdoc.items()}
    if "initial_energy" not in kwargs:
        kwargs["initial_energy"] = 0.5 * kwargs.get("rated_capacity", 1.0)
    battery = BatteryParams(**kwargs)
    cable = CableParams(**{_CABLE_KEYS[k]: v for k, v in doc.get("cable", {}).items()})

    mdoc = doc.get("market", {})
    wdoc = dict(doc.get("wind", {}))
    if "synthetic" in mdoc:
        syn = mdoc["synthetic"]
        market, wind = synthesize_fixture(syn["kind"], syn["days"], syn.get("seed", 0))
    else:
        prices, start = load_hourly_csv(base / mdoc["energy_prices"])
        capacity = load_daily_csv(base / mdoc["capacity_prices"])
        market, wind = MarketSeries(prices, capacity, start), None
    if "capacity_factors" in wdoc:
        factors, _ = load_hourly_csv(base / wdoc["capacity_factors"])
    elif wind is not None:
        factors = wind.capacity_factors
    else:
        factors = tuple(0.0 for _ in range(market.T))
    wind = WindSeries(factors, wdoc.get("C_W", 10.0), wdoc.get("Cr_W", 0.38))

    errors = []
    curves = None
    if doc.get("curves"):
        try:
            curves = load_curves(base / doc["curves"])
        except (DataError, OSError) as exc:
            errors.append(str(exc))
    cycle_life = DEFAULT_CYCLE_LIFE
    if doc.get("cycle_life"):
        try:
            cycle_life = load_cycle_life(base / doc["cycle_life"])
        except (DataError, OSError) as exc:
            errors.append(str(exc))
    econ = doc.get("economics", {})
    solver = SolverOptions(**{k: v for k, v in doc.get("solver", {}).items() if k in _SOLVER_KEYS})
    scenario = Scenario(
        topology=doc.get("topology", "onshore"),
        tier=doc.get("tier", "calendar-degradation"),
        market=market,
        wind=wind,
        battery=battery,
        curves=curves,
        cycle_life=cycle_life,
        cable=cable,
        hybrid_split=doc.get("hybrid_split", 0.5),
        round_trip_efficiency=eta_rt,
        interest_rate=econ.get("interest_rate", 0.07),
        recovery_years=econ.get("recovery_years", 10),
        capacity_duration_hours=econ.get("capacity_duration_hours", 4.0),
        capacity_mode=econ.get("capacity_mode", "iso"),
        horizon_mode=doc.get("horizon_mode", "full"),
        solver=solver,
        name=doc.get("name", "scenario"),
    )
    errors += scenario.violations()
    if errors:
        raise ValidationError(errors)
    return scenario


def load_scenario(config_path: str | Path) -> Scenario:
    path = Path(config_path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(doc, path.parent)


def scenario_to_dict(scenario: Scenario, data_prefix: str = "") -> dict:
    """Config document for ``scenario``; data files named with ``data_prefix``."""
    inv = {v: k for k, v in _BATTERY_KEYS.items()}
    battery = {inv[k]: v for k, v in asdict(scenario.battery).items()}
    battery["eta_rt"] = scenario.round_trip_efficiency
    cinv = {v: k for k, v in _CABLE_KEYS.items()}
    cable = {cinv[k]: v for k, v in asdict(scenario.cable).items()}
    return {
        "name": scenario.name,
        "topology": scenario.topology,
        "tier": scenario.tier,
        "horizon_mode": scenario.horizon_mode,
        "hybrid_split": scenario.hybrid_split,
        "battery": battery,
        "curves": f"{data_prefix}curves.csv",
        "cycle_life": f"{data_prefix}cycle_life.csv",
        "cable": cable,
        "market": {"energy_prices": f"{data_prefix}energy_prices.csv",
                   "capacity_prices": f"{data_prefix}capacity_prices.csv"},
        "wind": {"capacity_factors": f"{data_prefix}wind.csv",
                 "C_W": scenario.wind.installed_capacity,
                 "Cr_W": scenario.wind.capacity_credit},
        "economics": {"interest_rate": scenario.interest_rate,
                      "recovery_years": scenario.recovery_years,
                      "capacity_duration_hours": scenario.capacity_duration_hours,
                      "capacity_mode": scenario.capacity_mode},
        "solver": asdict(scenario.solver),
    }


def save_scenario(scenario: Scenario, config_path: str | Path) -> Path:
    """Write the config JSON and every data file it references."""
    path = Path(config_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    prefix = path.stem + "_"
    doc = scenario_to_dict(scenario, prefix)
    d = path.parent
    write_hourly_csv(d / doc["market"]["energy_prices"], scenario.market.energy_prices,
                     scenario.market.start)
    write_daily_csv(d / doc["market"]["capacity_prices"], scenario.market.capacity_prices,
                    scenario.market.start)
    write_hourly_csv(d / doc["wind"]["capacity_factors"], scenario.wind.capacity_factors,
                     scenario.market.start)
    write_curves(scenario.curves, d / doc["curves"])
    write_cycle_life(scenario.cycle_life, d / doc["cycle_life"])
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def data_files(config_path: str | Path) -> list[Path]:
    """Every file a config refers to (for manifests and digests)."""
    path = Path(config_path)
    doc = json.loads(path.read_text())
    out = [path]
    for key in ("curves", "cycle_life"):
        if doc.get(key):
            out.append(path.parent / doc[key])
    for key in ("energy_prices", "capacity_prices"):
        if key in doc.get("market", {}):
            out.append(path.parent / doc["market"][key])
    if "capacity_factors" in doc.get("wind", {}):
        out.append(path.parent / doc["wind"]["capacity_factors"])
    return out
