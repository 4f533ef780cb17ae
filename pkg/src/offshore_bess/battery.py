"""Battery parameters, SOC-binned loss/power curves and capacity-fade arithmetic.

Everything here is a plain function of immutable inputs so that the model
builder (which turns the curves into MILP coefficients) and the DP oracle
(which evaluates them directly) share one definition of the physics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DataError, DomainError

_SOC_TOL = 1e-9
_POWER_TOL = 1e-9

CHARGE = "charge"
DISCHARGE = "discharge"


@dataclass(frozen=True)
class BatteryParams:
    """Physical and cost parameters of one battery (package defaults).

    Energies in MWh, powers in MW, SOC limits and capacities in p.u.
    ``replacement_cost`` is $/MWh of rated capacity, ``variable_om`` is
    $/MWh discharged, ``fixed_om`` is $/kW-year and ``investment_cost`` is
    $/kWh.
    """

    rated_capacity: float = 1.0
    max_discharge_power: float = 1.337
    max_charge_power: float = 1.337
    soc_upper: float = 0.85
    soc_lower: float = 0.30
    initial_energy: float = 0.5
    initial_capacity: float = 1.0
    eol: float = 0.8
    calendar_life: float = 3650.0
    replacement_cost: float = 165_000.0
    variable_om: float = 2.3
    fixed_om: float = 8.0
    investment_cost: float = 165.0
    offshore_cost_multiplier: float = 1.2

    @property
    def dod(self) -> float:
        return self.soc_upper - self.soc_lower

    def violations(self) -> list[str]:
        out = []
        if not (0.0 <= self.soc_lower < self.soc_upper <= 1.0):
            if self.soc_lower >= self.soc_upper:
                out.append("soc_lower ≥ soc_upper")
            else:
                out.append("SOC limits must lie in [0, 1]")
        if self.rated_capacity < 0:
            out.append("rated_capacity must be ≥ 0")
        lo = self.rated_capacity * self.soc_lower
        hi = self.rated_capacity * self.soc_upper
        if not (lo - 1e-12 <= self.initial_energy <= hi + 1e-12):
            out.append(
                f"initial_energy {self.initial_energy} outside SOC window [{lo:g}, {hi:g}] MWh"
            )
        if not (0.0 < self.eol < 1.0):
            out.append("eol must lie in (0, 1)")
        if self.calendar_life < 1:
            out.append("calendar_life must be ≥ 1 day")
        if self.initial_capacity <= 0:
            out.append("initial_capacity must be > 0")
        if self.max_discharge_power <= 0 or self.max_charge_power <= 0:
            out.append("max powers must be > 0")
        for name in ("replacement_cost", "variable_om", "fixed_om", "investment_cost",
                     "offshore_cost_multiplier"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be ≥ 0")
        return out

    def scaled(self, fraction: float) -> BatteryParams:
        """Same chemistry at ``fraction`` of the energy and power rating."""
        return replace(
            self,
            rated_capacity=self.rated_capacity * fraction,
            max_discharge_power=self.max_discharge_power * fraction,
            max_charge_power=self.max_charge_power * fraction,
            initial_energy=self.initial_energy * fraction,
        )


@dataclass(frozen=True)
class BatteryCurves:
    """Piecewise-linear loss curves and max-power limits per SOC bin.

    ``soc_bins`` holds K+1 ascending edges. For bin k the discharge curve is
    a list of L pieces ``(discharge_widths[k][l], discharge_slopes[k][l])``
    (MW, loss per MW); charge likewise with N pieces.
    """

    soc_bins: tuple[float, ...]
    discharge_widths: tuple[tuple[float, ...], ...]
    discharge_slopes: tuple[tuple[float, ...], ...]
    charge_widths: tuple[tuple[float, ...], ...]
    charge_slopes: tuple[tuple[float, ...], ...]
    discharge_max: tuple[float, ...]
    charge_max: tuple[float, ...]

    @property
    def K(self) -> int:
        return len(self.soc_bins) - 1

    @property
    def L(self) -> int:
        return len(self.discharge_widths[0]) if self.discharge_widths else 0

    @property
    def N(self) -> int:
        return len(self.charge_widths[0]) if self.charge_widths else 0

    def pieces(self, mode: str):
        if mode == DISCHARGE:
            return self.discharge_widths, self.discharge_slopes, self.discharge_max
        if mode == CHARGE:
            return self.charge_widths, self.charge_slopes, self.charge_max
        raise ValueError(f"mode must be 'charge' or 'discharge', got {mode!r}")

    def scaled(self, factor: float) -> BatteryCurves:
        """Scale every power quantity (widths, maxima) by ``factor``."""

        def s2(rows):
            return tuple(tuple(w * factor for w in row) for row in rows)

        return replace(
            self,
            discharge_widths=s2(self.discharge_widths),
            charge_widths=s2(self.charge_widths),
            discharge_max=tuple(p * factor for p in self.discharge_max),
            charge_max=tuple(p * factor for p in self.charge_max),
        )

    def fit_window(self, soc_lower: float, soc_upper: float) -> BatteryCurves:
        """Re-bin to a new SOC window.

        Interior edges strictly inside the window are kept, bins entirely
        outside are dropped and the outermost surviving bins are stretched
        to the new endpoints.
        """
        edges = list(self.soc_bins)
        keep = [k for k in range(self.K)
                if edges[k + 1] > soc_lower + _SOC_TOL and edges[k] < soc_upper - _SOC_TOL]
        if not keep:
            # window lies entirely inside one extreme bin
            keep = [0] if soc_upper <= edges[0] else [self.K - 1]
        new_edges = [soc_lower] + [edges[k + 1] for k in keep[:-1]] + [soc_upper]

        def pick(rows):
            return tuple(rows[k] for k in keep)

        return BatteryCurves(
            soc_bins=tuple(new_edges),
            discharge_widths=pick(self.discharge_widths),
            discharge_slopes=pick(self.discharge_slopes),
            charge_widths=pick(self.charge_widths),
            charge_slopes=pick(self.charge_slopes),
            discharge_max=pick(self.discharge_max),
            charge_max=pick(self.charge_max),
        )


def default_curves(params: BatteryParams) -> BatteryCurves:
    """Synthetic, non-physical stand-in for manufacturer efficiency data.

    Three equal SOC bins spanning the battery's window, three pieces per
    bin. One-way losses run from 2.5% to 7% of throughput (about 95%
    average one-way efficiency); discharge is cheaper at high SOC and charge
    at low SOC. Maximum power is the rated value in the middle bin and 15%
    lower in the two extreme bins.
    """
    bins = tuple(float(b) for b in np.linspace(params.soc_lower, params.soc_upper, 4))
    dmax = tuple(params.max_discharge_power * f for f in (0.85, 1.0, 0.85))
    cmax = tuple(params.max_charge_power * f for f in (0.85, 1.0, 0.85))
    d_slopes = ((0.035, 0.050, 0.070), (0.030, 0.045, 0.060), (0.025, 0.040, 0.055))
    c_slopes = ((0.025, 0.040, 0.055), (0.030, 0.045, 0.060), (0.035, 0.050, 0.070))
    return BatteryCurves(
        soc_bins=bins,
        discharge_widths=tuple((p / 3, p / 3, p / 3) for p in dmax),
        discharge_slopes=d_slopes,
        charge_widths=tuple((p / 3, p / 3, p / 3) for p in cmax),
        charge_slopes=c_slopes,
        discharge_max=dmax,
        charge_max=cmax,
    )


def flat_curves(params: BatteryParams, slope: float, bins: int = 1,
                max_power: float | None = None) -> BatteryCurves:
    """Single-piece constant-slope curves, identical in every SOC bin."""
    edges = tuple(float(b) for b in np.linspace(params.soc_lower, params.soc_upper, bins + 1))
    pd = params.max_discharge_power if max_power is None else max_power
    pc = params.max_charge_power if max_power is None else max_power
    return BatteryCurves(
        soc_bins=edges,
        discharge_widths=tuple((pd,) for _ in range(bins)),
        discharge_slopes=tuple((slope,) for _ in range(bins)),
        charge_widths=tuple((pc,) for _ in range(bins)),
        charge_slopes=tuple((slope,) for _ in range(bins)),
        discharge_max=tuple(pd for _ in range(bins)),
        charge_max=tuple(pc for _ in range(bins)),
    )


def soc_bin(curves: BatteryCurves, soc: float) -> int:
    """Index of the bin holding ``soc``; a shared edge belongs to the lower bin."""
    edges = curves.soc_bins
    if soc < edges[0] - _SOC_TOL or soc > edges[-1] + _SOC_TOL:
        raise DomainError(f"soc {soc} outside [{edges[0]}, {edges[-1]}]")
    k = int(np.searchsorted(edges, soc, side="left")) - 1
    return min(max(k, 0), curves.K - 1)


def max_power(curves: BatteryCurves, soc: float, mode: str) -> float:
    """Charge or discharge power limit (MW) at ``soc``."""
    _, _, maxima = curves.pieces(mode)
    return float(maxima[soc_bin(curves, soc)])


def eval_loss(curves: BatteryCurves, soc: float, power: float, mode: str) -> float:
    """Loss (MW) at ``power``: pieces are filled in order until they sum to it."""
    widths, slopes, maxima = curves.pieces(mode)
    k = soc_bin(curves, soc)
    if power < -_POWER_TOL:
        raise DomainError(f"power must be ≥ 0, got {power}")
    if power > maxima[k] + _POWER_TOL:
        raise DomainError(f"power {power} above {mode} limit {maxima[k]} at soc {soc}")
    remaining = max(power, 0.0)
    loss = 0.0
    for w, b in zip(widths[k], slopes[k]):
        take = min(w, remaining)
        loss += b * take
        remaining -= take
        if remaining <= 0.0:
            break
    return loss


def validate_curves(curves: BatteryCurves, params: BatteryParams) -> list[str]:
    """Every violated curve invariant, as human-readable strings."""
    out = []
    edges = curves.soc_bins
    K = len(edges) - 1
    if K < 1:
        return ["need at least one SOC bin"]
    if any(b >= a for a, b in zip(edges[1:], edges[:-1])):
        out.append("bins not strictly ascending")
    if abs(edges[0] - params.soc_lower) > 1e-9:
        out.append(f"first bin edge {edges[0]} != soc_lower {params.soc_lower}")
    if abs(edges[-1] - params.soc_upper) > 1e-9:
        out.append(f"last bin edge {edges[-1]} != soc_upper {params.soc_upper}")
    for mode in (DISCHARGE, CHARGE):
        widths, slopes, maxima = curves.pieces(mode)
        if len(widths) != K or len(slopes) != K or len(maxima) != K:
            out.append(f"{mode}: need one curve per SOC bin ({K})")
            continue
        counts = {len(w) for w in widths} | {len(s) for s in slopes}
        if len(counts) != 1 or 0 in counts:
            out.append(f"{mode}: every bin needs the same positive number of pieces")
            continue
        for k in range(K):
            if any(w <= 0 for w in widths[k]):
                out.append(f"{mode} bin {k}: piece widths must be > 0")
            if any(not (0.0 <= b < 1.0) for b in slopes[k]):
                out.append(f"{mode} bin {k}: slope out of [0,1)")
            if any(b2 < b1 for b1, b2 in zip(slopes[k], slopes[k][1:])):
                out.append(f"{mode} bin {k}: slopes not non-decreasing (loss curve not convex)")
            if maxima[k] <= 0:
                out.append(f"{mode} bin {k}: max power must be > 0")
            if sum(widths[k]) < maxima[k] - 1e-9:
                out.append(f"{mode} bin {k}: pieces sum to {sum(widths[k]):g} < max power {maxima[k]:g}")
    return out


@dataclass(frozen=True)
class CycleLifeTable:
    """Cycle life against depth of discharge, interpolated in log space."""

    dod: tuple[float, ...]
    cycle_life: tuple[float, ...]

    def violations(self) -> list[str]:
        out = []
        if not self.dod:
            return ["cycle-life table is empty"]
        if len(self.dod) != len(self.cycle_life):
            out.append("dod and cycle_life lengths differ")
        if any(not (0.0 < x <= 1.0) for x in self.dod):
            out.append("DOD values must lie in (0, 1]")
        if any(b <= a for a, b in zip(self.dod, self.dod[1:])):
            out.append("DOD not strictly ascending")
        if any(x <= 0 for x in self.cycle_life):
            out.append("cycle life must be > 0")
        if any(b > a for a, b in zip(self.cycle_life, self.cycle_life[1:])):
            out.append("cycle life must be non-increasing in DOD")
        return out


DEFAULT_CYCLE_LIFE = CycleLifeTable(
    dod=(0.1, 0.25, 0.5, 0.75, 1.0),
    cycle_life=(15000.0, 8000.0, 4000.0, 2000.0, 1000.0),
)


def cycle_life_for_dod(table: CycleLifeTable, dod: float) -> float:
    """Log-linear interpolation; clamps to the end rows outside the table."""
    if not table.dod:
        raise ConfigurationError("cycle-life table is empty")
    if not (0.0 < dod <= 1.0):
        raise DomainError(f"dod must lie in (0, 1], got {dod}")
    logs = np.log(np.asarray(table.cycle_life, dtype=float))
    return float(np.exp(np.interp(dod, table.dod, logs)))


def calendar_capacity(params: BatteryParams, d: int) -> float:
    """Capacity (p.u.) left after calendar fade at the start of day ``d``."""
    if d < 1:
        raise DomainError(f"day index must be ≥ 1, got {d}")
    q = params.initial_capacity * (1.0 - (1.0 - params.eol) * (d - 1) / params.calendar_life)
    return max(q, params.eol * params.initial_capacity)


def cycle_capacity(params: BatteryParams, cycle_life: float, cumulative_charge: float,
                   d: int) -> float:
    """Capacity (p.u.) left after cycling fade at the start of day ``d``.

    ``cumulative_charge`` is the total charged energy (MWh) over all hours
    through the end of day d-1.
    """
    if cycle_life <= 0:
        raise DomainError(f"cycle_life must be > 0, got {cycle_life}")
    if d < 1:
        raise DomainError(f"day index must be ≥ 1, got {d}")
    if d == 1:
        return params.initial_capacity
    q = params.initial_capacity * (
        1.0 - (1.0 - params.eol) * cumulative_charge / (params.rated_capacity * cycle_life)
    )
    return max(q, params.eol * params.initial_capacity)


def cycle_fade_rate(params: BatteryParams, cycle_life: float) -> float:
    """Loss of capacity (p.u.) per MWh charged."""
    return params.initial_capacity * (1.0 - params.eol) / (params.rated_capacity * cycle_life)


@dataclass(frozen=True)
class DegradationState:
    """Capacity bookkeeping at the start of day ``day``."""

    day: int
    q_cal: float
    q_cyc: float
    c_act: float
    cumulative_charge: float = 0.0


def degradation_path(params: BatteryParams, cycle_life: float, hourly_charge: Sequence[float],
                     *, calendar: bool = True, start_day: int = 1,
                     cumulative_charge0: float = 0.0) -> list[DegradationState]:
    """States for each day of ``hourly_charge`` plus the following day.

    ``c_act`` is the tightest of the modelled mechanisms (cycling alone when
    ``calendar`` is False).
    """
    charge = np.asarray(hourly_charge, dtype=float)
    days = -(-charge.size // 24)
    padded = np.zeros(24 * days)
    padded[:charge.size] = charge
    daily = padded.reshape(days, 24).sum(axis=1)
    states = []
    cum = cumulative_charge0
    for i in range(days + 1):
        d = start_day + i
        qcal = calendar_capacity(params, d)
        qcyc = cycle_capacity(params, cycle_life, cum, d)
        cact = min(qcal, qcyc) if calendar else qcyc
        states.append(DegradationState(day=d, q_cal=qcal, q_cyc=qcyc, c_act=cact,
                                       cumulative_charge=cum))
        if i < days:
            cum += float(daily[i])
    return states


# -- CSV interfaces -------------------------------------------------------------

CURVE_COLUMNS = ("kind", "bin_lo", "bin_hi", "piece_index", "piece_width_mw", "slope",
                 "bin_max_power_mw")


def load_curves(path: str | Path) -> BatteryCurves:
    path = Path(path)
    rows: dict[tuple[str, float, float], dict] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CURVE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                kind = rec["kind"].strip()
                if kind not in (CHARGE, DISCHARGE):
                    raise ValueError(f"kind must be charge/discharge, got {kind!r}")
                key = (kind, float(rec["bin_lo"]), float(rec["bin_hi"]))
                entry = rows.setdefault(key, {"max": float(rec["bin_max_power_mw"]), "pieces": {}})
                entry["pieces"][int(rec["piece_index"])] = (
                    float(rec["piece_width_mw"]), float(rec["slope"]))
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path} line {lineno}: {exc}") from None
    edges = sorted({k[1] for k in rows} | {k[2] for k in rows})

    def collect(kind):
        widths, slopes, maxima = [], [], []
        for lo, hi in zip(edges, edges[1:]):
            entry = rows.get((kind, lo, hi))
            if entry is None:
                raise DataError(f"{path}: no {kind} curve for bin [{lo}, {hi}]")
            ordered = [entry["pieces"][i] for i in sorted(entry["pieces"])]
            widths.append(tuple(p[0] for p in ordered))
            slopes.append(tuple(p[1] for p in ordered))
            maxima.append(entry["max"])
        return tuple(widths), tuple(slopes), tuple(maxima)

    dw, ds, dm = collect(DISCHARGE)
    cw, cs, cm = collect(CHARGE)
    return BatteryCurves(tuple(edges), dw, ds, cw, cs, dm, cm)


def write_curves(curves: BatteryCurves, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for mode in (DISCHARGE, CHARGE):
            widths, slopes, maxima = curves.pieces(mode)
            for k in range(curves.K):
                for i, (wd, b) in enumerate(zip(widths[k], slopes[k])):
                    w.writerow([mode, repr(curves.soc_bins[k]), repr(curves.soc_bins[k + 1]), i,
                                repr(wd), repr(b), repr(maxima[k])])


def load_cycle_life(path: str | Path) -> CycleLifeTable:
    path = Path(path)
    dods, lives = [], []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or {"dod", "cycle_life"} - set(reader.fieldnames):
            raise DataError(f"{path}: need columns dod, cycle_life")
        for lineno, rec in enumerate(reader, start=2):
            try:
                dods.append(float(rec["dod"]))
                lives.append(float(rec["cycle_life"]))
            except (ValueError, TypeError):
                raise DataError(f"{path} line {lineno}: non-numeric value") from None
    order = np.argsort(dods, kind="stable")
    return CycleLifeTable(tuple(dods[i] for i in order), tuple(lives[i] for i in order))


def write_cycle_life(table: CycleLifeTable, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dod", "cycle_life"])
        for x, y in zip(table.dod, table.cycle_life):
            w.writerow([repr(x), repr(y)])


def constant_loss_slopes(round_trip_efficiency: float) -> tuple[float, float]:
    """(discharge, charge) loss per MW stored or released at constant efficiency.

    With one-way efficiency eta = sqrt(round trip), discharging P delivers
    eta*P and charging P draws P/eta, so the losses are (1 - eta)*P and
    (1/eta - 1)*P and the round trip is exactly ``round_trip_efficiency``.
    """
    eta = math.sqrt(round_trip_efficiency)
    return 1.0 - eta, 1.0 / eta - 1.0
