"""Post-solution economics and report files.

Every figure here is recomputed from the dispatch series and the scenario
data, never read back from the solver objective; :func:`reconcile` then
checks the two accounts against each other. Annual cost items (fixed O&M,
investment and cable annuities) are prorated to the horizon by D/365.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .battery import BatteryParams, degradation_path
from .errors import DataError, DomainError

REPORT_FORMATS = ("json", "csv")


def annuity_factor(rate: float, years: int) -> float:
    """Capital recovery factor: the constant yearly payment per unit invested."""
    if rate < 0 or years < 1:
        raise DomainError(f"need rate ≥ 0 and years ≥ 1, got ({rate}, {years})")
    if rate == 0:
        return 1.0 / years
    g = (1.0 + rate) ** years
    return rate * g / (g - 1.0)


def breakeven_cost(annual_battery_revenue: float, capacity_kwh: float, rate: float,
                   years: int) -> float:
    """Largest battery price ($/kWh) that the yearly revenue can pay back."""
    if capacity_kwh <= 0:
        raise DomainError(f"capacity_kwh must be > 0, got {capacity_kwh}")
    return annual_battery_revenue / (annuity_factor(rate, years) * capacity_kwh)


def energy_revenue(solution, prices) -> float:
    """Sum over hours of price times net energy sold."""
    prices = np.asarray(prices, dtype=float)
    es, ep = solution.get("E_s"), solution.get("E_p")
    if prices.shape != es.shape:
        raise DataError(f"{prices.size} prices for a {es.size}-hour dispatch")
    return float(np.dot(prices, es - ep))


def wind_capacity_revenue(wind, capacity_prices) -> float:
    return wind.capacity_credit * wind.installed_capacity * float(np.sum(capacity_prices))


def bess_capacity_revenue_iso(params: BatteryParams, capacity_prices,
                              duration_hours: float = 4.0) -> float:
    """Capacity payment for storage derated by the minimum-duration rule."""
    return params.dod * params.rated_capacity / duration_hours * float(np.sum(capacity_prices))


AVAILABILITY_TOL = 1e-6


def available_hours(params: BatteryParams, soc) -> np.ndarray:
    """k(d): hours per day with SOC strictly above its lower limit.

    A trailing partial day counts only the hours it has.
    """
    soc = np.asarray(soc, dtype=float)
    above = np.zeros(24 * -(-soc.size // 24), dtype=bool)
    above[:soc.size] = soc > params.soc_lower + AVAILABILITY_TOL
    return above.reshape(-1, 24).sum(axis=1)


def bess_capacity_revenue_self(params: BatteryParams, capacity_prices, soc,
                               duration_hours: float = 4.0) -> float:
    """Capacity payment when availability is lost in hours at minimum SOC."""
    k = available_hours(params, soc)
    prices = np.asarray(capacity_prices, dtype=float)
    if k.size != prices.size:
        raise DataError(f"{prices.size} capacity prices for a {k.size}-day SOC series")
    return params.dod * params.rated_capacity / duration_hours * float(np.dot(k / 24.0, prices))


def equivalent_full_cycles(solution, rated_capacity: float) -> float:
    return float(np.sum(solution.total("P_c"))) / rated_capacity


# -- full report -----------------------------------------------------------------

@dataclass(frozen=True)
class RevenueReport:
    """Revenue and cost breakdown of one solved scenario (all $ over the horizon)."""

    name: str
    topology: str
    tier: str
    horizon_mode: str
    status: str
    days: int
    wind_energy_mwh: float
    wind_energy_revenue: float
    wind_capacity_revenue: float
    battery_arbitrage_revenue: float
    battery_capacity_revenue_iso: float
    battery_capacity_revenue_self: float
    battery_capacity_revenue: float
    battery_investment_annuity: float
    cable_annuity: float
    fixed_om: float
    variable_om: float
    capacity_fade_cost: float
    ex_post_fade_cost: float
    total_revenue: float
    total_cost: float
    net_revenue: float
    annual_battery_revenue: float
    breakeven_cost: float
    efc: float
    terminal_c_act: float
    terminal_energy: float
    cable_capacity: float
    objective: float
    gap: float

    def per_mwh(self) -> dict[str, float]:
        """Money fields divided by the wind energy produced."""
        e = self.wind_energy_mwh
        return {k: (getattr(self, k) / e if e > 0 else float("nan")) for k in MONEY_FIELDS}


MONEY_FIELDS = (
    "wind_energy_revenue", "wind_capacity_revenue", "battery_arbitrage_revenue",
    "battery_capacity_revenue_iso", "battery_capacity_revenue_self", "battery_capacity_revenue",
    "battery_investment_annuity", "cable_annuity", "fixed_om", "variable_om",
    "capacity_fade_cost", "ex_post_fade_cost", "total_revenue", "total_cost", "net_revenue",
)

# CSV layout: (section, label, field); revenues, then costs, then totals
TABLE_ROWS = (
    ("revenue", "Wind energy revenue", "wind_energy_revenue"),
    ("revenue", "Wind capacity revenue", "wind_capacity_revenue"),
    ("revenue", "Battery arbitrage revenue", "battery_arbitrage_revenue"),
    ("revenue", "Battery capacity revenue", "battery_capacity_revenue"),
    ("revenue", "Battery capacity revenue (ISO-managed)", "battery_capacity_revenue_iso"),
    ("revenue", "Battery capacity revenue (self-managed)", "battery_capacity_revenue_self"),
    ("cost", "Battery investment annuity", "battery_investment_annuity"),
    ("cost", "Cable annuity", "cable_annuity"),
    ("cost", "Fixed O&M", "fixed_om"),
    ("cost", "Variable O&M", "variable_om"),
    ("cost", "Capacity fade cost", "capacity_fade_cost"),
    ("total", "Total revenue", "total_revenue"),
    ("total", "Total cost", "total_cost"),
    ("total", "Net revenue", "net_revenue"),
    ("battery", "Annual battery revenue", "annual_battery_revenue"),
    ("battery", "Breakeven cost of battery ($/kWh)", "breakeven_cost"),
    ("battery", "Equivalent full cycles", "efc"),
    ("battery", "Terminal C_act", "terminal_c_act"),
    ("battery", "Terminal stored energy (MWh)", "terminal_energy"),
    ("battery", "Ex-post capacity fade cost", "ex_post_fade_cost"),
    ("plant", "Wind energy (MWh)", "wind_energy_mwh"),
    ("plant", "Cable capacity (MW)", "cable_capacity"),
    ("solver", "Objective", "objective"),
    ("solver", "Gap", "gap"),
)
_TEXT_FIELDS = ("name", "topology", "tier", "horizon_mode", "status")


def _block_costs(scenario):
    from .builder import blocks_for

    return blocks_for(scenario)


def fade_cost(scenario, solution) -> float:
    """Degradation penalty as charged in the objective: (1 - C_act) at the last modelled day."""
    total = 0.0
    for b in _block_costs(scenario):
        c_act = solution.daily.get("C_act" + b.tag)
        if c_act is None or c_act.size == 0:
            continue
        total += (1.0 - float(c_act[-1])) * b.params.replacement_cost * b.cost_multiplier * \
            b.params.rated_capacity
    return total


def ex_post_fade_cost(scenario, solution) -> float:
    """Fade cost of the dispatch measured after the horizon, both fade mechanisms applied.

    Used to compare tiers on one footing, including tiers whose model ignores
    degradation.
    """
    total = 0.0
    for b in _block_costs(scenario):
        path = degradation_path(b.params, b.cycle_life, solution.get("P_c" + b.tag))
        total += (1.0 - path[-1].c_act) * b.params.replacement_cost * b.cost_multiplier * \
            b.params.rated_capacity
    return total


def make_report(scenario, solution, counterfactual=None) -> RevenueReport:
    """Revenue report of a solved scenario.

    ``counterfactual`` is the no-battery solution on the same data with the
    cable pinned to ``solution``'s capacity; it separates wind revenue from
    battery arbitrage. It is required for battery topologies.
    """
    if not solution.ok:
        raise DomainError(f"cannot report on a {solution.status} solution")
    frac = scenario.horizon_fraction
    prices = scenario.prices
    cap_prices = np.asarray(scenario.market.capacity_prices, dtype=float)
    total_energy = energy_revenue(solution, prices)
    if scenario.topology == "no-battery":
        wind_energy = total_energy
    else:
        if counterfactual is None or not counterfactual.ok:
            raise DomainError("battery topologies need a solved no-battery counterfactual")
        wind_energy = energy_revenue(counterfactual, prices)
    blocks = _block_costs(scenario)
    hours = scenario.capacity_duration_hours
    cap_iso = sum(bess_capacity_revenue_iso(b.params, cap_prices, hours) for b in blocks)
    cap_self = sum(bess_capacity_revenue_self(b.params, cap_prices, solution.get("S" + b.tag),
                                              hours) for b in blocks)
    cap_batt = cap_iso if scenario.capacity_mode == "iso" else cap_self
    cap_wind = wind_capacity_revenue(scenario.wind, cap_prices)
    ann = annuity_factor(scenario.interest_rate, scenario.recovery_years)
    invest = sum(b.params.investment_cost * 1000.0 * b.params.rated_capacity * b.cost_multiplier
                 for b in blocks) * ann * frac
    fixed = sum(b.params.fixed_om * 1000.0 * b.params.max_discharge_power * b.cost_multiplier
                for b in blocks) * frac
    vom = sum(b.params.variable_om * b.cost_multiplier * float(np.sum(solution.get("P_d" + b.tag)))
              for b in blocks)
    fade = fade_cost(scenario, solution)
    cable_cap = solution.cable_capacity
    cable = cable_cap * scenario.cable.unit_cost * scenario.cable_annuity * frac
    revenue = total_energy + cap_wind + cap_batt
    cost = invest + cable + fixed + vom + fade
    rated = sum(b.params.rated_capacity for b in blocks)
    annual = (total_energy - wind_energy + cap_batt - vom - fade - fixed) / frac
    breakeven = breakeven_cost(annual, rated * 1000.0, scenario.interest_rate,
                               scenario.recovery_years) if rated > 0 else 0.0
    c_act = [float(solution.daily["C_act" + b.tag][-1]) for b in blocks
             if "C_act" + b.tag in solution.daily]
    return RevenueReport(
        name=scenario.name,
        topology=scenario.topology,
        tier=scenario.tier,
        horizon_mode=scenario.horizon_mode,
        status=solution.status,
        days=scenario.D,
        wind_energy_mwh=float(np.sum(scenario.wind_power)),
        wind_energy_revenue=wind_energy,
        wind_capacity_revenue=cap_wind,
        battery_arbitrage_revenue=total_energy - wind_energy,
        battery_capacity_revenue_iso=cap_iso,
        battery_capacity_revenue_self=cap_self,
        battery_capacity_revenue=cap_batt,
        battery_investment_annuity=invest,
        cable_annuity=cable,
        fixed_om=fixed,
        variable_om=vom,
        capacity_fade_cost=fade,
        ex_post_fade_cost=ex_post_fade_cost(scenario, solution) if blocks else 0.0,
        total_revenue=revenue,
        total_cost=cost,
        net_revenue=revenue - cost,
        annual_battery_revenue=annual,
        breakeven_cost=breakeven,
        efc=equivalent_full_cycles(solution, rated) if rated > 0 else 0.0,
        terminal_c_act=min(c_act) if c_act else 1.0,
        terminal_energy=float(sum(solution.get("C" + b.tag)[-1] for b in blocks)),
        cable_capacity=cable_cap,
        objective=solution.objective,
        gap=solution.gap,
    )


def reconcile(report: RevenueReport) -> float:
    """Relative mismatch between the recomputed net revenue and the objective.

    The objective leaves out capacity revenues, fixed O&M and the battery
    investment annuity; those are added back before comparing.
    """
    expected = (report.objective + report.wind_capacity_revenue + report.battery_capacity_revenue
                - report.fixed_om - report.battery_investment_annuity)
    return abs(report.net_revenue - expected) / max(1.0, abs(expected))


# -- emission --------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def report_dict(report: RevenueReport) -> dict:
    d = {k: _jsonable(v) for k, v in asdict(report).items()}
    d["per_mwh_wind"] = {k: _jsonable(v) for k, v in report.per_mwh().items()}
    return d


def emit_report(report: RevenueReport, fmt: str, path: str | Path) -> Path:
    """Write ``report`` as JSON or as a CSV laid out like a revenue/cost table."""
    if fmt not in REPORT_FORMATS:
        raise DomainError(f"format must be one of {REPORT_FORMATS}, got {fmt!r}")
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report_dict(report), indent=2) + "\n")
        return path
    per = report.per_mwh()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["section", "item", "field", "value", "per_mwh_wind"])
        for f in _TEXT_FIELDS:
            w.writerow(["info", f, f, getattr(report, f), ""])
        w.writerow(["info", "days", "days", report.days, ""])
        for section, label, f in TABLE_ROWS:
            v = getattr(report, f)
            w.writerow([section, label, f, repr(float(v)),
                        repr(per[f]) if f in per else ""])
    return path


def load_report(path: str | Path) -> RevenueReport:
    """Parse a report written by :func:`emit_report` (either format)."""
    path = Path(path)
    values: dict = {}
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        for f in fields(RevenueReport):
            v = doc[f.name]
            values[f.name] = float(v) if isinstance(v, str) and f.name not in _TEXT_FIELDS else v
    else:
        with path.open(newline="") as fh:
            for rec in csv.DictReader(fh):
                values[rec["field"]] = rec["value"]
        for f in fields(RevenueReport):
            if f.name == "days":
                values[f.name] = int(values[f.name])
            elif f.name not in _TEXT_FIELDS:
                values[f.name] = float(values[f.name])
    return RevenueReport(**values)


DISPATCH_COLUMNS = ("hour", "price", "wind", "P_c", "P_d", "P_closs", "P_dloss", "E_s", "E_p",
                    "P_curt", "P_cab")


def write_dispatch_csv(scenario, solution, path: str | Path) -> Path:
    """Hourly trace: market, wind, battery totals and each block's SOC and energy."""
    path = Path(path)
    blocks = solution.blocks
    soc_cols = [f"SOC{('_' + g) if g else ''}" for g in blocks]
    energy_cols = [f"C{('_' + g) if g else ''}" for g in blocks]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(DISPATCH_COLUMNS) + soc_cols + energy_cols)
        wind = scenario.wind_power
        cols = {s: solution.total(s) if blocks else np.zeros(solution.T)
                for s in ("P_c", "P_d", "P_closs", "P_dloss")}
        for s in ("E_s", "E_p", "P_curt", "P_cab"):
            cols[s] = solution.get(s)
        for t in range(solution.T):
            row = [t + 1, repr(float(scenario.prices[t])), repr(float(wind[t]))]
            row += [repr(float(cols[s][t])) for s in DISPATCH_COLUMNS[3:]]
            row += [repr(float(solution.get("S" + g)[t])) for g in blocks]
            row += [repr(float(solution.get("C" + g)[t])) for g in blocks]
            w.writerow(row)
    return path
