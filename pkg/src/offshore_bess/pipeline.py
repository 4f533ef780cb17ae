"""Scenario-level solve drivers: full horizon, rolling per-day windows, reports."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from types import MappingProxyType

import numpy as np

from .battery import calendar_capacity
from .builder import DEGRADATION_TIERS, DispatchSolution, Horizon, blocks_for, build
from .model import MilpModel
from .report import RevenueReport, make_report
from .scenario import CableParams, MarketSeries, Scenario, WindSeries
from .solver.bnb import relative_gap, solve_milp
from .solver.options import SolverOptions

log = logging.getLogger("offshore_bess")

_STATUS_RANK = {"optimal": 0, "gap-limit": 1, "time-limit": 2}


@dataclass(frozen=True)
class SolvedModel:
    """A model and the solution found for it (kept for audits)."""

    model: MilpModel
    solution: DispatchSolution


def day_window(scenario: Scenario, day: int, days: int = 1) -> Scenario:
    """Scenario restricted to ``days`` days starting at 1-based ``day``."""
    h0, h1 = 24 * (day - 1), 24 * (day - 1 + days)
    start = datetime.fromisoformat(scenario.market.start) + timedelta(days=day - 1)
    market = MarketSeries(scenario.market.energy_prices[h0:h1],
                          scenario.market.capacity_prices[day - 1:day - 1 + days],
                          start.isoformat())
    wind = WindSeries(scenario.wind.capacity_factors[h0:h1], scenario.wind.installed_capacity,
                      scenario.wind.capacity_credit)
    return replace(scenario, market=market, wind=wind, horizon_mode="full")


def _solve_full(scenario, options, record):
    model = build(scenario)
    sol = solve_milp(model, options, scenario)
    if record is not None:
        record.append(SolvedModel(model, sol))
    return sol


def _solve_rolling(scenario: Scenario, options: SolverOptions, record):
    """One MILP per day, carrying stored energy and cumulative charge forward.

    Degradation tiers add the next day's capacity as a lookahead column and
    charge each window for the fade it causes, so the penalties telescope to
    the fade over the whole horizon.
    """
    degradation = scenario.tier in DEGRADATION_TIERS
    tags = [b.tag for b in blocks_for(scenario)]
    energy = {b.tag: b.params.initial_energy for b in blocks_for(scenario)}
    cum = {g: 0.0 for g in tags}
    ref = {g: 1.0 for g in tags}
    parts: list[DispatchSolution] = []
    for day in range(1, scenario.D + 1):
        sub = day_window(scenario, day)
        horizon = Horizon(start_day=day, cumulative_charge=dict(cum), lookahead=degradation,
                          reference=dict(ref), initial_energy=dict(energy))
        model = build(sub, horizon)
        sol = solve_milp(model, options, sub)
        if record is not None:
            record.append(SolvedModel(model, sol))
        if not sol.ok:
            log.warning("rolling window %d: %s", day, sol.status)
            return replace(sol, T=scenario.T, D=scenario.D)
        parts.append(sol)
        for g in tags:
            cum[g] += float(np.sum(sol.get("P_c" + g)))
            energy[g] = float(sol.get("C" + g)[-1])
            if degradation:
                ref[g] = float(sol.daily["C_act" + g][-1])
    return _stitch(scenario, parts)


def _stitch(scenario: Scenario, parts: list[DispatchSolution]) -> DispatchSolution:
    series = {}
    for sym in parts[0].series:
        series[sym] = np.concatenate([p.series[sym] for p in parts])
    daily = {}
    params = {b.tag: b.params for b in blocks_for(scenario)}
    for sym in parts[0].daily:
        if sym.startswith("Q_cal"):
            continue
        first = [p.daily[sym][0] for p in parts]
        daily[sym] = np.array(first + ([parts[-1].daily[sym][-1]] if parts[-1].daily[sym].size > 1
                                       else []))
    for g, p in params.items():
        if "C_act" + g in daily:
            daily["Q_cal" + g] = np.array([calendar_capacity(p, d + 1)
                                           for d in range(daily["C_act" + g].size)])
    for arr in list(series.values()) + list(daily.values()):
        arr.setflags(write=False)
    objective = float(sum(p.objective for p in parts))
    bound = float(sum(p.bound for p in parts))
    status = max((p.status for p in parts), key=lambda s: _STATUS_RANK.get(s, 0))
    x = np.concatenate([p.x for p in parts])
    x.setflags(write=False)
    first = parts[0]
    return DispatchSolution(status, objective, bound, relative_gap(bound, objective), x,
                            MappingProxyType(series), MappingProxyType(daily),
                            first.cable_capacity, scenario.T, scenario.D, first.tier,
                            first.topology, first.blocks, sum(p.nodes for p in parts),
                            sum(p.elapsed for p in parts))


def solve_scenario(scenario: Scenario, options: SolverOptions | None = None,
                   record: list | None = None) -> DispatchSolution:
    """Build and solve ``scenario`` in its horizon mode.

    Every (model, solution) pair solved along the way is appended to
    ``record`` when one is given.
    """
    scenario.validate()
    options = options or scenario.solver
    if scenario.horizon_mode == "rolling":
        return _solve_rolling(scenario, options, record)
    return _solve_full(scenario, options, record)


def counterfactual(scenario: Scenario, solution: DispatchSolution) -> Scenario:
    """No-battery twin of ``scenario`` with the cable pinned at the solved capacity."""
    cable = replace(scenario.cable, capacity=max(0.0, float(solution.cable_capacity)))
    return replace(scenario, topology="no-battery", cable=cable, horizon_mode="full")


def run_scenario(scenario: Scenario, options: SolverOptions | None = None,
                 record: list | None = None) -> tuple[DispatchSolution, RevenueReport | None]:
    """Solve, solve the wind-only counterfactual and build the revenue report.

    The report is None when no dispatch was found.
    """
    options = options or scenario.solver
    sol = solve_scenario(scenario, options, record)
    if not sol.ok:
        return sol, None
    base = None
    if scenario.topology != "no-battery":
        base = solve_scenario(counterfactual(scenario, sol), options, record)
    return sol, make_report(scenario, sol, base)


def pinned(scenario: Scenario, capacity: float) -> Scenario:
    return replace(scenario, cable=replace(scenario.cable, capacity=capacity))


def lossless(scenario: Scenario) -> Scenario:
    """Cable and onshore line without losses."""
    return replace(scenario, cable=replace(scenario.cable, efficiency=1.0,
                                           powerline_efficiency=1.0))


__all__ = ["CableParams", "SolvedModel", "counterfactual", "day_window", "lossless", "pinned",
           "run_scenario", "solve_scenario"]
