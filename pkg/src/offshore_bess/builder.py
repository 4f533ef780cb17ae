"""Translate a :class:`Scenario` into a :class:`MilpModel`.

Column and row names follow the dispatch symbols (``P_d(t)``, ``w_d(t,l,k)``,
``U(t,k)``, ``C_act(d)`` ...) with the hybrid block tag appended to the
symbol (``P_dN(t)``, ``P_dF(t)``). Time, piece and bin indices are 1-based.
All power and energy columns carry finite physical bounds derived from the
data so that the LP core never needs artificial bounds on a built model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .battery import (
    BatteryCurves,
    BatteryParams,
    calendar_capacity,
    cycle_fade_rate,
    cycle_life_for_dod,
    constant_loss_slopes,
)
from .errors import BuildError, ExtractionError
from .model import MilpModel, ModelBuilder
from .scenario import Scenario

DEGRADATION_TIERS = ("cycling-degradation", "calendar-degradation")


@dataclass(frozen=True)
class Block:
    """One battery as seen by the model: its tag, location and scaled data."""

    tag: str
    location: str
    params: BatteryParams
    curves: BatteryCurves
    cost_multiplier: float
    cycle_life: float


@dataclass(frozen=True)
class Horizon:
    """Where a model's window sits inside a longer run (rolling mode).

    ``start_day`` is the global index of the window's first day and
    ``cumulative_charge`` the energy each block charged before it. With
    ``lookahead`` the degradation penalty is taken on the capacity at the
    start of the day after the window, measured from ``reference``.
    ``initial_energy`` overrides each block's stored energy at the start.
    """

    start_day: int = 1
    cumulative_charge: Mapping[str, float] = field(default_factory=dict)
    initial_energy: Mapping[str, float] = field(default_factory=dict)
    lookahead: bool = False
    reference: Mapping[str, float] = field(default_factory=dict)


def blocks_for(scenario: Scenario) -> list[Block]:
    """Battery blocks implied by the topology (hybrid: N onshore, F offshore)."""
    p, curves = scenario.battery, scenario.curves
    mult = p.offshore_cost_multiplier
    life = cycle_life_for_dod(scenario.cycle_life, p.dod)
    if scenario.topology == "no-battery":
        return []
    if scenario.topology == "onshore":
        return [Block("", "onshore", p, curves, 1.0, life)]
    if scenario.topology == "offshore":
        return [Block("", "offshore", p, curves, mult, life)]
    out = []
    split = scenario.hybrid_split
    if split > 0:
        out.append(Block("N", "onshore", p.scaled(split), curves.scaled(split), 1.0, life))
    if split < 1:
        out.append(Block("F", "offshore", p.scaled(1 - split), curves.scaled(1 - split), mult,
                         life))
    return out


class _Ctx:
    """Index bookkeeping while a model is being assembled."""

    def __init__(self, scenario: Scenario, horizon: Horizon):
        self.sc = scenario
        self.h = horizon
        self.mb = ModelBuilder(scenario.name)
        self.T = scenario.T
        self.D = scenario.D
        self.tier = scenario.tier
        self.dynamic = scenario.tier != "basic"
        self.degradation = scenario.tier in DEGRADATION_TIERS
        self.calendar = scenario.tier == "calendar-degradation"
        self.wind = scenario.wind_power
        self.prices = scenario.prices
        self.blocks = blocks_for(scenario)
        self.cols: dict[str, dict] = {}
        self.big_m: dict[str, float] = {}
        self.cable_free = scenario.cable.capacity is None

    def c(self, symbol, *index):
        return self.mb.col(symbol + "(" + ",".join(str(i) for i in index) + ")")

    def day(self, t: int) -> int:
        return (t - 1) // 24 + 1


def _pmax(block: Block, dynamic: bool) -> tuple[float, float]:
    if dynamic:
        return max(block.curves.discharge_max), max(block.curves.charge_max)
    return block.params.max_discharge_power, block.params.max_charge_power


def _charge_energy_bound(ctx: _Ctx, blocks) -> float:
    """Upper bound on P_c + P_c^loss summed over ``blocks`` (loss < power)."""
    return sum(2.0 * _pmax(b, ctx.dynamic)[1] for b in blocks)


# -- shared columns --------------------------------------------------------------

def _add_cable(ctx: _Ctx, flow_lo: np.ndarray, flow_hi: np.ndarray) -> None:
    """P_cab(t) columns, plus C_cab and capacity rows when the cable is free."""
    mb, sc = ctx.mb, ctx.sc
    cost = sc.cable.unit_cost * sc.cable_annuity * sc.horizon_fraction
    pinned = sc.cable.capacity
    for t in range(1, ctx.T + 1):
        lo, hi = flow_lo[t - 1], flow_hi[t - 1]
        if pinned is not None:
            lo, hi = max(lo, -pinned), min(hi, pinned)
        mb.add_col("P_cab", (t,), lo, hi)
    if pinned is not None:
        mb.constant -= pinned * cost
        return
    cap_ub = float(max(np.max(np.abs(flow_lo)), np.max(np.abs(flow_hi)), 0.0))
    jc = mb.add_col("C_cab", (), 0.0, cap_ub, cost=-cost)
    for t in range(1, ctx.T + 1):
        mb.add_row("cable_cap", (t,), [(ctx.c("P_cab", t), 1.0), (jc, -1.0)], "L", 0.0)
        if flow_lo[t - 1] < 0:
            mb.add_row("cable_cap_rev", (t,), [(ctx.c("P_cab", t), -1.0), (jc, -1.0)], "L", 0.0)


def _curt_ub(ctx: _Ctx, t: int) -> float:
    return float(ctx.wind[t - 1]) if ctx.sc.cable.allow_curtailment else 0.0


def _add_market_columns(ctx: _Ctx, es_hi, ep_hi) -> None:
    for t in range(1, ctx.T + 1):
        ctx.mb.add_col("E_s", (t,), 0.0, es_hi[t - 1], cost=float(ctx.prices[t - 1]))
    if ep_hi is not None:
        for t in range(1, ctx.T + 1):
            ctx.mb.add_col("E_p", (t,), 0.0, ep_hi[t - 1], cost=-float(ctx.prices[t - 1]))


def add_no_battery_balance(ctx: _Ctx) -> None:
    """Wind sale only: E_s = eta_pl·P_s, P_s = eta_cab·P_cab, P_W = P_cab + P_curt."""
    sc, mb, W = ctx.sc, ctx.mb, ctx.wind
    eta_c, eta_p = sc.cable.efficiency, sc.cable.powerline_efficiency
    _add_market_columns(ctx, eta_p * eta_c * W, None)
    for t in range(1, ctx.T + 1):
        mb.add_col("P_s", (t,), 0.0, eta_c * W[t - 1])
        mb.add_col("P_curt", (t,), 0.0, _curt_ub(ctx, t))
    _add_cable(ctx, np.zeros(ctx.T), W.copy())
    for t in range(1, ctx.T + 1):
        mb.add_row("sale", (t,), [(ctx.c("E_s", t), 1.0), (ctx.c("P_s", t), -eta_p)], "E", 0.0)
        mb.add_row("cable_out", (t,), [(ctx.c("P_s", t), 1.0), (ctx.c("P_cab", t), -eta_c)],
                   "E", 0.0)
        mb.add_row("wind_split", (t,), [(ctx.c("P_cab", t), 1.0), (ctx.c("P_curt", t), 1.0)],
                   "E", float(W[t - 1]))


def add_onshore_balance(ctx: _Ctx) -> None:
    """Battery behind the cable: sale, purchase, offshore and onshore balances."""
    sc, mb, W = ctx.sc, ctx.mb, ctx.wind
    (b,) = ctx.blocks
    eta_c, eta_p = sc.cable.efficiency, sc.cable.powerline_efficiency
    pd, _ = _pmax(b, ctx.dynamic)
    _add_market_columns(ctx, eta_p * (pd + eta_c * W),
                        np.full(ctx.T, _charge_energy_bound(ctx, [b]) / eta_p))
    for t in range(1, ctx.T + 1):
        mb.add_col("P_s", (t,), 0.0, eta_c * W[t - 1])
        mb.add_col("P_cW", (t,), 0.0, eta_c * W[t - 1])
        mb.add_col("P_curt", (t,), 0.0, _curt_ub(ctx, t))
    _add_cable(ctx, np.zeros(ctx.T), W.copy())
    _add_battery_columns(ctx, b)
    for t in range(1, ctx.T + 1):
        mb.add_row("sale", (t,), [
            (ctx.c("E_s", t), 1.0), (ctx.c("P_d", t), -eta_p), (ctx.c("P_dloss", t), eta_p),
            (ctx.c("P_s", t), -eta_p)], "E", 0.0)
        mb.add_row("purchase", (t,), [
            (ctx.c("E_p", t), eta_p), (ctx.c("P_c", t), -1.0), (ctx.c("P_closs", t), -1.0),
            (ctx.c("P_cW", t), 1.0)], "E", 0.0)
        mb.add_row("wind_split", (t,), [(ctx.c("P_cab", t), 1.0), (ctx.c("P_curt", t), 1.0)],
                   "E", float(W[t - 1]))
        mb.add_row("shore_split", (t,), [
            (ctx.c("P_cW", t), 1.0), (ctx.c("P_cab", t), -eta_c), (ctx.c("P_s", t), 1.0)],
            "E", 0.0)


def add_offshore_balance(ctx: _Ctx) -> None:
    """Battery at the wind farm: everything sold or bought crosses the cable.

    Cable flow is signed here (negative when the grid charges the battery).
    """
    sc, mb, W = ctx.sc, ctx.mb, ctx.wind
    (b,) = ctx.blocks
    eta = sc.cable.efficiency * sc.cable.powerline_efficiency
    pd, _ = _pmax(b, ctx.dynamic)
    ep_hi = _charge_energy_bound(ctx, [b]) / eta
    _add_market_columns(ctx, eta * (pd + W), np.full(ctx.T, ep_hi))
    for t in range(1, ctx.T + 1):
        mb.add_col("P_s", (t,), 0.0, W[t - 1])
        mb.add_col("P_cW", (t,), 0.0, W[t - 1])
        mb.add_col("P_curt", (t,), 0.0, _curt_ub(ctx, t))
    _add_cable(ctx, np.full(ctx.T, -ep_hi / eta), pd + W)
    _add_battery_columns(ctx, b)
    for t in range(1, ctx.T + 1):
        mb.add_row("sale", (t,), [
            (ctx.c("E_s", t), 1.0), (ctx.c("P_d", t), -eta), (ctx.c("P_dloss", t), eta),
            (ctx.c("P_s", t), -eta)], "E", 0.0)
        mb.add_row("purchase", (t,), [
            (ctx.c("E_p", t), eta), (ctx.c("P_c", t), -1.0), (ctx.c("P_closs", t), -1.0),
            (ctx.c("P_cW", t), 1.0)], "E", 0.0)
        mb.add_row("wind_split", (t,), [
            (ctx.c("P_cW", t), 1.0), (ctx.c("P_s", t), 1.0), (ctx.c("P_curt", t), 1.0)],
            "E", float(W[t - 1]))
        mb.add_row("cable_flow", (t,), [
            (ctx.c("P_cab", t), eta), (ctx.c("E_s", t), -1.0), (ctx.c("E_p", t), 1.0)],
            "E", 0.0)


def add_hybrid_balance(ctx: _Ctx) -> None:
    """Onshore block N and offshore block F sharing one cable.

    A block sized to zero capacity is left out together with its wind
    charging column; P_sN and P_sF always exist.
    """
    sc, mb, W = ctx.sc, ctx.mb, ctx.wind
    eta_c, eta_p = sc.cable.efficiency, sc.cable.powerline_efficiency
    blocks = {b.tag: b for b in ctx.blocks}
    N, F = blocks.get("N"), blocks.get("F")
    pdN = _pmax(N, ctx.dynamic)[0] if N else 0.0
    pdF = _pmax(F, ctx.dynamic)[0] if F else 0.0
    cab_hi = pdF + W
    ep_hi = ((_charge_energy_bound(ctx, [N]) if N else 0.0)
             + (_charge_energy_bound(ctx, [F]) / eta_c if F else 0.0)) / eta_p
    _add_market_columns(ctx, eta_p * (pdN + eta_c * cab_hi), np.full(ctx.T, ep_hi))
    for t in range(1, ctx.T + 1):
        mb.add_col("P_sN", (t,), 0.0, eta_c * cab_hi[t - 1])
        mb.add_col("P_sF", (t,), 0.0, W[t - 1])
        if N:
            mb.add_col("P_cWN", (t,), 0.0, eta_c * cab_hi[t - 1])
        if F:
            mb.add_col("P_cWF", (t,), 0.0, W[t - 1])
        mb.add_col("P_curt", (t,), 0.0, _curt_ub(ctx, t))
    _add_cable(ctx, np.zeros(ctx.T), cab_hi)
    for b in ctx.blocks:
        _add_battery_columns(ctx, b)
    for t in range(1, ctx.T + 1):
        terms = [(ctx.c("E_s", t), 1.0), (ctx.c("P_sN", t), -eta_p)]
        if N:
            terms += [(ctx.c("P_dN", t), -eta_p), (ctx.c("P_dlossN", t), eta_p)]
        mb.add_row("sale", (t,), terms, "E", 0.0)
        terms = [(ctx.c("E_p", t), eta_p)]
        if N:
            terms += [(ctx.c("P_cN", t), -1.0), (ctx.c("P_clossN", t), -1.0),
                      (ctx.c("P_cWN", t), 1.0)]
        if F:
            terms += [(ctx.c("P_cF", t), -1.0 / eta_c), (ctx.c("P_clossF", t), -1.0 / eta_c),
                      (ctx.c("P_cWF", t), 1.0 / eta_c)]
        mb.add_row("purchase", (t,), terms, "E", 0.0)
        terms = [(ctx.c("P_sF", t), 1.0), (ctx.c("P_curt", t), 1.0)]
        if F:
            terms.append((ctx.c("P_cWF", t), 1.0))
        mb.add_row("wind_split", (t,), terms, "E", float(W[t - 1]))
        terms = [(ctx.c("P_cab", t), 1.0), (ctx.c("P_sF", t), -1.0)]
        if F:
            terms += [(ctx.c("P_dF", t), -1.0), (ctx.c("P_dlossF", t), 1.0)]
        mb.add_row("cable_flow", (t,), terms, "E", 0.0)
        terms = [(ctx.c("P_cab", t), -eta_c), (ctx.c("P_sN", t), 1.0)]
        if N:
            terms.append((ctx.c("P_cWN", t), 1.0))
        mb.add_row("shore_split", (t,), terms, "E", 0.0)


# -- battery blocks --------------------------------------------------------------

def _add_battery_columns(ctx: _Ctx, b: Block) -> None:
    """Columns of one battery block, cost terms included."""
    mb, g, p, cv = ctx.mb, b.tag, b.params, b.curves
    pd, pc = _pmax(b, ctx.dynamic)
    vom = p.variable_om * b.cost_multiplier
    q_hi = p.initial_capacity if ctx.degradation else 1.0
    c_lo = 0.0 if ctx.degradation else p.rated_capacity * p.soc_lower
    c_hi = p.rated_capacity * p.soc_upper * q_hi
    for t in range(1, ctx.T + 1):
        mb.add_col("P_d" + g, (t,), 0.0, pd, block=g, cost=-vom)
        mb.add_col("P_dloss" + g, (t,), 0.0, pd, block=g)
        mb.add_col("P_c" + g, (t,), 0.0, pc, block=g)
        mb.add_col("P_closs" + g, (t,), 0.0, pc, block=g)
        mb.add_col("C" + g, (t,), c_lo, c_hi, block=g)
        mb.add_col("S" + g, (t,), p.soc_lower, p.soc_upper, block=g)
        mb.add_col("B" + g, (t,), binary=True, block=g)
        if ctx.dynamic:
            mb.add_col("alpha_d" + g, (t,), 0.0, pd, block=g)
            mb.add_col("alpha_c" + g, (t,), 0.0, pc, block=g)
            for k in range(1, cv.K + 1):
                for l in range(1, cv.L + 1):
                    mb.add_col("w_d" + g, (t, l, k), 0.0, cv.discharge_widths[k - 1][l - 1],
                               block=g)
                for n in range(1, cv.N + 1):
                    mb.add_col("w_c" + g, (t, n, k), 0.0, cv.charge_widths[k - 1][n - 1],
                               block=g)
                mb.add_col("U" + g, (t, k), binary=True, block=g)
    if ctx.degradation:
        days = ctx.D + (1 if ctx.h.lookahead else 0)
        for d in range(1, days + 1):
            mb.add_col("C_act" + g, (d,), 0.0, p.initial_capacity, block=g)
            mb.add_col("Q_cyc" + g, (d,), 0.0, p.initial_capacity, block=g)
        gamma = p.replacement_cost * b.cost_multiplier * p.rated_capacity
        ref = ctx.h.reference.get(g, 1.0)
        mb.add_cost(ctx.c("C_act" + g, days), gamma)
        mb.constant -= gamma * ref


def add_cycling_constraints(ctx: _Ctx, b: Block) -> None:
    """Exclusivity, energy/SOC recursions, power limits and loss pieces."""
    mb, g, p, cv = ctx.mb, b.tag, b.params, b.curves
    pd, pc = _pmax(b, ctx.dynamic)
    c0 = ctx.h.initial_energy.get(g, p.initial_energy)
    for t in range(1, ctx.T + 1):
        Pd, Pdl = ctx.c("P_d" + g, t), ctx.c("P_dloss" + g, t)
        Pc, Pcl = ctx.c("P_c" + g, t), ctx.c("P_closs" + g, t)
        C, S, B = ctx.c("C" + g, t), ctx.c("S" + g, t), ctx.c("B" + g, t)
        mb.add_row("dis_excl" + g, (t,), [(Pd, 1.0), (B, -pd)], "L", 0.0)
        mb.add_row("chg_excl" + g, (t,), [(Pc, 1.0), (B, pc)], "L", pc)
        mb.add_row("dis_loss_excl" + g, (t,), [(Pdl, 1.0), (B, -pd)], "L", 0.0)
        mb.add_row("chg_loss_excl" + g, (t,), [(Pcl, 1.0), (B, pc)], "L", pc)
        if t == 1:
            mb.add_row("energy" + g, (t,), [(C, 1.0), (Pd, 1.0), (Pc, -1.0)], "E", c0)
            mb.add_row("soc" + g, (t,), [(S, 2.0 * p.rated_capacity), (C, -1.0)], "E", c0)
        else:
            Cp = ctx.c("C" + g, t - 1)
            mb.add_row("energy" + g, (t,), [(C, 1.0), (Cp, -1.0), (Pd, 1.0), (Pc, -1.0)], "E",
                       0.0)
            mb.add_row("soc" + g, (t,), [(S, 2.0 * p.rated_capacity), (C, -1.0), (Cp, -1.0)],
                       "E", 0.0)
        if not ctx.dynamic:
            sd, sc = constant_loss_slopes(ctx.sc.round_trip_efficiency)
            mb.add_row("dis_loss" + g, (t,), [(Pdl, 1.0), (Pd, -sd)], "E", 0.0)
            mb.add_row("chg_loss" + g, (t,), [(Pcl, 1.0), (Pc, -sc)], "E", 0.0)
            continue
        ad, ac = ctx.c("alpha_d" + g, t), ctx.c("alpha_c" + g, t)
        mb.add_row("dis_limit" + g, (t,), [(Pd, 1.0), (ad, -1.0)], "L", 0.0)
        mb.add_row("chg_limit" + g, (t,), [(Pc, 1.0), (ac, -1.0)], "L", 0.0)
        U = [ctx.c("U" + g, t, k) for k in range(1, cv.K + 1)]
        wd = {(l, k): ctx.c("w_d" + g, t, l, k)
              for k in range(1, cv.K + 1) for l in range(1, cv.L + 1)}
        wc = {(n, k): ctx.c("w_c" + g, t, n, k)
              for k in range(1, cv.K + 1) for n in range(1, cv.N + 1)}
        mb.add_row("dis_loss" + g, (t,), [(Pdl, 1.0)] + [
            (j, -cv.discharge_slopes[k - 1][l - 1]) for (l, k), j in wd.items()], "E", 0.0)
        mb.add_row("chg_loss" + g, (t,), [(Pcl, 1.0)] + [
            (j, -cv.charge_slopes[k - 1][n - 1]) for (n, k), j in wc.items()], "E", 0.0)
        if not ctx.degradation:
            m = ctx.big_m[g]
            for k in range(1, cv.K + 1):
                u, dmax, cmax = U[k - 1], cv.discharge_max[k - 1], cv.charge_max[k - 1]
                mb.add_row("dis_max_up" + g, (t, k), [(ad, 1.0), (u, m)], "L", dmax + m)
                mb.add_row("dis_max_lo" + g, (t, k), [(ad, 1.0), (u, -m)], "G", dmax - m)
                mb.add_row("chg_max_up" + g, (t, k), [(ac, 1.0), (u, m)], "L", cmax + m)
                mb.add_row("chg_max_lo" + g, (t, k), [(ac, 1.0), (u, -m)], "G", cmax - m)
        mb.add_row("dis_pieces" + g, (t,), [(j, 1.0) for j in wd.values()] + [(Pd, -1.0)],
                   "E", 0.0)
        mb.add_row("chg_pieces" + g, (t,), [(j, 1.0) for j in wc.values()] + [(Pc, -1.0)],
                   "E", 0.0)
        for (l, k), j in wd.items():
            mb.add_row("dis_piece_on" + g, (t, l, k),
                       [(j, 1.0), (U[k - 1], -cv.discharge_widths[k - 1][l - 1])], "L", 0.0)
        for (n, k), j in wc.items():
            mb.add_row("chg_piece_on" + g, (t, n, k),
                       [(j, 1.0), (U[k - 1], -cv.charge_widths[k - 1][n - 1])], "L", 0.0)
        beta = cv.soc_bins
        mb.add_row("bin_up" + g, (t,), [(S, 1.0)] + [(U[k], -beta[k + 1]) for k in range(cv.K)],
                   "L", 0.0)
        mb.add_row("bin_lo" + g, (t,), [(S, 1.0)] + [(U[k], -beta[k]) for k in range(cv.K)],
                   "G", 0.0)
        mb.add_row("one_bin" + g, (t,), [(u, 1.0) for u in U], "E", 1.0)


def add_degradation_constraints(ctx: _Ctx, b: Block) -> None:
    """Cycling fade, capacity window, faded power limits and calendar cap."""
    mb, g, p, cv = ctx.mb, b.tag, b.params, b.curves
    days = ctx.D + (1 if ctx.h.lookahead else 0)
    rate = cycle_fade_rate(p, b.cycle_life)
    cum0 = ctx.h.cumulative_charge.get(g, 0.0)
    for d in range(1, days + 1):
        gday = ctx.h.start_day + d - 1
        q = ctx.c("Q_cyc" + g, d)
        if gday == 1:
            mb.add_row("cyc_fade" + g, (d,), [(q, 1.0)], "E", p.initial_capacity)
        else:
            terms = [(q, 1.0)] + [(ctx.c("P_c" + g, t), rate)
                                  for t in range(1, min(24 * (d - 1), ctx.T) + 1)]
            mb.add_row("cyc_fade" + g, (d,), terms, "E", p.initial_capacity - rate * cum0)
        mb.add_row("cap_cyc" + g, (d,), [(ctx.c("C_act" + g, d), 1.0), (q, -1.0)], "L", 0.0)
        if ctx.calendar:
            mb.add_row("cap_cal" + g, (d,), [(ctx.c("C_act" + g, d), 1.0)], "L",
                       calendar_capacity(p, gday))
    m = ctx.big_m[g]
    for t in range(1, ctx.T + 1):
        ca = ctx.c("C_act" + g, ctx.day(t))
        C = ctx.c("C" + g, t)
        mb.add_row("window_up" + g, (t,), [(C, 1.0), (ca, -p.rated_capacity * p.soc_upper)],
                   "L", 0.0)
        mb.add_row("window_lo" + g, (t,), [(C, 1.0), (ca, -p.rated_capacity * p.soc_lower)],
                   "G", 0.0)
        ad, ac = ctx.c("alpha_d" + g, t), ctx.c("alpha_c" + g, t)
        for k in range(1, cv.K + 1):
            u, dmax, cmax = ctx.c("U" + g, t, k), cv.discharge_max[k - 1], cv.charge_max[k - 1]
            mb.add_row("dis_max_up" + g, (t, k), [(ad, 1.0), (ca, -dmax), (u, m)], "L", m)
            mb.add_row("dis_max_lo" + g, (t, k), [(ad, 1.0), (ca, -dmax), (u, -m)], "G", -m)
            mb.add_row("chg_max_up" + g, (t, k), [(ac, 1.0), (ca, -cmax), (u, m)], "L", m)
            mb.add_row("chg_max_lo" + g, (t, k), [(ac, 1.0), (ca, -cmax), (u, -m)], "G", -m)


def big_m(curves: BatteryCurves) -> float:
    """Smallest valid constant for the bin-selection rows: max piece sum + 1."""
    sums = [sum(w) for w in curves.discharge_widths] + [sum(w) for w in curves.charge_widths]
    return max(sums) + 1.0


def build(scenario: Scenario, horizon: Horizon | None = None) -> MilpModel:
    """Assemble the dispatch MILP for ``scenario`` (maximization)."""
    problems = scenario.violations()
    if problems:
        raise BuildError("; ".join(problems))
    horizon = horizon or Horizon()
    ctx = _Ctx(scenario, horizon)
    if scenario.topology == "hybrid" and not ctx.blocks:
        raise BuildError("hybrid topology needs a battery with positive capacity")
    for b in ctx.blocks:
        ctx.big_m[b.tag] = big_m(b.curves)
    if scenario.topology == "no-battery":
        add_no_battery_balance(ctx)
    elif scenario.topology == "onshore":
        add_onshore_balance(ctx)
    elif scenario.topology == "offshore":
        add_offshore_balance(ctx)
    else:
        add_hybrid_balance(ctx)
    for b in ctx.blocks:
        add_cycling_constraints(ctx, b)
        if ctx.degradation:
            add_degradation_constraints(ctx, b)
    cv = scenario.curves
    meta = {
        "topology": scenario.topology,
        "tier": scenario.tier,
        "T": ctx.T,
        "D": ctx.D,
        "K": cv.K if ctx.dynamic else 1,
        "L": cv.L if ctx.dynamic else 1,
        "N": cv.N if ctx.dynamic else 1,
        "big_m": dict(ctx.big_m),
        "blocks": tuple(b.tag for b in ctx.blocks),
        "cable_free": ctx.cable_free,
        "start_day": horizon.start_day,
        "lookahead": horizon.lookahead,
    }
    return ctx.mb.finish(meta)


# -- solutions -------------------------------------------------------------------

STATUSES = ("optimal", "gap-limit", "time-limit", "node-limit", "infeasible")


@dataclass(frozen=True, eq=False)
class DispatchSolution:
    """Named dispatch series recovered from a column vector.

    ``series`` maps column symbols (``P_d``, ``P_dN``, ``w_d`` ...) to arrays
    indexed like the columns (hour, then piece and bin). ``daily`` holds
    C_act, Q_cyc and the calendar constants Q_cal per block.
    """

    status: str
    objective: float
    bound: float
    gap: float
    x: np.ndarray | None
    series: Mapping[str, np.ndarray]
    daily: Mapping[str, np.ndarray]
    cable_capacity: float
    T: int
    D: int
    tier: str
    topology: str
    blocks: tuple[str, ...] = ()
    nodes: int = 0
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return self.x is not None

    def get(self, symbol: str) -> np.ndarray:
        """Hourly series for ``symbol``; zeros when the model has no such column."""
        if symbol in self.series:
            return self.series[symbol]
        return np.zeros(self.T)

    def total(self, symbol: str) -> np.ndarray:
        """Sum of ``symbol`` over all battery blocks."""
        out = np.zeros(self.T)
        for g in self.blocks:
            out = out + self.get(symbol + g)
        return out


def infeasible_solution(model: MilpModel, status: str = "infeasible", **kw) -> DispatchSolution:
    m = model.meta
    return DispatchSolution(status, float("nan"), kw.pop("bound", float("nan")), float("inf"),
                            None, MappingProxyType({}), MappingProxyType({}), float("nan"),
                            m["T"], m["D"], m["tier"], m["topology"], tuple(m["blocks"]), **kw)


def extract_solution(model: MilpModel, x, *, objective: float | None = None,
                     status: str = "optimal", bound: float | None = None, gap: float = 0.0,
                     scenario: Scenario | None = None, tol: float = 1e-6,
                     nodes: int = 0, elapsed: float = 0.0) -> DispatchSolution:
    """Validate raw column values and split them into named series.

    Bounds are checked to ``tol`` and values nudged onto them, binaries are
    snapped to {0, 1} and the objective is recomputed; a recomputed value
    more than 1e-5 (relative) away from ``objective`` is an error.
    """
    x = np.array(x, dtype=float)
    if x.shape != (model.n_cols,):
        raise ExtractionError(f"expected {model.n_cols} values, got {x.shape}")
    lb, ub = model.bounds()
    bad = np.flatnonzero((x < lb - tol) | (x > ub + tol))
    if bad.size:
        j = bad[0]
        raise ExtractionError(
            f"{model.columns[j].name} = {x[j]!r} outside [{lb[j]}, {ub[j]}] "
            f"({bad.size} bound violation(s))")
    x = np.clip(x, lb, ub)
    for j in model.binaries:
        r = round(x[j])
        if abs(x[j] - r) > tol:
            raise ExtractionError(f"binary {model.columns[j].name} = {x[j]!r} not integral")
        x[j] = r
    value = model.evaluate(x)
    if objective is not None and abs(value - objective) > 1e-5 * max(1.0, abs(objective)):
        raise ExtractionError(f"recomputed objective {value!r} differs from solver's {objective!r}")
    m = model.meta
    T, D = m["T"], m["D"]
    groups: dict[str, list[tuple[tuple, float]]] = {}
    for j, c in enumerate(model.columns):
        if c.index:
            groups.setdefault(c.symbol, []).append((c.index, x[j]))
    series, daily = {}, {}
    for sym, items in groups.items():
        shape = tuple(max(ix[i] for ix, _ in items) for i in range(len(items[0][0])))
        arr = np.zeros(shape)
        for ix, v in items:
            arr[tuple(i - 1 for i in ix)] = v
        if sym.startswith(("C_act", "Q_cyc")):
            daily[sym] = arr
        else:
            series[sym] = arr
    for g in m["blocks"]:
        if "C_act" + g in daily and scenario is not None:
            params = {b.tag: b.params for b in blocks_for(scenario)}[g]
            n = daily["C_act" + g].size
            daily["Q_cal" + g] = np.array([calendar_capacity(params, m["start_day"] + i)
                                           for i in range(n)])
    if model.has("C_cab"):
        cable = float(x[model.col("C_cab")])
    elif scenario is not None and scenario.cable.capacity is not None:
        cable = float(scenario.cable.capacity)
    else:
        cable = float("nan")
    if bound is None:
        bound = value
    for arr in list(series.values()) + list(daily.values()):
        arr.setflags(write=False)
    x.setflags(write=False)
    return DispatchSolution(status, value, bound, gap, x, MappingProxyType(series),
                            MappingProxyType(daily), cable, T, D, m["tier"], m["topology"],
                            tuple(m["blocks"]), nodes, elapsed)
