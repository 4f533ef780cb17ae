"""Reference optima that do not go through the branch-and-bound solver.

``dp_dispatch`` runs a dynamic program over a grid of stored-energy levels
for a single battery (onshore or offshore). Losses and power limits come
straight from the curve data rather than from the piecewise big-M encoding,
and the best path is lifted back into a full column vector of the MILP so
its objective is the model's own objective at a feasible point. A second,
relaxed DP over grid cells bounds the continuous optimum from above; the
difference is the reported grid slack.

``enumerate_exact`` fixes every binary of a small model in turn and solves
the remaining LPs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .battery import calendar_capacity, constant_loss_slopes, cycle_fade_rate
from .builder import DEGRADATION_TIERS, Block, blocks_for, build
from .errors import ConfigurationError
from .model import MilpModel
from .scenario import Scenario

NEG = -np.inf
_TOL = 1e-9
# convex weights between the calendar and cycling caps tried by the upper bound
_THETAS = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class OracleResult:
    """Best grid schedule found by :func:`dp_dispatch`.

    ``objective`` is the MILP objective evaluated at ``x``, a point of the
    full-horizon model. ``upper_bound`` bounds the MILP optimum from above
    and ``slack_bound`` is its distance to ``objective``.
    """

    status: str  # optimal | infeasible
    objective: float
    dp_value: float
    upper_bound: float
    slack_bound: float
    x: np.ndarray | None
    energy: np.ndarray
    charge: np.ndarray
    discharge: np.ndarray
    soc_step: float
    action_step: float
    model: MilpModel


@dataclass(frozen=True)
class EnumerationResult:
    status: str  # optimal | infeasible
    objective: float
    x: np.ndarray | None
    assignments: int
    feasible: int


# -- curve tables ---------------------------------------------------------------

@dataclass(frozen=True)
class _Tables:
    """Per-bin loss tables for one direction.

    ``points[f][k]`` holds (power, loss) breakpoints for bin k when pieces
    are filled cheapest-first (f=0) or dearest-first (f=1). Any fill
    between the two is allowed by the model; the extremes bracket it.
    """

    edges: np.ndarray
    limits: np.ndarray
    points: tuple

    @property
    def K(self) -> int:
        return len(self.limits)

    def loss(self, fill: int, k: int, p):
        pw, ls = self.points[fill][k]
        return np.interp(p, pw, ls)

    def power_for(self, fill: int, k: int, sign: int, target):
        """Power at which P + sign·loss(P) reaches ``target`` (clamped)."""
        pw, ls = self.points[fill][k]
        return np.interp(target, pw + sign * ls, pw)


def _fill_points(widths, slopes, reverse):
    order = list(range(len(widths)))[::-1] if reverse else list(range(len(widths)))
    pw = [0.0]
    ls = [0.0]
    for i in order:
        pw.append(pw[-1] + widths[i])
        ls.append(ls[-1] + widths[i] * slopes[i])
    return np.array(pw), np.array(ls)


def _tables(scenario: Scenario, block: Block, mode: str) -> _Tables:
    p = block.params
    if scenario.tier == "basic":
        lim = p.max_charge_power if mode == "charge" else p.max_discharge_power
        b = constant_loss_slopes(scenario.round_trip_efficiency)[mode == "charge"]
        pts = (np.array([0.0, lim]), np.array([0.0, b * lim]))
        return _Tables(np.array([p.soc_lower, p.soc_upper]), np.array([lim]),
                       ((pts,), (pts,)))
    widths, slopes, maxima = block.curves.pieces(mode)
    fills = tuple(tuple(_fill_points(widths[k], slopes[k], rev) for k in range(len(maxima)))
                  for rev in (False, True))
    return _Tables(np.asarray(block.curves.soc_bins, float), np.asarray(maxima, float), fills)


# -- hourly market --------------------------------------------------------------

class _Market:
    """Best hourly market outcome for a given battery exchange.

    ``X`` is the energy drawn to charge (P_c + P_c^loss) and ``Y`` the net
    energy discharged (P_d - P_d^loss); at most one is non-zero. Wind is
    routed to its most valuable use in closed form.
    """

    def __init__(self, scenario: Scenario, block: Block):
        cab = scenario.cable
        if cab.capacity is None:
            raise ConfigurationError("dp_dispatch needs a pinned cable capacity")
        self.topology = scenario.topology
        self.prices = scenario.prices
        self.W = scenario.wind_power
        self.curt = self.W.copy() if cab.allow_curtailment else np.zeros_like(self.W)
        self.cap = float(cab.capacity)
        self.eta_c = cab.efficiency
        self.eta_p = cab.powerline_efficiency
        dynamic = scenario.tier != "basic"
        pd = max(block.curves.discharge_max) if dynamic else block.params.max_discharge_power
        pc = max(block.curves.charge_max) if dynamic else block.params.max_charge_power
        eta = self.eta_c * self.eta_p
        self.hi_cab = np.minimum(pd + self.W, self.cap)
        self.lo_cab = np.full_like(self.W, max(-2.0 * pc / eta ** 2, -self.cap))

    def kinks(self, t: int, charging: bool) -> list[float]:
        """Exchange levels where the hourly value changes slope or feasibility."""
        W, L = self.W[t], self.W[t] - self.curt[t]
        if self.topology == "onshore":
            return [self.eta_c * min(W, self.cap)] if charging else []
        e2 = (self.eta_c * self.eta_p) ** 2
        hi, lo = self.hi_cab[t], self.lo_cab[t]
        if charging:
            return [W, W - hi, W - e2 * lo, e2 * (L - lo), e2 * (L - hi)]
        return [hi - W, hi - L]

    def _onshore(self, t, X, Y):
        W, pi = self.W[t], self.prices[t]
        lo, hi = max(0.0, W - self.curt[t]), min(W, self.cap)
        if lo > hi + _TOL:
            return None
        pcab = hi if pi >= 0 else lo
        w = self.eta_c * pcab
        a = np.minimum(X, w) if pi >= 0 else np.zeros_like(X)
        s = w - a
        return {"P_cab": pcab + 0 * X, "P_curt": W - pcab + 0 * X, "P_s": s, "P_cW": a,
                "E_s": self.eta_p * (Y + s), "E_p": (X - a) / self.eta_p}

    def _offshore(self, t, X, Y):
        W, pi = self.W[t], self.prices[t]
        L = W - self.curt[t]
        e2 = (self.eta_c * self.eta_p) ** 2
        am = np.minimum(X, W)
        pmax = Y + W - am - (X - am) / e2
        pmin = Y + L - X / e2
        hi, lo = self.hi_cab[t], self.lo_cab[t]
        ok = (pmin <= hi + _TOL) & (pmax >= lo - _TOL)
        p = np.minimum(pmax, hi) if pi >= 0 else np.maximum(pmin, lo)
        return ok, p

    def value(self, t: int, X, Y):
        pi = self.prices[t]
        if self.topology == "onshore":
            flows = self._onshore(t, X, Y)
            if flows is None:
                return np.full(np.shape(X), NEG)
            return pi * (flows["E_s"] - flows["E_p"])
        ok, p = self._offshore(t, X, Y)
        return np.where(ok, pi * self.eta_c * self.eta_p * p, NEG)

    def flows(self, t: int, X: float, Y: float) -> dict[str, float]:
        """Column values of the market side for one hour."""
        X, Y = np.array([X]), np.array([Y])
        if self.topology == "onshore":
            out = self._onshore(t, X, Y)
            return {k: float(v[0]) for k, v in out.items()}
        W = self.W[t]
        L = W - self.curt[t]
        eta = self.eta_c * self.eta_p
        ok, p = self._offshore(t, X, Y)
        x, y, p = float(X[0]), float(Y[0]), float(p[0])
        # P = Y + u - X/eta^2 + a*c with u the wind used and a the part charged
        K = p - y + x / eta ** 2
        c = 1.0 / eta ** 2 - 1.0
        a = min(x, W, K / (1.0 + c))
        if c > 0:
            a = min(a, (K - L) / c)
            a = max(a, (K - W) / c)
        a = max(a, 0.0)
        u = K - a * c
        s = u - a
        return {"P_cab": p, "P_curt": W - u, "P_s": s, "P_cW": a,
                "E_s": eta * (y + s), "E_p": (x - a) / eta}


# -- shared setup ---------------------------------------------------------------

class _Setup:
    def __init__(self, scenario: Scenario, soc_steps: int, power_steps: int,
                 charge_step: float | None):
        if scenario.topology not in ("onshore", "offshore"):
            raise ConfigurationError(
                f"dp_dispatch supports onshore and offshore batteries, not {scenario.topology!r}")
        if soc_steps < 2 or power_steps < 2:
            raise ConfigurationError("soc_steps and power_steps must be ≥ 2")
        scenario = replace(scenario, horizon_mode="full")
        scenario.validate()
        self.sc = scenario
        (self.block,) = blocks_for(scenario)
        p = self.block.params
        self.p = p
        self.T, self.D = scenario.T, scenario.D
        self.prices = scenario.prices
        self.degradation = scenario.tier in DEGRADATION_TIERS
        self.calendar = scenario.tier == "calendar-degradation"
        self.market = _Market(scenario, self.block)
        self.chg = _tables(scenario, self.block, "charge")
        self.dis = _tables(scenario, self.block, "discharge")
        self.vom = p.variable_om * self.block.cost_multiplier
        self.gamma = p.replacement_cost * self.block.cost_multiplier * p.rated_capacity
        self.rate = cycle_fade_rate(p, self.block.cycle_life)
        self.Cr = p.rated_capacity
        self.c0 = p.initial_energy
        self.h = self.Cr * (p.soc_upper - p.soc_lower) / (soc_steps - 1)
        self.q = charge_step if charge_step is not None else self.Cr / 50.0
        if self.q <= 0:
            raise ConfigurationError("charge_step must be > 0")
        pmax = max(self.chg.limits.max(), self.dis.limits.max())
        self.stride = max(1, int(round(pmax / (power_steps - 1) / self.h)))

    def grid(self, lo: float, hi: float) -> tuple[np.ndarray, int]:
        """Energy levels c0 + k·h inside [lo, hi]; also the index of c0."""
        k_lo = math.ceil((lo - self.c0) / self.h - 1e-9)
        k_hi = math.floor((hi - self.c0) / self.h + 1e-9)
        e = np.clip(self.c0 + self.h * np.arange(k_lo, k_hi + 1), lo, hi)
        return e, -k_lo

    def q_cap(self, d: int, cum: np.ndarray) -> np.ndarray:
        """Capacity cap on day d after ``cum`` MWh charged before it."""
        q_int = self.p.initial_capacity
        qcyc = np.full(np.shape(cum), q_int) if d == 1 else np.maximum(q_int - self.rate * cum, 0)
        if self.calendar:
            return np.minimum(qcyc, calendar_capacity(self.p, d))
        return qcyc

    def hour_value(self, t: int, charging: bool, p, k: int, fill: int, lam: float = 0.0):
        """Battery-plus-market value of moving power ``p`` in bin k (array)."""
        if charging:
            tab = self.chg
            x = p + tab.loss(fill, k, p)
            return self.market.value(t, x, np.zeros_like(x)) - lam * p
        tab = self.dis
        y = p - tab.loss(fill, k, p)
        return self.market.value(t, np.zeros_like(y), y) - self.vom * p


# -- feasible DP ----------------------------------------------------------------

def _action_offsets(st: _Setup) -> np.ndarray:
    h = st.h
    kc = int(math.floor(st.chg.limits.max() / h + 1e-9))
    kd = int(math.floor(st.dis.limits.max() / h + 1e-9))
    ks = set(range(0, kc + 1, st.stride)) | {-k for k in range(0, kd + 1, st.stride)}
    ks |= {int(math.floor(v / h + 1e-9)) for v in st.chg.limits}
    ks |= {-int(math.floor(v / h + 1e-9)) for v in st.dis.limits}
    return np.array(sorted(ks))


def _move_values(st: _Setup, t: int, e: np.ndarray, k: int):
    """Per-bin value of moving from e[i] to e[i+k] in hour t.

    Returns (src slice, [(value array, needed capacity)]) where a bin is
    usable at capacity ``a`` when ``a ≥ needed``.
    """
    n = e.size
    i0, i1 = max(0, -k), n - max(0, k)
    if i1 <= i0:
        return None
    src, dst = e[i0:i1], e[i0 + k:i1 + k]
    S = (src + dst) / (2.0 * st.Cr)
    power = abs(k) * st.h
    charging = k > 0
    tab = st.chg if charging else st.dis
    out = []
    for b in range(tab.K):
        inbin = (S >= tab.edges[b] - _TOL) & (S <= tab.edges[b + 1] + _TOL)
        if not inbin.any() or power > tab.limits[b] + 1e-9:
            continue
        pw = np.full(S.shape, power)
        v = np.maximum(st.hour_value(t, charging, pw, b, 0), st.hour_value(t, charging, pw, b, 1))
        out.append((np.where(inbin, v, NEG), power / tab.limits[b] if power > 0 else 0.0))
    return (i0, i1), out


def _best_of(bins, caps):
    """Max over usable bins; ``caps`` is an array of capacities (rows)."""
    best = None
    for v, need in bins:
        ok = caps >= need - 1e-12
        cand = np.where(ok[:, None], v[None, :], NEG)
        best = cand if best is None else np.maximum(best, cand)
    return best


def _dp_plain(st: _Setup, e, i0, acts):
    """Stored energy only: tiers without capacity fade."""
    n = e.size
    V = np.full(n, NEG)
    V[i0] = 0.0
    ptr = np.zeros((st.T, n), dtype=np.int64)
    one = np.ones(1)
    for t in range(st.T):
        Vn = np.full(n, NEG)
        P = np.full(n, -1, dtype=np.int64)
        for ai, k in enumerate(acts):
            mv = _move_values(st, t, e, int(k))
            if mv is None or not mv[1]:
                continue
            (s0, s1), bins = mv
            r = _best_of(bins, one)[0]
            cand = V[s0:s1] + r
            d0, d1 = s0 + k, s1 + k
            better = cand > Vn[d0:d1]
            Vn[d0:d1] = np.where(better, cand, Vn[d0:d1])
            P[d0:d1] = np.where(better, ai, P[d0:d1])
        V, ptr[t] = Vn, P
    if not np.isfinite(V).any():
        return None
    j = int(np.argmax(V))
    path = [j]
    for t in range(st.T - 1, -1, -1):
        j -= int(acts[ptr[t, j]])
        path.append(j)
    return float(V.max()), path[::-1], [1.0] * st.D


def _window(st: _Setup, e, caps):
    p = st.p
    return ((e[None, :] <= caps[:, None] * st.Cr * p.soc_upper + 1e-9)
            & (e[None, :] >= caps[:, None] * st.Cr * p.soc_lower - 1e-9))


def _day_moves(st: _Setup, e, acts, hours):
    out = {}
    for t in hours:
        row = []
        for ai, k in enumerate(acts):
            mv = _move_values(st, t, e, int(k))
            if mv is not None and mv[1]:
                row.append((ai, int(k), mv[0], mv[1]))
        out[t] = row
    return out


def _merge(into: dict, key: int, col: np.ndarray, org: np.ndarray) -> None:
    if key in into:
        old, oorg = into[key]
        take = col > old
        into[key] = (np.where(take, col, old), np.where(take[:, None], org, oorg))
    else:
        into[key] = (col, org)


def _dp_fade(st: _Setup, e, i0, acts, max_frontier: int):
    """Stored energy plus cumulative charge (in units of ``q``, rounded up).

    The charge counted for an hour is rounded up to the next multiple of q,
    so the capacity assumed for each day never exceeds the true cap and the
    schedule stays feasible. Cumulative charge only matters at day starts:
    each day runs from a frontier of (charge bucket -> values over C).
    """
    n = e.size
    q = st.q
    dq = {int(k): (int(math.ceil(k * st.h / q - 1e-9)) if k > 0 else 0) for k in acts}
    grow = max(dq.values())
    frontier = {0: (np.where(np.arange(n) == i0, 0.0, NEG), None)}
    history = []
    for d in range(1, st.D + 1):
        hours = range(24 * (d - 1), min(24 * d, st.T))
        moves = _day_moves(st, e, acts, hours)
        keys = np.array(sorted(frontier))
        caps = st.q_cap(d, keys * q)
        win = _window(st, e, caps)
        if d == st.D:
            V = np.stack([frontier[b][0] for b in keys])
            ptrs = []
            for t in hours:
                Vn = np.full_like(V, NEG)
                P = np.full(V.shape, -1, dtype=np.int64)
                for ai, k, (s0, s1), bins in moves[t]:
                    d0, d1 = s0 + k, s1 + k
                    cand = np.where(win[:, d0:d1], V[:, s0:s1] + _best_of(bins, caps), NEG)
                    better = cand > Vn[:, d0:d1]
                    Vn[:, d0:d1] = np.where(better, cand, Vn[:, d0:d1])
                    P[:, d0:d1] = np.where(better, ai, P[:, d0:d1])
                V = Vn
                ptrs.append(P)
            V = V + st.gamma * caps[:, None]
            history.append((keys, caps, ptrs, None))
            break
        new: dict[int, tuple] = {}
        per_bucket = {}
        for bi, b in enumerate(keys):
            cap = caps[bi:bi + 1]
            V2 = frontier[b][0][:, None].copy()
            ptrs = []
            for t in hours:
                w = V2.shape[1]
                Vn = np.full((n, w + grow), NEG)
                P = np.full(Vn.shape, -1, dtype=np.int64)
                for ai, k, (s0, s1), bins in moves[t]:
                    d0, d1 = s0 + k, s1 + k
                    c0 = dq[k]
                    cand = V2[s0:s1] + _best_of(bins, cap)[0][:, None]
                    cand = np.where(win[bi, d0:d1, None], cand, NEG)
                    tgt = Vn[d0:d1, c0:c0 + w]
                    better = cand > tgt
                    Vn[d0:d1, c0:c0 + w] = np.where(better, cand, tgt)
                    P[d0:d1, c0:c0 + w] = np.where(better, ai, P[d0:d1, c0:c0 + w])
                live = np.nonzero(np.isfinite(Vn).any(axis=0))[0]
                width = int(live.max()) + 1 if live.size else 1
                V2 = Vn[:, :width]
                ptrs.append(P[:, :width])
            per_bucket[int(b)] = ptrs
            for delta in np.nonzero(np.isfinite(V2).any(axis=0))[0]:
                org = np.tile([int(b), int(delta)], (n, 1))
                _merge(new, int(b) + int(delta), V2[:, delta].copy(), org)
        if not new:
            return None
        if len(new) > max_frontier:
            f = math.ceil(max(new) / max_frontier)
            merged: dict[int, tuple] = {}
            for nb, (col, org) in new.items():
                _merge(merged, int(math.ceil(nb / f) * f), col, org)
            new = merged
        history.append((keys, caps, per_bucket, {nb: org for nb, (_, org) in new.items()}))
        frontier = new
    if not np.isfinite(V).any():
        return None
    bi, j = (int(v) for v in np.unravel_index(int(np.argmax(V)), V.shape))
    best = float(V[bi, j])
    keys, caps, ptrs, _ = history[-1]
    b = int(keys[bi])
    day_caps = [0.0] * st.D
    day_caps[-1] = float(caps[bi])
    path = [j]
    for t in range(len(ptrs) - 1, -1, -1):
        j -= int(acts[ptrs[t][bi, j]])
        path.append(j)
    for d in range(st.D - 1, 0, -1):
        keys, caps, per_bucket, _ = history[d - 1]
        origins = history[d - 1][3]
        pb, delta = (int(v) for v in origins[b][j])
        day_caps[d - 1] = float(caps[list(keys).index(pb)])
        ptrs = per_bucket[pb]
        for t in range(len(ptrs) - 1, -1, -1):
            k = int(acts[ptrs[t][j, delta]])
            j -= k
            delta -= dq[k]
            path.append(j)
        b = pb
    return best, path[::-1], day_caps


# -- lifting --------------------------------------------------------------------

def _best_move(st: _Setup, t: int, c_from: float, c_to: float, cap: float):
    """Bin, fill and value of the best way to realize one hourly move."""
    k = c_to - c_from
    power = abs(k) if abs(k) > 1e-12 else 0.0
    charging = k > 0
    tab = st.chg if charging else st.dis
    S = (c_from + c_to) / (2.0 * st.Cr)
    best = (NEG, None, None)
    for b in range(tab.K):
        if not (tab.edges[b] - _TOL <= S <= tab.edges[b + 1] + _TOL):
            continue
        if power > tab.limits[b] * cap + 1e-9:
            continue
        for f in (0, 1):
            v = float(st.hour_value(t, charging, np.array([power]), b, f)[0])
            if v > best[0]:
                best = (v, b, f)
    return best, power, charging, S


def _pieces(tab: _Tables, widths, fill: int, power: float):
    order = list(range(len(widths)))
    if fill:
        order.reverse()
    out = [0.0] * len(widths)
    rest = power
    for i in order:
        take = min(widths[i], rest)
        out[i] = take
        rest -= take
    return out


def _lift(st: _Setup, model: MilpModel, energy, day_caps):
    x = np.zeros(model.n_cols)

    def put(name, value):
        x[model.col(name)] = value

    dynamic = st.sc.tier != "basic"
    curves = st.block.curves
    slopes = constant_loss_slopes(st.sc.round_trip_efficiency)
    cum = np.zeros(st.D + 1)
    for t in range(1, st.T + 1):
        d = (t - 1) // 24 + 1
        cap = day_caps[d - 1] if st.degradation else 1.0
        (v, b, f), power, charging, S = _best_move(st, t - 1, energy[t - 1], energy[t], cap)
        if b is None:
            raise RuntimeError(f"lifted move at hour {t} is not realizable")
        pc = power if charging else 0.0
        pdis = 0.0 if charging else power
        tab = st.chg if charging else st.dis
        loss = float(tab.loss(f, b, power))
        put(f"P_d({t})", pdis)
        put(f"P_c({t})", pc)
        put(f"P_dloss({t})", 0.0 if charging else loss)
        put(f"P_closs({t})", loss if charging else 0.0)
        put(f"C({t})", energy[t])
        put(f"S({t})", S)
        put(f"B({t})", 0.0 if charging or power == 0 else 1.0)
        if dynamic:
            put(f"alpha_d({t})", curves.discharge_max[b] * cap)
            put(f"alpha_c({t})", curves.charge_max[b] * cap)
            put(f"U({t},{b + 1})", 1.0)
            widths = (curves.charge_widths if charging else curves.discharge_widths)[b]
            sym = "w_c" if charging else "w_d"
            for l, w in enumerate(_pieces(tab, widths, f, power)):
                put(f"{sym}({t},{l + 1},{b + 1})", w)
        else:
            assert abs(loss - slopes[int(charging)] * power) < 1e-9
        X = pc + (loss if charging else 0.0)
        Y = pdis - (0.0 if charging else loss)
        for name, val in st.market.flows(t - 1, X, Y).items():
            put(f"{name}({t})", val)
        cum[d] += pc
    if st.degradation:
        q_int = st.p.initial_capacity
        before = 0.0
        for d in range(1, st.D + 1):
            put(f"C_act({d})", day_caps[d - 1])
            put(f"Q_cyc({d})", q_int if d == 1 else q_int - st.rate * before)
            before += cum[d]
    return x


# -- relaxed DP (upper bound) ---------------------------------------------------

def _cells(st: _Setup):
    p = st.p
    if st.degradation:
        lo, hi = 0.0, st.Cr * p.soc_upper * p.initial_capacity
    else:
        lo, hi = st.Cr * p.soc_lower, st.Cr * p.soc_upper
    e, i0 = st.grid(lo, hi)
    clo = np.maximum(e - st.h / 2, lo)
    chi = np.minimum(e + st.h / 2, hi)
    clo[0], chi[-1] = lo, hi
    return e, i0, clo, chi


def _pair_rewards(st: _Setup, t: int, slo, shi, dlo, dhi, lam: float, cap: float):
    """Upper bound on the hourly value of any move between two cells.

    On each interval of power the value is concave (losses are convex or
    concave in the direction that hurts, market value is piecewise linear),
    so its maximum sits at an end point, a loss breakpoint or a market kink.
    """
    p = st.p
    smin = np.maximum(slo, p.soc_lower)
    smax = np.minimum(shi, p.soc_upper)
    ok_s = smin <= smax + _TOL
    best = np.full(slo.shape, NEG)
    for charging in (True, False):
        if charging:
            plo, phi = np.maximum(dlo, 0.0), dhi
            live = dhi >= 0
        else:
            plo, phi = np.maximum(-dhi, 0.0), -dlo
            live = dlo <= 0
        tab = st.chg if charging else st.dis
        sign = 1 if charging else -1
        kinks = st.market.kinks(t, charging)
        for b in range(tab.K):
            inbin = ok_s & (smin <= tab.edges[b + 1] + _TOL) & (smax >= tab.edges[b] - _TOL)
            top = np.minimum(phi, tab.limits[b] * cap)
            use = live & inbin & (plo <= top + 1e-9)
            if not use.any():
                continue
            a, z = plo[use], top[use]
            for f in (0, 1):
                pts = [a, z]
                pts += [np.full(a.shape, v) for v in tab.points[f][b][0][1:-1]]
                pts += [np.full(a.shape, float(tab.power_for(f, b, sign, kv))) for kv in kinks]
                cand = np.clip(np.stack(pts, axis=1), a[:, None], np.maximum(a, z)[:, None])
                vals = st.hour_value(t, charging, cand, b, f, lam if charging else 0.0)
                v = vals.max(axis=1)
                cur = best[use]
                best[use] = np.maximum(cur, v)
    return best


# capacity cells (fractions of Q_int) the relaxed DP branches on each day
_CAP_EDGES = (0.0, 0.5, 0.8, 0.9, 0.95, 0.98, 0.99, 0.995, 0.999, 1.0)


def _upper_bound(st: _Setup, model: MilpModel, theta: float) -> float:
    """Relaxed DP: any continuous schedule maps to a path of grid cells.

    Each hour's move between two cells is credited with the best value of
    any move between points of those cells. With degradation the day's
    capacity is branched on over a few cells; power limits use the top of a
    cell and the SOC window its whole span. The final-day capacity term is
    bounded by a convex combination of the calendar and cycling caps, whose
    cycling part turns into a price per MWh charged before the last day.
    """
    e, i0, clo, chi = _cells(st)
    n = e.size
    p = st.p
    q_int = p.initial_capacity
    lam_full = (1.0 - theta) * st.gamma * st.rate if (st.degradation and st.D > 1) else 0.0
    pmax = max(st.chg.limits.max(), st.dis.limits.max()) * (q_int if st.degradation else 1.0)
    cache = {}

    def rewards(t, cap):
        key = (t, cap)
        if key not in cache:
            slo = np.full(n, st.c0) if t == 0 else clo
            shi = np.full(n, st.c0) if t == 0 else chi
            I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
            I, J = I.ravel(), J.ravel()
            dlo = clo[J] - shi[I]
            dhi = chi[J] - slo[I]
            near = (dlo <= pmax + 1e-9) & (dhi >= -pmax - 1e-9)
            if t == 0:
                near &= I == i0
            I, J, dlo, dhi = I[near], J[near], dlo[near], dhi[near]
            lam = lam_full if t < 24 * (st.D - 1) else 0.0
            r = _pair_rewards(st, t, (slo[I] + clo[J]) / (2 * st.Cr),
                              (shi[I] + chi[J]) / (2 * st.Cr), dlo, dhi, lam, cap)
            cache[key] = (I, J, r)
        return cache[key]

    def run(V, hours, cap, ok):
        for t in hours:
            I, J, r = rewards(t, cap)
            Vn = np.full(n, NEG)
            np.maximum.at(Vn, J, V[I] + r)
            V = np.where(ok, Vn, NEG)
        return V

    V = np.full(n, NEG)
    V[i0] = 0.0
    if not st.degradation:
        V = run(V, range(st.T), 1.0, np.ones(n, bool))
    else:
        for d in range(1, st.D + 1):
            top = min(q_int, calendar_capacity(p, d)) if st.calendar else q_int
            out = np.full(n, NEG)
            for lo_f, hi_f in zip(_CAP_EDGES[:-1], _CAP_EDGES[1:]):
                a_lo, a_hi = lo_f * q_int, min(hi_f * q_int, top)
                if a_lo > a_hi:
                    continue
                ok = (chi >= a_lo * st.Cr * p.soc_lower - 1e-9) & (
                    clo <= a_hi * st.Cr * p.soc_upper + 1e-9)
                out = np.maximum(out, run(V, range(24 * (d - 1), min(24 * d, st.T)), a_hi, ok))
            V = out
    if not np.isfinite(V).any():
        return NEG
    const = model.objective_constant
    if st.degradation:
        qcal = calendar_capacity(p, st.D) if st.calendar else q_int
        const += st.gamma * (theta * qcal + (1.0 - theta) * q_int)
    return float(V.max()) + const


# -- public entry points --------------------------------------------------------

def dp_dispatch(scenario: Scenario, soc_steps: int = 51, power_steps: int = 51,
                charge_step: float | None = None, max_frontier: int = 64,
                bound: bool = True) -> OracleResult:
    """Grid DP for a single onshore or offshore battery with a pinned cable.

    Stored energy moves on a grid of ``soc_steps`` levels across the SOC
    window, anchored at the initial energy. Hourly moves are multiples of a
    step near ``P_max/(power_steps-1)`` plus the largest move allowed by
    each power limit. Degradation tiers add cumulative charge, counted in
    steps of ``charge_step`` (default C_r/50) and rounded up. The horizon
    mode is ignored: the reference is always the full-horizon model.
    """
    st = _Setup(scenario, soc_steps, power_steps, charge_step)
    model = build(st.sc)
    p = st.p
    e, i0 = st.grid(st.Cr * p.soc_lower, st.Cr * p.soc_upper)
    acts = _action_offsets(st)
    if st.degradation:
        found = _dp_fade(st, e, i0, acts, max_frontier)
    else:
        found = _dp_plain(st, e, i0, acts)
    empty = np.zeros(0)
    if found is None:
        return OracleResult("infeasible", math.nan, math.nan, math.nan, math.nan, None, empty,
                            empty, empty, st.h, st.stride * st.h, model)
    value, path, day_caps = found
    energy = e[np.asarray(path)]
    x = _lift(st, model, energy, day_caps)
    objective = model.evaluate(x)
    ub = math.nan
    if bound:
        thetas = _THETAS if st.calendar else (0.0,)
        ub = min(_upper_bound(st, model, th) for th in thetas)
    moves = np.diff(energy)
    return OracleResult("optimal", objective, value + model.objective_constant, ub,
                        max(0.0, ub - objective) if bound else math.nan, x, energy,
                        np.maximum(moves, 0.0), np.maximum(-moves, 0.0), st.h,
                        st.stride * st.h, model)


def _one_hot_groups(model: MilpModel) -> list[list[int]]:
    binary = set(model.binaries)
    out = []
    for r in model.rows:
        if (r.sense == "E" and abs(r.rhs - 1.0) < 1e-12 and len(r.coeffs) > 1
                and all(j in binary and v == 1.0 for j, v in r.coeffs)):
            out.append([j for j, _ in r.coeffs])
    return out


def enumerate_exact(model: MilpModel, max_binaries: int = 20,
                    feasibility_tol: float = 1e-7) -> EnumerationResult:
    """Exact optimum of a small MILP by trying every binary assignment.

    Assignments that break a sum-to-one row over binaries are skipped
    without an LP solve. Refuses models with more than ``max_binaries``
    binaries.
    """
    from .solver.lp import engine_for

    bins = list(model.binaries)
    if len(bins) > max_binaries:
        raise ConfigurationError(
            f"{len(bins)} binaries exceed the enumeration limit of {max_binaries}")
    groups = []
    grouped = set()
    for g in _one_hot_groups(model):
        if grouped.isdisjoint(g):
            groups.append(g)
            grouped.update(g)
    loose = [j for j in bins if j not in grouped]
    engine = engine_for(model, feasibility_tol)
    lb0, ub0 = model.bounds()
    best_obj, best_x = -math.inf, None
    tried = feasible = 0
    basis = None
    choices = [range(len(g)) for g in groups] + [(0, 1)] * len(loose)
    for pick in itertools.product(*choices):
        lb, ub = lb0.copy(), ub0.copy()
        for g, sel in zip(groups, pick[:len(groups)]):
            for i, j in enumerate(g):
                lb[j] = ub[j] = 1.0 if i == sel else 0.0
        for j, v in zip(loose, pick[len(groups):]):
            lb[j] = ub[j] = float(v)
        tried += 1
        sol = engine.solve(lb, ub, basis)
        if sol.status != "optimal":
            continue
        basis = sol.basis
        feasible += 1
        obj = sol.objective + model.objective_constant
        if obj > best_obj:
            best_obj, best_x = obj, np.array(sol.x)
    if best_x is None:
        return EnumerationResult("infeasible", math.nan, None, tried, feasible)
    return EnumerationResult("optimal", best_obj, best_x, tried, feasible)


__all__ = ["EnumerationResult", "OracleResult", "dp_dispatch", "enumerate_exact"]
