"""Compute and freeze golden values for the 2-day fixtures.

For every onshore tier the MILP result is cross-checked against the DP
oracle (``dp <= milp <= dp + slack``) before anything is written; the tier
and topology orderings are checked on both accounts. Usage:
``python scripts/freeze_golden.py [out.json]``.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from offshore_bess.oracle import dp_dispatch
from offshore_bess.pipeline import run_scenario
from offshore_bess.scenario import TIERS, load_scenario

ROOT = Path(__file__).resolve().parents[1]
DP_STEPS = 51


def freeze(kind: str) -> dict:
    base = load_scenario(ROOT / "data" / f"{kind}_2day.json")
    tiers = {}
    for tier in TIERS:
        sc = replace(base, topology="onshore", tier=tier)
        t0 = time.monotonic()
        sol, rep = run_scenario(sc)
        dp = dp_dispatch(sc, soc_steps=DP_STEPS, power_steps=DP_STEPS)
        if not (dp.objective <= sol.objective + 1e-6 * abs(sol.objective)
                and sol.objective <= dp.objective + dp.slack_bound + 1e-6 * abs(sol.objective)):
            raise SystemExit(f"{kind}/{tier}: MILP {sol.objective} outside DP bracket "
                             f"[{dp.objective}, {dp.objective + dp.slack_bound}]")
        rated = sc.battery.rated_capacity
        tiers[tier] = {
            "objective": sol.objective,
            "net_revenue": rep.net_revenue,
            "efc": rep.efc,
            "ex_post_fade_cost": rep.ex_post_fade_cost,
            "battery_arbitrage_revenue": rep.battery_arbitrage_revenue,
            "dp_objective": dp.objective,
            "dp_slack_bound": dp.slack_bound,
            "dp_efc": float(np.sum(dp.charge)) / rated,
        }
        print(f"{kind:>8} {tier:>22} milp {sol.objective:.6f} dp {dp.objective:.6f} "
              f"slack {dp.slack_bound:.3f} efc {rep.efc:.4f} ({time.monotonic() - t0:.1f}s)")
    topologies = {}
    for topo in ("no-battery", "onshore", "offshore", "hybrid"):
        sc = replace(base, topology=topo, tier="basic")
        sol, rep = run_scenario(sc)
        topologies[topo] = {"objective": sol.objective, "net_revenue": rep.net_revenue,
                            "battery_arbitrage_revenue": rep.battery_arbitrage_revenue}
    return {"tiers": tiers, "topologies_basic": topologies}


def main(out: str = str(ROOT / "tests" / "golden" / "fixtures_2day.json")) -> None:
    doc = {"dp_steps": DP_STEPS}
    for kind in ("sinusoid", "spiky"):
        doc[kind] = freeze(kind)
    spiky = doc["spiky"]["tiers"]
    assert spiky["basic"]["efc"] >= spiky["cycling-degradation"]["efc"] - 1e-9
    assert spiky["calendar-degradation"]["efc"] >= spiky["cycling-degradation"]["efc"] - 1e-9
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
