"""Regenerate the shipped fixtures under data/.

The 2-day market/wind series are drawn by ``synthesize_fixture`` with a fixed
seed and written out as CSV, so the tests read frozen files rather than
regenerating them. Usage: ``python scripts/make_fixtures.py [data_dir]``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from offshore_bess.scenario import CableParams, Scenario, save_scenario, synthesize_fixture
from offshore_bess.solver.options import SolverOptions

SEED = 7
DAYS = 2
PINNED_CABLE_MW = 12.0
FIXTURE_SOLVER = SolverOptions(branching="pseudo-cost")


def fixture_scenario(kind: str, **changes) -> Scenario:
    market, wind = synthesize_fixture(kind, DAYS, SEED)
    kwargs = dict(topology="onshore", tier="calendar-degradation", market=market, wind=wind,
                  cable=CableParams(capacity=PINNED_CABLE_MW), solver=FIXTURE_SOLVER,
                  name=f"{kind}-{DAYS}day")
    kwargs.update(changes)
    return Scenario(**kwargs)


def main(data_dir: str = "data") -> None:
    out = Path(data_dir)
    for kind in ("sinusoid", "spiky", "flat"):
        save_scenario(fixture_scenario(kind), out / f"{kind}_2day.json")

    # no cable and nowhere else for the wind to go
    infeasible = fixture_scenario("sinusoid", tier="basic", name="infeasible",
                                  cable=CableParams(capacity=0.0, allow_curtailment=False))
    save_scenario(infeasible, out / "infeasible.json")

    # reuses the sinusoid data files with an inverted SOC window
    doc = json.loads((out / "sinusoid_2day.json").read_text())
    doc["name"] = "bad-soc"
    doc["battery"]["S_dn"], doc["battery"]["S_up"] = 0.9, 0.3
    (out / "bad_soc.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main(*sys.argv[1:])
