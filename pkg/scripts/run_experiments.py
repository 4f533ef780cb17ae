"""Run the comparison experiments on the shipped 2-day fixtures.

Writes one directory per experiment under the output root (default
``runs/``): tier comparison on the spiky and flat fixtures, topology
comparison on both priced fixtures, and the default SOC-window sweep on the
spiky fixture. Usage: ``python scripts/run_experiments.py [out_root]``.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

from offshore_bess.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"

EXPERIMENTS = (
    ("tiers_spiky", ["compare-tiers", "--config", "spiky_2day.json"]),
    # flat prices are highly symmetric; a 1e-4 gap is reachable without cuts
    ("tiers_flat", ["compare-tiers", "--config", "flat_2day.json", "--gap", "1e-4"]),
    ("topologies_sinusoid", ["compare-topologies", "--config", "sinusoid_2day.json",
                             "--tier", "basic"]),
    ("topologies_spiky", ["compare-topologies", "--config", "spiky_2day.json",
                          "--tier", "basic"]),
    ("sweep_spiky", ["sweep-soc", "--config", "spiky_2day.json"]),
)


def main(out_root: str = "runs") -> int:
    worst = 0
    for name, argv in EXPERIMENTS:
        argv = list(argv)
        argv[2] = str(DATA / argv[2])
        t0 = time.monotonic()
        print(f"== {name}")
        code = cli(argv + ["--out", str(Path(out_root) / name), "--format", "csv"])
        print(f"   exit {code} ({time.monotonic() - t0:.1f}s)")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
