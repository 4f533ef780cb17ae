"""Command-line entry point: ``offshore-bess <command> --config PATH ...``.

Commands write their results into ``--out`` together with a ``manifest.json``
that records the inputs (with SHA-256 digests) and the resolved options.
Logs go to standard error; standard output carries short summaries only.

Exit codes: 0 optimal, 1 invalid input, 2 infeasible, 3 gap or time limit.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .builder import build
from .errors import DataError, ValidationError
from .pipeline import run_scenario
from .report import REPORT_FORMATS, TABLE_ROWS, emit_report, report_dict, write_dispatch_csv
from .scenario import TIERS, TOPOLOGIES, Scenario, data_files, load_scenario
from .solver.mps import export_mps

log = logging.getLogger("offshore_bess")

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3

DEFAULT_WINDOWS = ((0.40, 0.75), (0.30, 0.85), (0.20, 0.95), (0.01, 0.99))


def exit_code(status: str) -> int:
    if status == "optimal":
        return EXIT_OK
    if status == "infeasible":
        return EXIT_INFEASIBLE
    return EXIT_LIMIT


# -- manifest --------------------------------------------------------------------

@dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to every output set."""

    config: str
    command: str
    options: dict
    version: str
    digests: dict
    timestamp: str
    outputs: list = field(default_factory=list)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def make_manifest(args, scenario: Scenario, outputs) -> RunManifest:
    config = Path(args.config)
    digests = {str(p): sha256_file(p) for p in data_files(config) if p.exists()}
    options = {
        "name": scenario.name,
        "topology": scenario.topology,
        "tier": scenario.tier,
        "horizon_mode": scenario.horizon_mode,
        "format": args.format,
        "solver": asdict(scenario.solver),
    }
    if getattr(args, "windows", None) is not None:
        options["windows"] = [list(w) for w in args.windows]
    return RunManifest(str(config), args.command, options, __version__, digests,
                       datetime.now(timezone.utc).isoformat(timespec="seconds"),
                       sorted(str(p) for p in outputs))


# -- shared plumbing --------------------------------------------------------------

def parse_windows(text: str) -> tuple[tuple[float, float], ...]:
    """``"0.3:0.85,0.2:0.95"`` -> ((0.3, 0.85), (0.2, 0.95))."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"window {item!r} is not S_dn:S_up")
        try:
            out.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise argparse.ArgumentTypeError(f"window {item!r} is not numeric") from None
    if not out:
        raise argparse.ArgumentTypeError("no windows given")
    return tuple(out)


def load_with_overrides(args) -> Scenario:
    """Load ``--config`` and apply command-line overrides; raises on invalid input."""
    scenario = load_scenario(args.config)
    changes = {}
    if args.tier is not None:
        changes["tier"] = args.tier
    if args.topology is not None:
        changes["topology"] = args.topology
    solver = {}
    if args.gap is not None:
        solver["gap"] = args.gap
    if args.time_limit is not None:
        solver["time_limit"] = args.time_limit
    if args.seed is not None:
        solver["seed"] = args.seed
    if solver:
        changes["solver"] = replace(scenario.solver, **solver)
    if changes:
        scenario = replace(scenario, **changes)
    return scenario.validate()


def _report_invalid(exc: Exception) -> int:
    problems = exc.violations if isinstance(exc, ValidationError) else [str(exc)]
    print("invalid input:")
    for p in problems:
        print(f"  - {p}")
    return EXIT_INVALID


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_table(rows: list[dict], columns: list[str], fmt: str, path: Path) -> Path:
    if fmt == "json":
        path.write_text(json.dumps(rows, indent=2) + "\n")
        return path
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def _solve_member(scenario: Scenario, out: Path, stem: str, fmt: str, outputs: list):
    """Run one member scenario and write its report and dispatch CSV."""
    sol, rep = run_scenario(scenario)
    if rep is not None:
        outputs.append(emit_report(rep, fmt, out / f"{stem}_report.{fmt}"))
        outputs.append(write_dispatch_csv(scenario, sol, out / f"{stem}_dispatch.csv"))
    log.info("%s: %s objective=%.6g", stem, sol.status, sol.objective)
    return sol, rep


# -- commands --------------------------------------------------------------------

def cmd_run(args) -> int:
    """Solve one scenario; write report, dispatch CSV and manifest."""
    try:
        scenario = load_with_overrides(args)
    except (ValidationError, DataError) as exc:
        return _report_invalid(exc)
    out = _out_dir(args)
    sol, rep = run_scenario(scenario)
    outputs = []
    if rep is not None:
        outputs.append(emit_report(rep, args.format, out / f"report.{args.format}"))
        outputs.append(write_dispatch_csv(scenario, sol, out / "dispatch.csv"))
        print(f"{scenario.name}: {sol.status}, net revenue {rep.net_revenue:.2f}, "
              f"EFC {rep.efc:.3f}")
    else:
        print(f"{scenario.name}: {sol.status}, no dispatch")
    outputs.append(out / "manifest.json")
    make_manifest(args, scenario, outputs).write(out / "manifest.json")
    return exit_code(sol.status)


TIER_COLUMNS = ["tier", "status", "gross_revenue", "ex_post_degradation_cost", "net_revenue",
                "efc"]


def tier_row(tier: str, status: str, rep) -> dict:
    """Comparison row: every tier is charged the fade its dispatch actually causes."""
    if rep is None:
        nan = float("nan")
        return dict(tier=tier, status=status, gross_revenue=nan, ex_post_degradation_cost=nan,
                    net_revenue=nan, efc=nan)
    other_costs = rep.total_cost - rep.capacity_fade_cost
    return dict(tier=tier, status=status, gross_revenue=rep.total_revenue,
                ex_post_degradation_cost=rep.ex_post_fade_cost,
                net_revenue=rep.total_revenue - other_costs - rep.ex_post_fade_cost,
                efc=rep.efc)


def cmd_compare_tiers(args) -> int:
    """Run all four tiers on one scenario and tabulate them."""
    try:
        base = load_with_overrides(args)
    except (ValidationError, DataError) as exc:
        return _report_invalid(exc)
    out = _out_dir(args)
    outputs, rows, codes = [], [], []
    for tier in TIERS:
        sol, rep = _solve_member(replace(base, tier=tier), out, tier, args.format, outputs)
        rows.append(tier_row(tier, sol.status, rep))
        codes.append(exit_code(sol.status))
    outputs.append(_write_table(rows, TIER_COLUMNS, args.format, out / f"tiers.{args.format}"))
    for r in rows:
        print(f"{r['tier']:>22}  {r['status']:<10} net {r['net_revenue']:12.2f}  "
              f"EFC {r['efc']:.3f}")
    outputs.append(out / "manifest.json")
    make_manifest(args, base, outputs).write(out / "manifest.json")
    return max(codes)


def cmd_compare_topologies(args) -> int:
    """Run every topology on shared data; one column per topology."""
    try:
        base = load_with_overrides(args)
    except (ValidationError, DataError) as exc:
        return _report_invalid(exc)
    out = _out_dir(args)
    outputs, reports, codes = [], {}, []
    for topo in TOPOLOGIES:
        sol, rep = _solve_member(replace(base, topology=topo), out, topo, args.format, outputs)
        reports[topo] = rep
        codes.append(exit_code(sol.status))
    path = out / f"topologies.{args.format}"
    if args.format == "json":
        doc = {t: (report_dict(r) if r is not None else None) for t, r in reports.items()}
        path.write_text(json.dumps(doc, indent=2) + "\n")
    else:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["section", "item", "field", *TOPOLOGIES])
            for section, label, f in TABLE_ROWS:
                w.writerow([section, label, f] + [
                    repr(float(getattr(r, f))) if r is not None else "" for r in reports.values()])
    outputs.append(path)
    for t, r in reports.items():
        print(f"{t:>11}  " + (f"net {r.net_revenue:12.2f}" if r is not None else "no dispatch"))
    outputs.append(out / "manifest.json")
    make_manifest(args, base, outputs).write(out / "manifest.json")
    return max(codes)


SWEEP_COLUMNS = ["S_dn", "S_up", "status", "net_revenue", "efc", "gross_revenue",
                 "degradation_cost"]


def cmd_sweep_soc(args) -> int:
    """One run per usable SOC window; every window is validated before solving."""
    try:
        base = load_with_overrides(args)
    except (ValidationError, DataError) as exc:
        return _report_invalid(exc)
    if args.windows is None:
        args.windows = DEFAULT_WINDOWS
    members, problems = [], []
    for lo, hi in args.windows:
        try:
            members.append(base.with_window(lo, hi))
        except (ValueError, ArithmeticError) as exc:
            problems.append(f"window ({lo}, {hi}): {exc}")
            continue
        problems += [f"window ({lo}, {hi}): {v}" for v in members[-1].violations()]
    if problems:
        return _report_invalid(ValidationError(problems))
    out = _out_dir(args)
    outputs, rows, codes = [], [], []
    for sc in members:
        b = sc.battery
        stem = f"soc_{b.soc_lower:g}_{b.soc_upper:g}"
        sol, rep = _solve_member(sc, out, stem, args.format, outputs)
        nan = float("nan")
        rows.append(dict(
            S_dn=b.soc_lower, S_up=b.soc_upper, status=sol.status,
            net_revenue=rep.net_revenue if rep else nan, efc=rep.efc if rep else nan,
            gross_revenue=rep.total_revenue if rep else nan,
            degradation_cost=rep.capacity_fade_cost if rep else nan))
        codes.append(exit_code(sol.status))
    outputs.append(_write_table(rows, SWEEP_COLUMNS, args.format, out / f"sweep.{args.format}"))
    for r in rows:
        print(f"[{r['S_dn']:.2f}, {r['S_up']:.2f}]  {r['status']:<10} "
              f"net {r['net_revenue']:12.2f}  EFC {r['efc']:.3f}")
    outputs.append(out / "manifest.json")
    make_manifest(args, base, outputs).write(out / "manifest.json")
    return max(codes)


def cmd_export_mps(args) -> int:
    """Write the full-horizon model as MPS plus its symbol map, without solving."""
    try:
        scenario = load_with_overrides(args)
    except (ValidationError, DataError) as exc:
        return _report_invalid(exc)
    target = Path(args.out)
    if target.suffix.lower() != ".mps":
        target.mkdir(parents=True, exist_ok=True)
        target = target / "model.mps"
    target.parent.mkdir(parents=True, exist_ok=True)
    model = build(scenario)
    mps, sym = export_mps(model, target)
    manifest = target.with_name(target.stem + ".manifest.json")
    make_manifest(args, scenario, [mps, sym, manifest]).write(manifest)
    print(f"wrote {mps} ({model.n_cols} columns, {model.n_rows} rows)")
    return EXIT_OK


def cmd_validate(args) -> int:
    """Check config, curves and series; print every problem found."""
    try:
        scenario = load_with_overrides(args)
    except (ValidationError, DataError) as exc:
        return _report_invalid(exc)
    print(f"{args.config}: ok ({scenario.topology}, {scenario.tier}, {scenario.D} days)")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "compare-tiers": cmd_compare_tiers,
    "compare-topologies": cmd_compare_topologies,
    "sweep-soc": cmd_sweep_soc,
    "export-mps": cmd_export_mps,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="offshore-bess", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON file")
    common.add_argument("--tier", choices=TIERS)
    common.add_argument("--topology", choices=TOPOLOGIES)
    common.add_argument("--gap", type=float, help="relative optimality gap")
    common.add_argument("--time-limit", type=float, metavar="SECONDS")
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=REPORT_FORMATS, default="json")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=fn.__doc__.splitlines()[0])
        if name != "validate":
            default = "model.mps" if name == "export-mps" else "out"
            p.add_argument("--out", default=default,
                           help="output file" if name == "export-mps" else "output directory")
        if name == "sweep-soc":
            p.add_argument("--windows", type=parse_windows,
                           help="comma-separated S_dn:S_up pairs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
