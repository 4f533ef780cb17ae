"""Shared fixtures: frozen data files, a cached fixture solver and a feasibility audit.

Every MILP solution produced anywhere in the suite goes through
``builder.extract_solution``; the audit wraps it so each extracted point is
re-checked by the independent ``check_feasibility`` and any violation fails
the test that produced it.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from pathlib import Path

import pytest

from offshore_bess import builder
from offshore_bess.pipeline import lossless, run_scenario
from offshore_bess.scenario import load_scenario
from offshore_bess.solver.feasibility import check_feasibility

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
GOLDEN = ROOT / "tests" / "golden"
AUDIT_TOL = 1e-6


@dataclass
class FeasibilityAudit:
    checked: int = 0
    failures: list = field(default_factory=list)

    def check(self, model, x, where: str = "") -> None:
        bad = check_feasibility(model, x, tol=AUDIT_TOL)
        self.checked += 1
        if bad:
            self.failures.append((where, bad[:5]))
            raise AssertionError(f"feasibility audit failed {where}: {bad[:5]}")


AUDIT = FeasibilityAudit()

# acceptance criterion number -> (title, "PASS"/"FAIL", detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.fixture(scope="session", autouse=True)
def feasibility_audit():
    original = builder.extract_solution

    def audited(model, x, **kw):
        sol = original(model, x, **kw)
        AUDIT.check(model, sol.x, "extract_solution")
        return sol

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(builder, "extract_solution", audited)
        yield AUDIT


def pytest_terminal_summary(terminalreporter):
    terminalreporter.write_line(
        f"feasibility audit: {AUDIT.checked} solutions checked, "
        f"{len(AUDIT.failures)} with violations (tol {AUDIT_TOL:g})")
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            title, verdict, detail = ACCEPTANCE[k]
            terminalreporter.write_line(f"{verdict} C{k:<2} {title}: {detail}")


@dataclass(frozen=True)
class FixtureRun:
    scenario: object
    solution: object
    report: object


def fixture_path(kind: str) -> Path:
    return DATA / f"{kind}_2day.json"


@functools.lru_cache(maxsize=None)
def load_fixture(kind: str):
    return load_scenario(fixture_path(kind))


def fixture_variant(kind: str, topology: str, tier: str, ideal: bool = False):
    """Frozen fixture with a topology and tier; ``ideal`` removes losses and the
    offshore cost premium so both battery locations face identical economics."""
    sc = replace(load_fixture(kind), topology=topology, tier=tier)
    if ideal:
        sc = lossless(sc)
        sc = replace(sc, battery=replace(sc.battery, offshore_cost_multiplier=1.0))
    return sc


@functools.lru_cache(maxsize=None)
def _solve_cached(kind: str, topology: str, tier: str, ideal: bool) -> FixtureRun:
    sc = fixture_variant(kind, topology, tier, ideal)
    sol, rep = run_scenario(sc)
    return FixtureRun(sc, sol, rep)


@pytest.fixture(scope="session")
def solve_fixture(feasibility_audit):
    """``solve_fixture(kind, topology, tier, ideal=False)``, memoised for the session."""
    def run(kind, topology="onshore", tier="calendar-degradation", ideal=False):
        return _solve_cached(kind, topology, tier, ideal)
    return run


def hand_scenario(prices=(10.0, 50.0), tier="basic", topology="onshore", **battery):
    """The 2-hour instance: 1 MWh / 1 MW battery, one-way loss 2.5%, full SOC window,
    half full at the start, no wind and a free, lossless, zero-size cable."""
    from offshore_bess.battery import BatteryParams
    from offshore_bess.scenario import CableParams, MarketSeries, Scenario, WindSeries

    kw = dict(rated_capacity=1.0, max_discharge_power=1.0, max_charge_power=1.0,
              soc_lower=0.0, soc_upper=1.0, initial_energy=0.5)
    kw.update(battery)
    T = len(prices)
    return Scenario(topology, tier, MarketSeries(tuple(prices), (0.0,) * -(-T // 24)),
                    WindSeries((0.0,) * T), battery=BatteryParams(**kw),
                    cable=CableParams(unit_cost=0.0, efficiency=1.0, powerline_efficiency=1.0,
                                      capacity=0.0),
                    round_trip_efficiency=0.975 ** 2, name="hand")


def day_scenario(kind="sinusoid", topology="onshore", tier="basic", days=1, seed=7, **kw):
    """Synthetic scenario with the cable pinned at 12 MW (solves quickly)."""
    from offshore_bess.scenario import CableParams, Scenario, synthesize_fixture
    from offshore_bess.solver.options import SolverOptions

    market, wind = synthesize_fixture(kind, days, seed)
    kw.setdefault("cable", CableParams(capacity=12.0))
    kw.setdefault("solver", SolverOptions(branching="pseudo-cost"))
    return Scenario(topology, tier, market, wind, **kw)
