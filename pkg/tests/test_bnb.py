import numpy as np
import pytest

from conftest import DATA, day_scenario, hand_scenario, load_fixture
from offshore_bess.builder import Horizon, build
from offshore_bess.model import ModelBuilder
from offshore_bess.scenario import TIERS, load_scenario
from offshore_bess.solver.bnb import branch_and_bound, relative_gap, solve_milp, sos_groups
from offshore_bess.solver.feasibility import check_feasibility
from offshore_bess.solver.lp import solve_lp
from offshore_bess.solver.options import SolverOptions

PC = SolverOptions(branching="pseudo-cost")
FLAT = SolverOptions(branching="pseudo-cost", gap=1e-4)


def test_hand_instance_dispatch_and_objective():
    sc = hand_scenario()
    sol = solve_milp(build(sc), None, sc)
    vom = sc.battery.variable_om
    assert sol.status == "optimal"
    assert sol.get("P_c") == pytest.approx([0.5, 0.0], abs=1e-9)
    assert sol.get("P_d") == pytest.approx([0.0, 1.0], abs=1e-9)
    assert sol.objective == pytest.approx(50 * 0.975 - 10 * 0.5 / 0.975 - vom, abs=1e-6)


def test_knapsack_by_hand():
    mb = ModelBuilder("knap")
    items = [(5.0, 4.0), (4.0, 3.0), (3.0, 2.0)]
    cols = [mb.add_col("y", (i,), binary=True, cost=v) for i, (v, _) in enumerate(items)]
    mb.add_row("cap", (), [(j, w) for j, (_, w) in zip(cols, items)], "L", 5.0)
    res = branch_and_bound(mb.finish())
    assert res.status == "optimal"
    assert res.objective == pytest.approx(7.0)
    assert list(res.x) == [0.0, 1.0, 1.0]


def test_initial_energy_above_window_is_infeasible():
    sc = hand_scenario(soc_upper=0.85, max_discharge_power=0.05)
    model = build(sc, Horizon(initial_energy={"": 0.95}))
    sol = solve_milp(model, None, sc)
    assert sol.status == "infeasible"
    assert not sol.ok


def test_forced_sale_through_closed_cable_is_infeasible():
    sc = load_scenario(DATA / "infeasible.json")
    assert solve_milp(build(sc), PC, sc).status == "infeasible"


@pytest.mark.parametrize("tier", TIERS)
def test_flat_prices_mean_no_cycling(tier):
    sc = day_scenario(kind="flat", tier=tier)
    sol = solve_milp(build(sc), FLAT, sc)
    assert sol.ok
    assert sol.get("P_c").sum() == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("kind, tier", [("sinusoid", "dynamic-efficiency"),
                                        ("spiky", "cycling-degradation")])
def test_incumbent_below_root_bound(kind, tier):
    model = build(day_scenario(kind=kind, tier=tier))
    res = branch_and_bound(model, PC)
    root = solve_lp(model.relaxed())
    assert res.root_bound == pytest.approx(root.objective, rel=1e-9)
    assert res.objective <= res.root_bound + 1e-9 * abs(res.root_bound)
    assert res.gap <= PC.gap


def test_branching_rules_agree():
    model = build(day_scenario(kind="spiky", tier="dynamic-efficiency"))
    a = branch_and_bound(model, SolverOptions(branching="most-fractional"))
    b = branch_and_bound(model, PC)
    assert a.objective == pytest.approx(b.objective, rel=2e-6)


def test_repeat_solves_are_bit_identical():
    model = build(day_scenario(kind="sinusoid", tier="cycling-degradation"))
    a, b = branch_and_bound(model, PC), branch_and_bound(model, PC)
    assert a.objective == b.objective and a.nodes == b.nodes
    assert np.array_equal(a.x, b.x)


def test_node_limit_reports_best_found():
    model = build(load_fixture("spiky").with_window(0.2, 0.95))
    res = branch_and_bound(model, SolverOptions(branching="most-fractional", node_limit=3))
    assert res.status in ("gap-limit", "optimal")
    assert res.nodes <= 3 + 2
    if res.x is not None:
        assert res.bound >= res.objective
        assert res.gap == pytest.approx(relative_gap(res.bound, res.objective))
        assert check_feasibility(model, res.x) == []


def test_relative_gap():
    assert relative_gap(110.0, 100.0) == pytest.approx(0.1)
    assert relative_gap(0.5, 0.0) == pytest.approx(0.5)
    assert relative_gap(90.0, 100.0) == 0.0


def test_sum_to_one_rows_become_groups():
    model = build(day_scenario(tier="dynamic-efficiency"))
    groups = sos_groups(model)
    assert len(groups) == 24
    assert all(len(g) == 3 for g in groups)
    assert {model.columns[j].symbol for g in groups for j in g} == {"U"}


def test_options_violations():
    bad = SolverOptions(gap=0.0, feasibility_tol=-1.0, branching="random", node_limit=0,
                        time_limit=0.0)
    assert len(bad.violations()) == 5
    assert SolverOptions().violations() == []


# -- independent feasibility audit ------------------------------------------------

def test_perturbed_discharge_lists_balance_and_loss_rows():
    sc = day_scenario(kind="spiky", tier="dynamic-efficiency")
    model = build(sc)
    sol = solve_milp(model, PC, sc)
    assert check_feasibility(model, sol.x) == []
    t = int(np.argmax(sol.get("P_d"))) + 1
    x = sol.x.copy()
    x[model.col(f"P_d({t})")] += 0.1
    names = {v.name for v in check_feasibility(model, x)}
    assert f"energy({t})" in names
    assert names & {f"dis_pieces({t})", f"dis_limit({t})", f"dis_loss({t})"}


def test_all_zero_point_flags_equality_rows():
    mb = ModelBuilder()
    x = mb.add_col("x")
    mb.add_row("fix", (), [(x, 1.0)], "E", 2.0)
    bad = check_feasibility(mb.finish(), [0.0])
    assert [(v.kind, v.name, v.amount) for v in bad] == [("row", "fix", 2.0)]
