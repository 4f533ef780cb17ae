import numpy as np
import pytest

from conftest import day_scenario, hand_scenario
from offshore_bess.builder import build
from offshore_bess.errors import ConfigurationError
from offshore_bess.oracle import dp_dispatch, enumerate_exact
from offshore_bess.scenario import MarketSeries, Scenario, WindSeries
from offshore_bess.solver.bnb import solve_milp
from offshore_bess.solver.feasibility import check_feasibility
from offshore_bess.solver.lp import solve_lp
from offshore_bess.solver.options import SolverOptions

PC = SolverOptions(branching="pseudo-cost")
FLAT = SolverOptions(branching="pseudo-cost", gap=1e-4)
HAND_VALUE = 50 * 0.975 - 10 * 0.5 / 0.975 - 2.3


def test_hand_instance_fine_grid():
    res = dp_dispatch(hand_scenario(), soc_steps=101, power_steps=101)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(HAND_VALUE, rel=5e-3)
    assert res.objective <= HAND_VALUE + 1e-9
    assert res.charge == pytest.approx([0.5, 0.0])
    assert res.discharge == pytest.approx([0.0, 1.0])


@pytest.mark.parametrize("tier", ["basic", "dynamic-efficiency", "cycling-degradation"])
def test_refined_grids_never_do_worse(tier):
    sc = day_scenario(kind="spiky", tier=tier)
    values = [dp_dispatch(sc, n, n, bound=False).objective for n in (51, 101, 201)]
    assert values[0] <= values[1] + 1e-9 and values[1] <= values[2] + 1e-9


@pytest.mark.parametrize("tier", ["basic", "calendar-degradation"])
def test_flat_prices_give_idle_schedule(tier):
    sc = day_scenario(kind="flat", tier=tier)
    res = dp_dispatch(sc)
    assert np.allclose(res.charge, 0.0)
    milp = solve_milp(build(sc), FLAT, sc)
    assert res.objective <= milp.objective + 1e-9
    assert milp.objective <= res.objective + res.slack_bound + 1e-6


@pytest.mark.parametrize("kind, tier, topology", [
    ("sinusoid", "basic", "onshore"),
    ("spiky", "dynamic-efficiency", "offshore"),
    ("spiky", "calendar-degradation", "onshore"),
])
def test_dp_brackets_milp(kind, tier, topology):
    sc = day_scenario(kind=kind, tier=tier, topology=topology)
    res = dp_dispatch(sc)
    milp = solve_milp(build(sc), PC, sc)
    tol = 1e-6 * abs(milp.objective)
    assert res.objective <= milp.objective + tol
    assert milp.objective <= res.objective + res.slack_bound + tol
    assert res.upper_bound >= milp.objective - tol


def test_dp_schedule_is_a_feasible_model_point():
    res = dp_dispatch(day_scenario(kind="spiky", tier="cycling-degradation"))
    assert check_feasibility(res.model, res.x) == []
    assert res.model.evaluate(res.x) == pytest.approx(res.objective)
    assert res.soc_step > 0 and res.action_step >= res.soc_step


def test_dp_refuses_hybrid_and_bad_grid():
    with pytest.raises(ConfigurationError, match="hybrid"):
        dp_dispatch(day_scenario(topology="hybrid"))
    with pytest.raises(ConfigurationError, match="≥ 2"):
        dp_dispatch(day_scenario(), soc_steps=1)


# -- enumeration ----------------------------------------------------------------

def test_enumeration_without_binaries_is_one_lp():
    model = build(day_scenario(topology="no-battery"))
    res = enumerate_exact(model)
    assert res.assignments == 1
    assert res.objective == pytest.approx(solve_lp(model).objective, rel=1e-12)


def six_hour_basic():
    prices = (30.0, 12.0, 55.0, 20.0, 70.0, 40.0)
    return Scenario("onshore", "basic", MarketSeries(prices, (100.0,)),
                    WindSeries((0.3, 0.8, 0.1, 0.6, 0.2, 0.9), installed_capacity=2.0),
                    name="six-hour")


def test_six_hour_basic_matches_solver():
    sc = six_hour_basic()
    model = build(sc)
    assert len(model.binaries) == 6
    exact = enumerate_exact(model)
    assert exact.assignments == 64
    assert solve_milp(model, None, sc).objective == pytest.approx(exact.objective, rel=1e-6)


def test_one_hot_rows_shrink_the_enumeration():
    sc = Scenario("onshore", "dynamic-efficiency", MarketSeries((10.0, 60.0, 5.0, 45.0), (0.0,)),
                  WindSeries((0.0,) * 4))
    model = build(sc)
    assert len(model.binaries) == 16
    exact = enumerate_exact(model)
    assert exact.assignments == (2 * 3) ** 4
    assert solve_milp(model, PC, sc).objective == pytest.approx(exact.objective, rel=1e-6)


def test_enumeration_refuses_large_models():
    model = build(day_scenario())
    assert len(model.binaries) == 24
    with pytest.raises(ConfigurationError, match="24 binaries exceed the enumeration limit of 20"):
        enumerate_exact(model)
    sc = Scenario("onshore", "basic", MarketSeries((1.0,) * 21, (0.0,)), WindSeries((0.0,) * 21))
    with pytest.raises(ConfigurationError, match="21 binaries"):
        enumerate_exact(build(sc), max_binaries=20)
