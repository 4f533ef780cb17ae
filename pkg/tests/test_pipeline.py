from dataclasses import replace

import numpy as np
import pytest

from conftest import load_fixture
from offshore_bess.pipeline import counterfactual, day_window, run_scenario, solve_scenario
from offshore_bess.report import reconcile


def rolling(sc):
    return replace(sc, horizon_mode="rolling")


def test_day_window_slices_both_series():
    sc = load_fixture("spiky")
    day2 = day_window(sc, 2)
    assert day2.T == 24 and day2.D == 1
    assert np.array_equal(day2.prices, sc.prices[24:])
    assert day2.market.capacity_prices == sc.market.capacity_prices[1:]
    assert day2.market.start > sc.market.start


def test_rolling_basic_never_beats_full_horizon():
    sc = replace(load_fixture("spiky"), tier="basic")
    full = solve_scenario(sc)
    roll = solve_scenario(rolling(sc))
    assert roll.ok and roll.T == sc.T
    assert roll.objective <= full.objective + 1e-6 * abs(full.objective)


def test_rolling_carries_energy_between_days():
    sc = rolling(replace(load_fixture("sinusoid"), tier="dynamic-efficiency"))
    sol = solve_scenario(sc)
    c = sol.get("C")
    net = sol.get("P_c") - sol.get("P_d")
    assert c[24] == pytest.approx(c[23] + net[24], abs=1e-9)
    assert c[0] == pytest.approx(sc.battery.initial_energy + net[0], abs=1e-9)


def test_rolling_degradation_is_monotone_and_reconciles():
    sc = rolling(replace(load_fixture("spiky"), tier="calendar-degradation"))
    record = []
    sol, rep = run_scenario(sc, record=record)
    assert len(record) == sc.D + 1
    c_act = sol.daily["C_act"]
    assert np.all(np.diff(c_act) <= 1e-12)
    assert np.all(c_act <= np.minimum(sol.daily["Q_cal"], sol.daily["Q_cyc"]) + 1e-9)
    assert reconcile(rep) <= 1e-5
    assert rep.horizon_mode == "rolling"


def test_counterfactual_pins_the_cable():
    sc = load_fixture("sinusoid")
    sol = solve_scenario(sc)
    cf = counterfactual(sc, sol)
    assert cf.topology == "no-battery"
    assert cf.cable.capacity == pytest.approx(sol.cable_capacity)
