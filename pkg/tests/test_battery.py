import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offshore_bess.battery import (
    DEFAULT_CYCLE_LIFE,
    BatteryCurves,
    BatteryParams,
    CycleLifeTable,
    calendar_capacity,
    constant_loss_slopes,
    cycle_capacity,
    cycle_life_for_dod,
    default_curves,
    degradation_path,
    eval_loss,
    flat_curves,
    load_curves,
    load_cycle_life,
    max_power,
    validate_curves,
    write_curves,
    write_cycle_life,
)
from offshore_bess.errors import ConfigurationError, DataError, DomainError

PARAMS = BatteryParams()


def two_piece_curves():
    p = BatteryParams(soc_lower=0.0, soc_upper=1.0, max_discharge_power=1.0,
                      max_charge_power=1.0)
    return BatteryCurves(
        soc_bins=(0.0, 1.0),
        discharge_widths=((0.5, 0.5),), discharge_slopes=((0.04, 0.08),),
        charge_widths=((0.5, 0.5),), charge_slopes=((0.04, 0.08),),
        discharge_max=(1.0,), charge_max=(1.0,),
    ), p


def three_bin_curves(maxima=(1.0, 1.3, 1.0)):
    return BatteryCurves(
        soc_bins=(0.3, 0.5, 0.7, 0.85),
        discharge_widths=tuple((m,) for m in maxima), discharge_slopes=((0.05,),) * 3,
        charge_widths=tuple((m,) for m in maxima), charge_slopes=((0.05,),) * 3,
        discharge_max=maxima, charge_max=maxima,
    )


# -- loss curves --------------------------------------------------------------------

def test_single_piece_loss_is_linear():
    curves = flat_curves(PARAMS, 0.05)
    assert eval_loss(curves, 0.5, 1.0, "discharge") == pytest.approx(0.05)


@pytest.mark.parametrize("mode", ["charge", "discharge"])
def test_zero_power_has_zero_loss(mode):
    assert eval_loss(default_curves(PARAMS), 0.6, 0.0, mode) == 0.0


def test_two_piece_greedy_fill():
    curves, _ = two_piece_curves()
    assert eval_loss(curves, 0.5, 0.75, "discharge") == pytest.approx(0.5 * 0.04 + 0.25 * 0.08)


def test_loss_domain_errors():
    curves = default_curves(PARAMS)
    with pytest.raises(DomainError):
        eval_loss(curves, 0.95, 0.1, "discharge")
    with pytest.raises(DomainError):
        eval_loss(curves, 0.5, 5.0, "charge")


def test_max_power_table_value():
    assert max_power(flat_curves(PARAMS, 0.05, bins=3), 0.5, "discharge") == pytest.approx(1.337)


def test_max_power_tie_goes_to_lower_bin():
    curves = three_bin_curves()
    assert max_power(curves, 0.5, "charge") == pytest.approx(1.0)
    assert max_power(curves, 0.6, "charge") == pytest.approx(1.3)
    assert max_power(curves, 0.7, "discharge") == pytest.approx(1.3)


def test_max_power_outside_window():
    with pytest.raises(DomainError):
        max_power(default_curves(PARAMS), 0.1, "charge")


@settings(max_examples=60, deadline=None)
@given(soc=st.floats(0.3, 0.85), a=st.floats(0.0, 1.0), b=st.floats(0.0, 1.0),
       mode=st.sampled_from(["charge", "discharge"]))
def test_loss_convex_increasing_and_below_power(soc, a, b, mode):
    curves = default_curves(PARAMS)
    top = max_power(curves, soc, mode)
    p1, p2 = a * top, b * top
    l1, l2 = eval_loss(curves, soc, p1, mode), eval_loss(curves, soc, p2, mode)
    mid = eval_loss(curves, soc, 0.5 * (p1 + p2), mode)
    assert l1 + l2 >= 2 * mid - 1e-12
    if p1 <= p2:
        assert l1 <= l2 + 1e-12
    if p1 > 0:
        assert l1 < p1


@settings(max_examples=40, deadline=None)
@given(soc=st.floats(0.3, 0.85), mode=st.sampled_from(["charge", "discharge"]))
def test_max_power_is_the_domain_edge(soc, mode):
    curves = default_curves(PARAMS)
    top = max_power(curves, soc, mode)
    eval_loss(curves, soc, top, mode)
    with pytest.raises(DomainError):
        eval_loss(curves, soc, top * 1.01 + 1e-6, mode)


def test_constant_slopes_reproduce_round_trip():
    sd, sc = constant_loss_slopes(0.975 ** 2)
    assert sd == pytest.approx(0.025)
    assert sc == pytest.approx(1 / 0.975 - 1)
    # one MWh stored costs 1 + sc from the grid and returns 1 - sd
    assert (1 - sd) / (1 + sc) == pytest.approx(0.975 ** 2)


# -- curve validation ---------------------------------------------------------------

def test_default_curves_valid():
    assert validate_curves(default_curves(PARAMS), PARAMS) == []


def test_bins_not_ascending():
    curves = replace(default_curves(PARAMS), soc_bins=(0.3, 0.3, 0.6, 0.85))
    assert "bins not strictly ascending" in validate_curves(curves, PARAMS)


def test_slope_out_of_range():
    c = default_curves(PARAMS)
    bad = replace(c, discharge_slopes=((0.035, 0.05, 1.2),) + c.discharge_slopes[1:])
    assert any("slope out of [0,1)" in v for v in validate_curves(bad, PARAMS))


def test_nonconvex_and_short_pieces_reported_together():
    c = default_curves(PARAMS)
    bad = replace(c, charge_slopes=((0.06, 0.04, 0.05),) + c.charge_slopes[1:],
                  charge_widths=((0.1, 0.1, 0.1),) + c.charge_widths[1:])
    problems = validate_curves(bad, PARAMS)
    assert any("not non-decreasing" in v for v in problems)
    assert any("pieces sum" in v for v in problems)


def test_endpoints_must_match_window():
    problems = validate_curves(default_curves(PARAMS), replace(PARAMS, soc_lower=0.2))
    assert any("soc_lower" in v for v in problems)


def test_fit_window_keeps_validity():
    c = default_curves(PARAMS).fit_window(0.2, 0.95)
    assert validate_curves(c, replace(PARAMS, soc_lower=0.2, soc_upper=0.95)) == []
    narrow = default_curves(PARAMS).fit_window(0.4, 0.75)
    assert narrow.soc_bins[0] == 0.4 and narrow.soc_bins[-1] == 0.75


def test_curves_csv_round_trip(tmp_path):
    c = default_curves(PARAMS)
    write_curves(c, tmp_path / "c.csv")
    assert load_curves(tmp_path / "c.csv") == c


def test_curves_csv_missing_column(tmp_path):
    (tmp_path / "c.csv").write_text("kind,bin_lo,bin_hi\n")
    with pytest.raises(DataError, match="missing columns"):
        load_curves(tmp_path / "c.csv")


# -- cycle life -----------------------------------------------------------------------

def test_cycle_life_exact_row():
    assert cycle_life_for_dod(DEFAULT_CYCLE_LIFE, 0.5) == pytest.approx(4000.0)


def test_cycle_life_log_linear_midpoint():
    table = CycleLifeTable((0.5, 1.0), (4000.0, 1000.0))
    assert cycle_life_for_dod(table, 0.75) == pytest.approx(2000.0)


def test_cycle_life_clamps_below_table():
    assert cycle_life_for_dod(DEFAULT_CYCLE_LIFE, 0.01) == pytest.approx(15000.0)


def test_cycle_life_empty_table():
    with pytest.raises(ConfigurationError):
        cycle_life_for_dod(CycleLifeTable((), ()), 0.5)


@given(a=st.floats(0.001, 1.0), b=st.floats(0.001, 1.0))
def test_cycle_life_non_increasing(a, b):
    lo, hi = sorted((a, b))
    assert cycle_life_for_dod(DEFAULT_CYCLE_LIFE, lo) >= cycle_life_for_dod(DEFAULT_CYCLE_LIFE, hi)


def test_cycle_life_csv_round_trip(tmp_path):
    write_cycle_life(DEFAULT_CYCLE_LIFE, tmp_path / "l.csv")
    assert load_cycle_life(tmp_path / "l.csv") == DEFAULT_CYCLE_LIFE


# -- degradation arithmetic ---------------------------------------------------------

FADE = BatteryParams(eol=0.8, calendar_life=3650.0, initial_capacity=1.0)


@pytest.mark.parametrize("d, expected", [(1, 1.0), (1826, 0.9), (3651, 0.8), (9000, 0.8)])
def test_calendar_capacity(d, expected):
    assert calendar_capacity(FADE, d) == pytest.approx(expected, abs=1e-12)


def test_calendar_capacity_bad_day():
    with pytest.raises(DomainError):
        calendar_capacity(FADE, 0)


def test_cycle_capacity_first_day_ignores_charge():
    assert cycle_capacity(FADE, 3000.0, 500.0, 1) == 1.0


def test_cycle_capacity_no_charge():
    assert cycle_capacity(FADE, 3000.0, 0.0, 5) == 1.0


def test_cycle_capacity_substitution():
    assert cycle_capacity(FADE, 3000.0, 2.0, 2) == pytest.approx(1 - 0.2 * 2 / 3000, abs=1e-12)
    assert cycle_capacity(FADE, 3000.0, 2.0, 2) == pytest.approx(0.999867, abs=1e-6)


def test_cycle_capacity_clamps_and_rejects_bad_life():
    assert cycle_capacity(FADE, 10.0, 1e6, 3) == pytest.approx(0.8)
    with pytest.raises(DomainError):
        cycle_capacity(FADE, 0.0, 1.0, 2)


@settings(max_examples=50)
@given(d1=st.integers(1, 20000), d2=st.integers(1, 20000),
       c1=st.floats(0, 1e5), c2=st.floats(0, 1e5))
def test_fade_monotone_and_floored(d1, d2, c1, c2):
    (da, db), (ca, cb) = sorted((d1, d2)), sorted((c1, c2))
    assert calendar_capacity(FADE, da) >= calendar_capacity(FADE, db)
    assert cycle_capacity(FADE, 3000.0, ca, 2) >= cycle_capacity(FADE, 3000.0, cb, 2)
    assert calendar_capacity(FADE, db) >= 0.8 - 1e-12
    assert cycle_capacity(FADE, 3000.0, cb, 2) >= 0.8 - 1e-12


def test_degradation_path_states():
    charge = np.zeros(48)
    charge[3] = 1.0
    path = degradation_path(FADE, 3000.0, charge)
    assert [s.day for s in path] == [1, 2, 3]
    assert path[1].cumulative_charge == pytest.approx(1.0)
    assert path[1].q_cyc == pytest.approx(1 - 0.2 / 3000)
    assert path[2].q_cal == pytest.approx(1 - 0.2 * 2 / 3650)
    for s in path:
        assert s.c_act == pytest.approx(min(s.q_cal, s.q_cyc))
    assert all(a.c_act >= b.c_act for a, b in zip(path, path[1:]))


def test_degradation_path_cycling_only_ignores_calendar():
    path = degradation_path(FADE, 3000.0, np.zeros(24), calendar=False)
    assert path[-1].c_act == 1.0


def test_params_violations():
    bad = BatteryParams(soc_lower=0.9, soc_upper=0.3, eol=1.5)
    problems = bad.violations()
    assert "soc_lower ≥ soc_upper" in problems
    assert any("eol" in v for v in problems)
    assert len(problems) >= 3


def test_scaled_params():
    half = PARAMS.scaled(0.5)
    assert half.rated_capacity == pytest.approx(0.5)
    assert half.max_charge_power == pytest.approx(1.337 / 2)
    assert math.isclose(half.dod, PARAMS.dod)
