import json
from dataclasses import replace
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DATA
from offshore_bess.battery import BatteryParams
from offshore_bess.errors import DataError, ValidationError
from offshore_bess.scenario import (
    SCHEMA_PATH,
    MarketSeries,
    Scenario,
    WindSeries,
    data_files,
    load_daily_csv,
    load_hourly_csv,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    synthesize_fixture,
    write_hourly_csv,
)


def hourly_rows(n, start="2013-01-01T00:00:00", skip=(), dup=()):
    t0 = datetime.fromisoformat(start)
    lines = ["timestamp,value"]
    for i in range(n):
        if i in skip:
            continue
        lines.append(f"{(t0 + timedelta(hours=i)).isoformat()},{30 + i}")
        if i in dup:
            lines.append(f"{(t0 + timedelta(hours=i)).isoformat()},{30 + i}")
    return "\n".join(lines) + "\n"


def write_minimal(tmp_path, hours=48, days=2, extra=None):
    (tmp_path / "prices.csv").write_text(hourly_rows(hours))
    daily = ["date,usd_per_mw_day"] + [f"2013-01-0{d + 1},150" for d in range(days)]
    (tmp_path / "cap.csv").write_text("\n".join(daily) + "\n")
    doc = {"market": {"energy_prices": "prices.csv", "capacity_prices": "cap.csv"}}
    doc.update(extra or {})
    (tmp_path / "cfg.json").write_text(json.dumps(doc))
    return tmp_path / "cfg.json"


# -- hourly / daily CSV ---------------------------------------------------------------

def test_one_day_hourly(tmp_path):
    (tmp_path / "p.csv").write_text(hourly_rows(24))
    values, start = load_hourly_csv(tmp_path / "p.csv")
    assert len(values) == 24 and start == "2013-01-01T00:00:00"


def test_gap_is_named(tmp_path):
    (tmp_path / "p.csv").write_text(hourly_rows(25, skip=(13,)))
    with pytest.raises(DataError, match="gap at 2013-01-01T13:00"):
        load_hourly_csv(tmp_path / "p.csv")


def test_duplicate_is_named(tmp_path):
    (tmp_path / "p.csv").write_text(hourly_rows(24, dup=(5,)))
    with pytest.raises(DataError, match="duplicate timestamp 2013-01-01T05:00"):
        load_hourly_csv(tmp_path / "p.csv")


def test_non_numeric_value(tmp_path):
    (tmp_path / "p.csv").write_text("timestamp,value\n2013-01-01T00:00:00,abc\n")
    with pytest.raises(DataError, match="line 2: non-numeric"):
        load_hourly_csv(tmp_path / "p.csv")


def test_partial_day_rejected(tmp_path):
    (tmp_path / "p.csv").write_text(hourly_rows(30))
    with pytest.raises(DataError, match="whole number of days"):
        load_hourly_csv(tmp_path / "p.csv")


def test_unordered_rows_are_sorted(tmp_path):
    text = hourly_rows(24).splitlines()
    shuffled = [text[0]] + text[1:][::-1]
    (tmp_path / "p.csv").write_text("\n".join(shuffled) + "\n")
    values, _ = load_hourly_csv(tmp_path / "p.csv")
    assert values[0] == 30 and values[-1] == 53


def test_daily_two_rows(tmp_path):
    (tmp_path / "d.csv").write_text("date,usd_per_mw_day\n2013-01-01,100\n2013-01-02,200\n")
    assert load_daily_csv(tmp_path / "d.csv") == (100.0, 200.0)


def test_daily_kw_year_converted(tmp_path):
    (tmp_path / "d.csv").write_text("date,usd_per_kw_year\n2013-01-01,36.5\n")
    assert load_daily_csv(tmp_path / "d.csv")[0] == pytest.approx(36.5 * 1000 / 365)


def test_daily_empty_file(tmp_path):
    (tmp_path / "d.csv").write_text("")
    with pytest.raises(DataError, match="empty"):
        load_daily_csv(tmp_path / "d.csv")


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-500, 5000, allow_nan=False), min_size=24, max_size=24))
def test_hourly_write_read_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("h") / "p.csv"
    write_hourly_csv(path, values, "2014-03-01T00:00:00")
    assert load_hourly_csv(path) == (tuple(values), "2014-03-01T00:00:00")


# -- config documents ------------------------------------------------------------------

def test_minimal_config_gets_defaults(tmp_path):
    sc = load_scenario(write_minimal(tmp_path))
    b = sc.battery
    assert (b.rated_capacity, b.soc_upper, b.soc_lower) == (1.0, 0.85, 0.30)
    assert b.max_discharge_power == b.max_charge_power == 1.337
    assert (b.investment_cost, b.fixed_om, b.variable_om) == (165.0, 8.0, 2.3)
    assert (sc.recovery_years, sc.interest_rate) == (10, 0.07)
    assert (sc.T, sc.D) == (48, 2)


def test_inverted_window_rejected(tmp_path):
    cfg = write_minimal(tmp_path, extra={"battery": {"S_dn": 0.9, "S_up": 0.3}})
    with pytest.raises(ValidationError) as err:
        load_scenario(cfg)
    assert "soc_lower ≥ soc_upper" in err.value.violations


def test_all_violations_reported_together(tmp_path):
    cfg = write_minimal(tmp_path, extra={"battery": {"S_dn": 0.9, "S_up": 0.3, "EOL": 2.0},
                                         "cable": {"eta_cab": 1.5}})
    with pytest.raises(ValidationError) as err:
        load_scenario(cfg)
    assert len(err.value.violations) >= 3


def test_schema_rejects_unknown_key_and_bad_type(tmp_path):
    cfg = write_minimal(tmp_path, extra={"bogus": 1, "tier": "quantum"})
    with pytest.raises(ValidationError) as err:
        load_scenario(cfg)
    assert any("bogus" in v for v in err.value.violations)
    assert any("quantum" in v for v in err.value.violations)


def test_missing_data_file_named(tmp_path):
    cfg = write_minimal(tmp_path)
    (tmp_path / "prices.csv").unlink()
    with pytest.raises(DataError, match="prices.csv"):
        load_scenario(cfg)


def test_bad_json_reports_line(tmp_path):
    (tmp_path / "cfg.json").write_text('{\n  "market": ,\n}')
    with pytest.raises(DataError, match="line 2"):
        load_scenario(tmp_path / "cfg.json")


def test_length_mismatch(tmp_path):
    cfg = write_minimal(tmp_path, hours=48, days=3)
    with pytest.raises(ValidationError, match="48 hourly prices but 3"):
        load_scenario(cfg)


def test_shipped_schema_matches_docs_copy():
    docs = SCHEMA_PATH.parents[2] / "docs" / "config.schema.json"
    assert json.loads(docs.read_text()) == json.loads(SCHEMA_PATH.read_text())


def test_save_load_round_trip(tmp_path):
    market, wind = synthesize_fixture("spiky", 2, 3)
    sc = Scenario("hybrid", "cycling-degradation", market, wind,
                  battery=BatteryParams(rated_capacity=2.0, initial_energy=1.0),
                  hybrid_split=0.25, name="rt")
    path = save_scenario(sc, tmp_path / "rt.json")
    again = load_scenario(path)
    assert again == sc
    save_scenario(again, tmp_path / "rt2.json")
    assert load_scenario(tmp_path / "rt2.json") == sc


def test_to_dict_passes_schema():
    market, wind = synthesize_fixture("flat", 1, 0)
    doc = scenario_to_dict(Scenario("onshore", "basic", market, wind))
    from offshore_bess.scenario import _schema_errors
    assert _schema_errors(doc) == []


def test_synthetic_market_block():
    sc = scenario_from_dict({"market": {"synthetic": {"kind": "sinusoid", "days": 3, "seed": 1}}})
    assert sc.T == 72 and sc.D == 3


def test_data_files_lists_every_input():
    names = {p.name for p in data_files(DATA / "spiky_2day.json")}
    assert names == {"spiky_2day.json", "spiky_2day_curves.csv", "spiky_2day_cycle_life.csv",
                     "spiky_2day_energy_prices.csv", "spiky_2day_capacity_prices.csv",
                     "spiky_2day_wind.csv"}


# -- synthetic fixtures -----------------------------------------------------------------

def test_flat_fixture_has_no_spread():
    market, _ = synthesize_fixture("flat", 1, 11)
    assert len(set(market.energy_prices)) == 1


def test_fixture_deterministic():
    assert synthesize_fixture("sinusoid", 2, 7) == synthesize_fixture("sinusoid", 2, 7)


def test_sinusoid_period():
    market, wind = synthesize_fixture("sinusoid", 3, 7)
    p = np.asarray(market.energy_prices)
    assert np.allclose(p[:24], p[24:48]) and np.allclose(p[:24], p[48:])
    assert all(0.0 <= f <= 1.0 for f in wind.capacity_factors)


@pytest.mark.parametrize("days", [1, 2, 5])
def test_spiky_one_spike_per_day(days):
    market, _ = synthesize_fixture("spiky", days, 7)
    p = np.asarray(market.energy_prices).reshape(days, 24)
    for day in p:
        assert int(np.sum(day >= 5 * np.median(day))) == 1


def test_frozen_fixtures_match_generator():
    for kind in ("sinusoid", "spiky", "flat"):
        market, wind = synthesize_fixture(kind, 2, 7)
        sc = load_scenario(DATA / f"{kind}_2day.json")
        assert sc.market.energy_prices == market.energy_prices
        assert sc.market.capacity_prices == market.capacity_prices
        assert sc.wind.capacity_factors == wind.capacity_factors


def test_partial_last_day_in_memory():
    market = MarketSeries((1.0,) * 30, (0.0, 0.0))
    assert market.violations() == [] and market.D == 2
    assert MarketSeries((1.0,) * 30, (0.0,)).violations()


def test_with_window_rebins_curves():
    market, wind = synthesize_fixture("flat", 1, 0)
    sc = Scenario("onshore", "basic", market, wind).with_window(0.2, 0.95)
    assert sc.violations() == []
    assert sc.curves.soc_bins[0] == 0.2 and sc.curves.soc_bins[-1] == 0.95


def test_wind_violations():
    assert WindSeries((1.2,)).violations()
    sc = Scenario("onshore", "basic", MarketSeries((1.0,) * 24, (0.0,)), WindSeries((0.5,) * 23))
    assert any("23 wind values" in v for v in sc.violations())


def test_rolling_needs_pinned_cable():
    market, wind = synthesize_fixture("flat", 1, 0)
    sc = replace(Scenario("onshore", "basic", market, wind), horizon_mode="rolling")
    assert any("pinned cable" in v for v in sc.violations())
