import numpy as np
import pytest

from landiv.instrument import count_high_heat_days, heat_day_table
from landiv.panel import LandUse, validate_panel
from landiv.simlab.panel_dgp import HEAT_MEAN, HEAT_SD, PanelDGP, daily_temperatures, simulate_panel


def test_panel_shape_and_validity(small_sim):
    panel = small_sim.panel
    assert len(panel) == 40 * 8
    assert validate_panel(panel) == []
    assert set(small_sim.rankings) == {o.key for o in panel}
    assert small_sim.planted()["Agriculture"] == -1.0


def test_heat_day_moments():
    sim = simulate_panel(PanelDGP(n_counties=600), seed=1)
    heat = np.array([o.high_heat_days for o in sim.panel])
    assert heat.mean() == pytest.approx(HEAT_MEAN, rel=0.05)
    assert heat.std() == pytest.approx(HEAT_SD, rel=0.08)


def test_seeded_reproducibility():
    a = simulate_panel(PanelDGP(n_counties=5), seed=4)
    b = simulate_panel(PanelDGP(n_counties=5), seed=4)
    assert a.panel == b.panel
    assert simulate_panel(PanelDGP(n_counties=5), seed=5).panel != a.panel


def test_daily_temperatures_reproduce_counts(small_sim):
    panel = small_sim.panel[:16]
    series = daily_temperatures(panel, seed=2)
    for obs in panel:
        assert count_high_heat_days(series[obs.county_id], obs.year) == obs.high_heat_days
    table = heat_day_table(series, [2015], threshold=80.0)
    for row in table:
        assert row.days >= count_high_heat_days(series[row.county_id], 2015, threshold=83.0)


def test_income_consistent_with_yield(small_sim):
    for obs in small_sim.panel[:20]:
        assert np.log(obs.corn_yield) + np.log(small_sim.prices[obs.year]) == pytest.approx(
            obs.log_income, abs=1e-12)


def test_every_next_best_stratum_present(small_sim):
    seen = {r.next_best for r in small_sim.rankings.values()}
    assert seen == set(LandUse)
