import pytest
from hypothesis import HealthCheck, settings

from landiv.simlab.panel_dgp import PanelDGP, simulate_panel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_sim():
    """A 40-county synthetic panel with rankings, shared read-only across tests."""
    return simulate_panel(PanelDGP(n_counties=40), seed=3)


@pytest.fixture
def panel_csv(tmp_path, small_sim):
    from landiv.panel import write_panel

    path = tmp_path / "panel.csv"
    write_panel(small_sim.panel, path)
    return path
