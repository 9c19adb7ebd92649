import os

import pytest
from hypothesis import HealthCheck, settings

from nrsense.channel import NoiseModel
from nrsense.config import ScenarioConfig

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def small_scenario(**flat) -> ScenarioConfig:
    """A cheap scenario: 4x4 array, 256 subcarriers, 16 occasions."""
    base = {
        "prs.n_subcarriers": 256,
        "prs.n_cpi": 16,
        "array.n_rows": 4,
        "array.n_cols": 4,
        "rx.aoa_fft_size": 32,
        "scenario.n_targets": 2,
        "scenario.sector_radius_m": 300.0,
        "scenario.n_drops": 3,
    }
    base.update(flat)
    return ScenarioConfig().replace(**base)


@pytest.fixture
def small():
    return small_scenario()


@pytest.fixture
def quiet_noise():
    return NoiseModel(thermal=False)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
