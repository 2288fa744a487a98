from dataclasses import replace

import pytest

from utils.config.settings import ScenarioConfig


# Shortened engagement with every perturbation switched off
def quiet_scenario(**changes):
    base = ScenarioConfig(
        range_km=(40.0, 40.0),
        altitude_km=(10.0, 10.0),
        max_time_s=40.0,
        actuator_noise_deg_s=0.0,
        failure_probability=0.0,
        sensor_scale_error=0.0,
        lift_variation=0.0,
        drag_variation=0.0,
        sideforce_variation=0.0,
        density_variation=0.0,
        divert_probability=0.0,
    )
    return replace(base, **changes)


@pytest.fixture
def scenario():
    return quiet_scenario()
