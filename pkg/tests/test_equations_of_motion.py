import math

import numpy as np
import pytest

from utils.dynamics.equations_of_motion import (
    GRAVITY,
    TargetState,
    VehicleState,
    actuator_lag_derivatives,
    clamp_aero_angles,
    clip_speed,
    integration_dt,
    rk4_step,
    target_derivatives,
    vehicle_derivatives,
)
from utils.dynamics.frames import s2c
from utils.errors import IntegrationError, SingularityError


def _vehicle(V=3000.0, gamma=0.0, psi=0.0, nu=0.0):
    return VehicleState(r_M=np.zeros(3), v_M=s2c((V, gamma, psi)), alpha=0.0, beta=0.0, nu=nu)


def test_ballistic_turn_rate():
    d = vehicle_derivatives(_vehicle(V=2000.0, nu=0.4), (0.0, 0.0, 0.0), 1361.0, (0.0, 0.0, 0.0))
    assert d[3] == pytest.approx(0.0, abs=1e-15)
    assert d[4] == pytest.approx(-GRAVITY / 2000.0)
    assert d[5] == pytest.approx(0.0, abs=1e-15)


def test_lift_balances_gravity():
    mass, nu = 1361.0, 0.3
    lift = mass * GRAVITY / math.cos(nu)
    d = vehicle_derivatives(_vehicle(V=2500.0, nu=nu), (0.0, 0.0, lift), mass, (0.0, 0.0, 0.0))
    assert d[4] == pytest.approx(0.0, abs=1e-12)


def test_gravity_acts_through_flight_path_angle():
    d = vehicle_derivatives(_vehicle(gamma=math.radians(-5.0), psi=1.0), (1000.0, 0.0, 0.0), 1361.0, (0.0, 0.0, 0.0))
    assert d[3] == pytest.approx(0.1204, abs=1e-4)


def test_controls_pass_through_to_angle_rates():
    d = vehicle_derivatives(_vehicle(), (0.0, 0.0, 0.0), 1361.0, (0.1, 0.2, 0.3))
    # alpha, beta, nu
    np.testing.assert_array_equal(d[6:9], [0.2, 0.3, 0.1])


def test_vertical_flight_is_singular():
    with pytest.raises(SingularityError):
        vehicle_derivatives(_vehicle(gamma=math.pi / 2), (0.0, 0.0, 0.0), 1361.0, (0.0, 0.0, 0.0))


def test_actuator_lag():
    np.testing.assert_array_equal(actuator_lag_derivatives([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 0.1), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(actuator_lag_derivatives([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.1), [10.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        actuator_lag_derivatives([0.0] * 3, [1.0] * 3, 0.0)


def test_actuator_lag_step_response():
    tau, dt = 0.1, 0.001
    y = np.zeros(3)
    for _ in range(100):
        y = rk4_step(lambda s: actuator_lag_derivatives(s, [1.0, 1.0, 1.0], tau), y, dt)
    np.testing.assert_allclose(y, 1.0 - math.exp(-1.0), atol=1e-6)


def test_target_derivatives():
    target = TargetState(r_T=np.zeros(3), v_T=np.array([10.0, -5.0, 0.0]), a_T=np.array([0.1, 0.0, -0.2]))
    np.testing.assert_array_equal(target_derivatives(target), [10.0, -5.0, 0.0, 0.1, 0.0, -0.2])


def test_target_constant_velocity_is_straight_line():
    target = TargetState(r_T=np.zeros(3), v_T=np.array([3.0, 4.0, 0.0]), a_T=np.zeros(3))
    y = target.to_vector()
    for _ in range(10):
        y = rk4_step(lambda s: target_derivatives(target.with_vector(s)), y, 0.5)
    np.testing.assert_allclose(y, [15.0, 20.0, 0.0, 3.0, 4.0, 0.0])


def test_rk4_constant_and_exponential():
    np.testing.assert_array_equal(rk4_step(lambda s: np.zeros_like(s), np.array([1.0, 2.0]), 0.1), [1.0, 2.0])
    assert rk4_step(lambda s: s, np.array([1.0]), 0.1)[0] == pytest.approx(math.exp(0.1), abs=1e-7)


def test_rk4_convergence_order():
    def global_error(n):
        y = np.array([1.0])
        for _ in range(n):
            y = rk4_step(lambda s: s, y, 1.0 / n)
        return abs(y[0] - math.e)

    order = math.log2(global_error(10) / global_error(20))
    assert order >= 3.9


def test_rk4_surfaces_non_finite_derivatives():
    with pytest.raises(IntegrationError):
        rk4_step(lambda s: np.full_like(s, np.nan), np.array([1.0]), 0.1)
    with pytest.raises(ValueError):
        rk4_step(lambda s: s, np.array([1.0]), 0.0)


def test_rk4_stops_at_the_first_non_finite_stage():
    calls = []

    def nan_at_first_call(s):
        calls.append(s.copy())
        return np.full_like(s, np.nan)

    with pytest.raises(IntegrationError, match="k1"):
        rk4_step(nan_at_first_call, np.array([1.0]), 0.1)
    assert len(calls) == 1

    calls.clear()

    def inf_after_first_call(s):
        calls.append(s.copy())
        return s if len(calls) == 1 else np.full_like(s, np.inf)

    with pytest.raises(IntegrationError, match="k2"):
        rk4_step(inf_after_first_call, np.array([1.0]), 0.1)
    assert len(calls) == 2


def test_ballistic_trajectory_matches_closed_form():
    V0, gamma0, psi0 = 1000.0, 0.2, 0.3

    def derivative(y):
        state = VehicleState(r_M=y[0:3], v_M=s2c(y[3:6]), alpha=0.0, beta=0.0, nu=0.0)
        return vehicle_derivatives(state, (0.0, 0.0, 0.0), 1000.0, (0.0, 0.0, 0.0))[0:6]

    y = np.array([0.0, 0.0, 0.0, V0, gamma0, psi0])
    for _ in range(1000):
        y = rk4_step(derivative, y, 0.01)

    v0 = s2c((V0, gamma0, psi0))
    t = 10.0
    expected = [v0[0] * t, v0[1] * t, v0[2] * t - 0.5 * GRAVITY * t**2]
    np.testing.assert_allclose(y[0:3], expected, atol=0.1)


def test_clip_speed_keeps_direction():
    np.testing.assert_allclose(clip_speed(np.array([30.0, 40.0, 0.0]), 25.0), [15.0, 20.0, 0.0])
    np.testing.assert_array_equal(clip_speed(np.array([3.0, 4.0, 0.0]), 25.0), [3.0, 4.0, 0.0])


def test_clamp_aero_angles():
    y = np.zeros(12)
    y[6:9] = [0.5, -0.5, 4.0]
    out = clamp_aero_angles(y, (0.0, 0.2), (-0.2, 0.2), (-math.pi, math.pi))
    np.testing.assert_allclose(out[6:9], [0.2, -0.2, math.pi])
    assert y[6] == 0.5


def test_integration_dt():
    assert integration_dt(0.1, 300, False) == 0.1
    assert integration_dt(0.1, 300, True) == pytest.approx(0.1 / 300)
