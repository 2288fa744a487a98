import math

import numpy as np
import pytest

from utils.aero.aerodynamics import (
    AeroCoefficients,
    AeroForces,
    aero_coefficients,
    coeff_CD,
    coeff_CL,
    coeff_CY,
    density,
    forces,
    in_envelope,
    mach,
)
from utils.aero.thermal import (
    ConstraintLimits,
    ConstraintType,
    check_constraints,
    dynamic_pressure,
    heating_rate,
    load,
    wall_temperature,
    wind_to_body,
    EMISSIVITY,
    STEFAN_BOLTZMANN,
)
from utils.dynamics.equations_of_motion import VehicleState
from utils.dynamics.frames import s2c


def _state(V, alpha=0.0, beta=0.0):
    return VehicleState(r_M=np.array([0.0, 0.0, 1000.0]), v_M=s2c((V, 0.0, 0.0)), alpha=alpha, beta=beta, nu=0.0)


def test_density():
    assert density(0.0) == 1.225
    assert density(7018.00344) == pytest.approx(1.225 / math.e, rel=1e-12)
    assert density(25000.0) == pytest.approx(0.03472, rel=1e-3)


def test_mach():
    assert mach(1700.0) == 5.0
    assert mach(0.0) == 0.0
    assert mach(3000.0) == pytest.approx(8.8235, abs=1e-4)


def test_side_force_vanishes_without_sideslip():
    for M in (3.0, 6.5, 10.0):
        for alpha in (0.0, 0.1, 0.2):
            assert coeff_CY(M, alpha, 0.0) == 0.0


def test_lift_coefficient_at_zero_alpha():
    expected = -0.081929 + 0.0470142 * 6 - 0.00919 * 36 + 0.000774 * 216 - 0.0000293 * 1296 + 0.000000412 * 7776
    assert coeff_CL(6.0, 0.0) == pytest.approx(expected, abs=1e-12)
    assert coeff_CL(6.0, 0.0) == pytest.approx(1.73e-3, abs=1e-5)


def test_horner_matches_term_sum_on_grid():
    for M in np.linspace(3.0, 10.0, 50):
        for alpha in np.linspace(0.0, math.radians(12.0), 50):
            assert abs(coeff_CL(M, alpha, "horner") - coeff_CL(M, alpha, "terms")) <= 1e-12
            assert abs(coeff_CD(M, alpha, "horner") - coeff_CD(M, alpha, "terms")) <= 1e-12
            assert abs(coeff_CY(M, alpha, 0.05, "horner") - coeff_CY(M, alpha, 0.05, "terms")) <= 1e-12


def test_perturbation_multipliers_scale_coefficients():
    base = aero_coefficients(7.0, 0.05, 0.02)
    scaled = aero_coefficients(7.0, 0.05, 0.02, k_cl=1.1, k_cd=0.9, k_cy=1.2)
    assert scaled.C_L == pytest.approx(1.1 * base.C_L)
    assert scaled.C_D == pytest.approx(0.9 * base.C_D)
    assert scaled.C_Y == pytest.approx(1.2 * base.C_Y)


def test_unknown_evaluation_method():
    with pytest.raises(ValueError):
        coeff_CL(6.0, 0.0, "bogus")


def test_envelope():
    assert in_envelope(8.0, 0.1)
    assert not in_envelope(2.0, 0.1)
    assert not in_envelope(8.0, 0.5)


def test_forces():
    assert forces(1.225, 0.0, 3.347, AeroCoefficients(1.0, 1.0, 1.0)) == (0.0, 0.0, 0.0)
    assert forces(1.225, 100.0, 3.347, AeroCoefficients(0.0, 0.1, 0.0)).D == pytest.approx(2050.04, abs=0.01)


def test_heating_rate():
    assert heating_rate(1.225, 0.0) == 0.0
    assert heating_rate(density(3000.0), 2500.0) == pytest.approx(6.93e6, rel=1e-3)


def test_wall_temperature():
    assert wall_temperature(EMISSIVITY * STEFAN_BOLTZMANN) == pytest.approx(1.0)
    assert wall_temperature(8.5e6) == pytest.approx(3644.0, abs=1.0)
    assert abs(wall_temperature(8.5e6) - 3650.0) / 3650.0 < 0.003


def test_dynamic_pressure():
    assert dynamic_pressure(1.225, 0.0) == 0.0
    assert dynamic_pressure(1.225, 2500.0) == pytest.approx(3.828e6, rel=1e-4)


def test_load():
    np.testing.assert_array_equal(wind_to_body(0.0, 0.0), np.eye(3))
    assert load(AeroForces(D=0.0, Y=0.0, L=147.15 * 1361.0), 0.0, 0.0, 1361.0) == pytest.approx(147.15)
    assert load(AeroForces(D=500.0, Y=300.0, L=400.0), 0.0, 0.0, 1.0) == pytest.approx(500.0)


@pytest.mark.parametrize("alpha, beta", [(0.1, 0.0), (0.1, 0.2), (0.2, -0.15)])
def test_load_uses_negative_drag_and_lift_in_wind_axes(alpha, beta):
    D, Y, L = 500.0, 300.0, 4000.0
    y = Y * np.cos(beta) - D * np.sin(beta)
    z = -(D * np.sin(alpha) * np.cos(beta) + Y * np.sin(alpha) * np.sin(beta) + L * np.cos(alpha))
    assert load(AeroForces(D=D, Y=Y, L=L), alpha, beta, 2.0) == pytest.approx(np.hypot(y, z) / 2.0, rel=1e-12)


def test_wind_to_body_is_a_rotation():
    C = wind_to_body(0.2, -0.1)
    np.testing.assert_allclose(C @ C.T, np.eye(3), atol=1e-15)
    assert np.linalg.det(C) == pytest.approx(1.0)


def test_default_limits():
    limits = ConstraintLimits()
    assert (limits.heating_rate, limits.dynamic_pressure, limits.load) == (9.0e6, 4.0e6, 147.15)


def test_nothing_violated_at_half_limits():
    rho, V = 0.01, 2000.0
    status = check_constraints(_state(V), AeroForces(0.0, 0.0, 0.5 * 147.15), 1.0, rho)
    assert status.heating_rate < 0.5 * 9.0e6
    assert status.violated is None


def test_heating_violation():
    V = 3000.0
    rho = (9.1e6 / heating_rate(1.0, V)) ** 2
    status = check_constraints(_state(V), AeroForces(0.0, 0.0, 0.0), 1361.0, rho)
    assert status.heating_rate == pytest.approx(9.1e6)
    assert status.violated == ConstraintType.HEATING


def test_dynamic_pressure_violation():
    V = 2000.0
    rho = 2.0 * 4.001e6 / V**2
    status = check_constraints(_state(V), AeroForces(0.0, 0.0, 0.0), 1361.0, rho)
    assert status.heating_rate < 9.0e6
    assert status.violated == ConstraintType.DYNAMIC_PRESSURE


@pytest.mark.parametrize("field", ["heating_rate", "dynamic_pressure", "load"])
def test_thresholds_are_strict(field):
    rho, V = 0.5, 2500.0
    f = AeroForces(0.0, 0.0, 120.0 * 1361.0)
    status = check_constraints(_state(V), f, 1361.0, rho, ConstraintLimits(1e12, 1e12, 1e12))
    value = getattr(status, field)
    at_limit = ConstraintLimits(**{**dict(heating_rate=1e12, dynamic_pressure=1e12, load=1e12), field: value})
    below = ConstraintLimits(**{**dict(heating_rate=1e12, dynamic_pressure=1e12, load=1e12), field: np.nextafter(value, 0.0)})
    assert check_constraints(_state(V), f, 1361.0, rho, at_limit).violated is None
    assert check_constraints(_state(V), f, 1361.0, rho, below).violated is not None
