import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

NOSE_RADIUS = 0.034
EMISSIVITY = 0.85
STEFAN_BOLTZMANN = 5.670374419e-8
HEATING_COEFFICIENT = 1.83e-4
WALL_ENTHALPY_RATIO = 0.50

HEATING_LIMIT = 9.0e6          # W/m^2
DYNAMIC_PRESSURE_LIMIT = 4.0e6  # Pa
LOAD_LIMIT = 147.15            # m/s^2 (15 g)


class ConstraintType(str, Enum):
    HEATING = "Heating"
    DYNAMIC_PRESSURE = "DynamicPressure"
    LOAD = "Load"


# Short labels used in the Performance table's "Type" column
CONSTRAINT_SHORT_LABELS = {
    ConstraintType.HEATING: "HT",
    ConstraintType.DYNAMIC_PRESSURE: "DP",
    ConstraintType.LOAD: "Load",
}


@dataclass(frozen=True)
class ConstraintLimits:
    heating_rate: float = HEATING_LIMIT
    dynamic_pressure: float = DYNAMIC_PRESSURE_LIMIT
    load: float = LOAD_LIMIT


@dataclass(frozen=True)
class ConstraintStatus:
    heating_rate: float
    wall_temp: float
    dynamic_pressure: float
    load: float
    violated: Optional[ConstraintType] = None


# Stagnation heating with the wall enthalpy fixed at half the stagnation enthalpy
def heating_rate(rho, V, nose_radius=NOSE_RADIUS):
    return HEATING_COEFFICIENT / np.sqrt(nose_radius) * WALL_ENTHALPY_RATIO * np.sqrt(rho) * V**3


# Enthalpy-coupled form with h_w = 1000 T_w and h_o = V^2/2 + 2.3e5.
# Reference only; the constraint path uses heating_rate().
def heating_rate_enthalpy(rho, V, wall_temp, nose_radius=NOSE_RADIUS):
    h_w = 1000.0 * wall_temp
    h_o = 0.5 * V**2 + 2.3e5
    return HEATING_COEFFICIENT / np.sqrt(nose_radius) * (1.0 - h_w / h_o) * np.sqrt(rho) * V**3


# Radiative-equilibrium wall temperature
def wall_temperature(qdot, emissivity=EMISSIVITY):
    return (qdot / (emissivity * STEFAN_BOLTZMANN)) ** 0.25


def dynamic_pressure(rho, V):
    return 0.5 * rho * V**2


# Direction cosine matrix taking wind-axis components to body-axis components:
# rotate by -beta about z, then by alpha about the resulting y axis.
def wind_to_body(alpha, beta):
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    return np.array([
        [ca * cb, -ca * sb, -sa],
        [sb, cb, 0.0],
        [sa * cb, -sa * sb, ca],
    ])


# Normal load: magnitude of the body y/z aerodynamic force per unit mass.
# D, Y and L are magnitudes; the wind-axis force vector is [-D, Y, -L] since drag
# points along -x_wind and lift along -z_wind. With that sign convention the body
# components are
#   y = Y cos(beta) - D sin(beta)
#   z = -(D sin(alpha) cos(beta) + Y sin(alpha) sin(beta) + L cos(alpha))
# and at beta = 0 the result equals the one from [D, Y, L].
def load(forces, alpha, beta, mass):
    f_wind = np.array([-forces.D, forces.Y, -forces.L])
    f_body = wind_to_body(alpha, beta) @ f_wind
    return float(np.hypot(f_body[1], f_body[2]) / mass)


# Evaluate all three path constraints; the first violated one (Heating, DynamicPressure, Load) is tagged
def check_constraints(state, forces, mass, rho, limits=ConstraintLimits(), nose_radius=NOSE_RADIUS):
    V = state.speed
    qdot = heating_rate(rho, V, nose_radius)
    q = dynamic_pressure(rho, V)
    n = load(forces, state.alpha, state.beta, mass)

    violated = None
    if qdot > limits.heating_rate:
        violated = ConstraintType.HEATING
    elif q > limits.dynamic_pressure:
        violated = ConstraintType.DYNAMIC_PRESSURE
    elif n > limits.load:
        violated = ConstraintType.LOAD

    return ConstraintStatus(
        heating_rate=float(qdot),
        wall_temp=float(wall_temperature(qdot)),
        dynamic_pressure=float(q),
        load=n,
        violated=violated,
    )
