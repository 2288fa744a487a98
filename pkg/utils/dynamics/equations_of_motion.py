import logging
from dataclasses import dataclass, field, replace

import numpy as np

from utils.dynamics.frames import c2s, s2c
from utils.errors import IntegrationError, SingularityError

logger = logging.getLogger(__name__)

GRAVITY = 9.81
MIN_COS_GAMMA = 1e-6

# Layout of the vehicle block in the integration vector:
# [x, y, z, V, gamma, psi, alpha, beta, nu, lag_dnu, lag_dalpha, lag_dbeta]
VEHICLE_VECTOR_SIZE = 12


@dataclass(frozen=True)
class VehicleState:
    r_M: np.ndarray
    v_M: np.ndarray
    alpha: float
    beta: float
    nu: float
    lag: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0

    @property
    def altitude(self):
        return float(self.r_M[2])

    @property
    def speed(self):
        return float(np.linalg.norm(self.v_M))

    # Integration vector uses the spherical velocity formulation
    def to_vector(self):
        V, gamma, psi = c2s(self.v_M)
        return np.concatenate([self.r_M, [V, gamma, psi, self.alpha, self.beta, self.nu], self.lag])

    # v_M is refreshed from (V, gamma, psi) after every integration step
    @classmethod
    def from_vector(cls, y, t):
        return cls(
            r_M=np.array(y[0:3]),
            v_M=s2c((y[3], y[4], y[5])),
            alpha=float(y[6]),
            beta=float(y[7]),
            nu=float(y[8]),
            lag=np.array(y[9:12]),
            t=t,
        )


@dataclass(frozen=True)
class TargetState:
    r_T: np.ndarray
    v_T: np.ndarray
    a_T: np.ndarray

    def to_vector(self):
        return np.concatenate([self.r_T, self.v_T])

    def with_vector(self, y):
        return replace(self, r_T=np.array(y[0:3]), v_T=np.array(y[3:6]))


# Point-mass equations of motion in (V, gamma, psi) form.
# Returns [r_dot(3), V_dot, gamma_dot, psi_dot, alpha_dot, beta_dot, nu_dot].
# Gravity acts through sin(gamma) in V_dot.
def vehicle_derivatives(state, forces, mass, controls):
    D, Y, L = forces
    dnu, dalpha, dbeta = controls
    V, gamma, psi = c2s(state.v_M)
    cos_gamma = np.cos(gamma)
    if cos_gamma < MIN_COS_GAMMA:
        raise SingularityError(f"flight path angle {np.degrees(gamma):.6f} deg is too close to vertical")

    cos_nu = np.cos(state.nu)
    sin_nu = np.sin(state.nu)
    V_dot = -D / mass - GRAVITY * np.sin(gamma)
    gamma_dot = (L * cos_nu - Y * sin_nu) / (mass * V) - GRAVITY * cos_gamma / V
    psi_dot = (L * sin_nu + Y * cos_nu) / (mass * V * cos_gamma)

    return np.concatenate([state.v_M, [V_dot, gamma_dot, psi_dot, dalpha, dbeta, dnu]])


# First-order actuator lag on the three rate channels (bank, alpha, beta)
def actuator_lag_derivatives(filter_state, command, tau):
    if tau <= 0.0:
        raise ValueError(f"actuator time constant must be positive, got {tau}")
    return (np.asarray(command, dtype=float) - np.asarray(filter_state, dtype=float)) / tau


# Constant-acceleration target: [r_T_dot, v_T_dot]
def target_derivatives(target):
    return np.concatenate([target.v_T, target.a_T])


# Clip speed to max_speed, keeping direction
def clip_speed(v, max_speed):
    speed = float(np.linalg.norm(v))
    if speed > max_speed:
        return v * (max_speed / speed)
    return v


def clip_target_speed(target, max_speed):
    return replace(target, v_T=clip_speed(target.v_T, max_speed))


# Enforce the aero angle limits by clamping after a step
def clamp_aero_angles(y, alpha_limits, beta_limits, bank_limits):
    y = np.array(y)
    y[6] = np.clip(y[6], *alpha_limits)
    y[7] = np.clip(y[7], *beta_limits)
    y[8] = np.clip(y[8], *bank_limits)
    return y


def _stage(derivative_fn, y, name):
    k = derivative_fn(y)
    if not np.all(np.isfinite(k)):
        raise IntegrationError(f"non-finite state derivative at RK4 stage {name}")
    return k


# Classical fourth-order Runge-Kutta step for y_dot = f(y)
def rk4_step(derivative_fn, state, dt):
    if dt <= 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    y0 = np.asarray(state, dtype=float)

    k1 = _stage(derivative_fn, y0, "k1")
    k2 = _stage(derivative_fn, y0 + 0.5 * dt * k1, "k2")
    k3 = _stage(derivative_fn, y0 + 0.5 * dt * k2, "k3")
    k4 = _stage(derivative_fn, y0 + dt * k3, "k4")

    return y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Substep size: base step, or base / divisor once the fine regime has been entered
def integration_dt(base_dt, fine_divisor, fine_active):
    return base_dt / fine_divisor if fine_active else base_dt
