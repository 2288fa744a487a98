"""Engagement-frame geometry.

The engagement frame has the target's initial position at the origin with z up.
Cartesian vectors are plain ``numpy`` arrays of shape (3,); angles are radians.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from utils.errors import GeometryError, ZeroSpeedError


class SphericalVel(NamedTuple):
    V: float
    gamma: float
    psi: float


@dataclass(frozen=True)
class LosKinematics:
    lam: np.ndarray
    omega: np.ndarray
    r: float
    v_c: float
    r_tm: np.ndarray
    v_tm: np.ndarray


# Cartesian velocity -> (speed, flight path angle, heading).
# arctan2(0, 0) is taken as 0, so a vertical velocity has heading 0.
def c2s(v):
    v = np.asarray(v, dtype=float)
    speed = float(np.sqrt(v @ v))
    if speed <= 0.0:
        raise ZeroSpeedError("heading is undefined for a zero velocity vector")
    gamma = float(np.arcsin(np.clip(v[2] / speed, -1.0, 1.0)))
    psi = float(np.arctan2(v[1], v[0]))
    if psi == -np.pi:
        psi = np.pi
    return SphericalVel(speed, gamma, psi)


# (speed, flight path angle, heading) -> Cartesian velocity
def s2c(s):
    V, gamma, psi = s
    cos_gamma = np.cos(gamma)
    return np.array([
        V * cos_gamma * np.cos(psi),
        V * cos_gamma * np.sin(psi),
        V * np.sin(gamma),
    ])


# Vehicle position from initial range, altitude and azimuth (spherical parameterization about the target)
def initial_position(r_init, h_init, phi_init):
    if r_init <= 0.0:
        raise GeometryError(f"initial range must be positive, got {r_init}")
    if h_init < 0.0 or h_init >= r_init:
        raise GeometryError(f"initial altitude {h_init} m must lie in [0, {r_init}) m")
    theta = np.arcsin(h_init / r_init)
    return np.array([
        r_init * np.cos(theta) * np.cos(phi_init),
        r_init * np.cos(theta) * np.sin(phi_init),
        h_init,
    ])


# Line-of-sight unit vector, rotation vector, range and closing velocity
def los_kinematics(r_M, v_M, r_T, v_T):
    r_tm = np.asarray(r_T, dtype=float) - np.asarray(r_M, dtype=float)
    v_tm = np.asarray(v_T, dtype=float) - np.asarray(v_M, dtype=float)
    r_sq = float(r_tm @ r_tm)
    if r_sq <= 0.0:
        raise GeometryError("vehicle and target positions coincide")
    r = float(np.sqrt(r_sq))
    return LosKinematics(
        lam=r_tm / r,
        omega=np.cross(r_tm, v_tm) / r_sq,
        r=r,
        v_c=float(-(r_tm @ v_tm) / r),
        r_tm=r_tm,
        v_tm=v_tm,
    )


# Wrap an angle into (-pi, pi]
def wrap_angle(angle):
    wrapped = (angle + np.pi) % (2.0 * np.pi) - np.pi
    return np.pi if wrapped == -np.pi else float(wrapped)
