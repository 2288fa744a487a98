"""Proportional-navigation comparator.

The commanded acceleration is ``N * v_c * (Omega x lambda)``. It is turned into
bank, angle-of-attack and sideslip rate commands by a plain bank-to-turn rule:
bank toward the direction of the required lift, set angle of attack from the
required lift in g, and drive sideslip to zero. With no line-of-sight
rate the required lift points straight up, so the bank command is wings level:
the bank rate is zero only at zero bank and otherwise returns the bank angle
to zero at `bank_gain`. The line of sight stands in
for the velocity direction since the observation carries no velocity vector.
This law is a sanity check and a training-free comparator, nothing more.
"""

from dataclasses import dataclass

import numpy as np

from utils.dynamics.equations_of_motion import GRAVITY
from utils.dynamics.frames import wrap_angle


@dataclass(frozen=True)
class PNGains:
    navigation_gain: float = 4.0
    bank_gain: float = 2.0        # 1/s
    alpha_gain: float = 2.0       # 1/s
    beta_gain: float = 2.0        # 1/s
    alpha_trim_deg: float = 2.0
    alpha_per_g_deg: float = 1.5


def _split(obs):
    obs = np.asarray(obs, dtype=float)
    return obs[0:3], obs[3:6], obs[6], obs[8], obs[9], obs[10]


def pn_acceleration(obs, navigation_gain=4.0):
    lam, omega, v_c, *_ = _split(obs)
    return navigation_gain * v_c * np.cross(omega, lam)


# Observation -> normalized rate commands (bank, alpha, sideslip) in units of the rate limits
def pn_baseline(obs, gains=PNGains(), rate_limits=np.radians([10.0, 4.0, 4.0])):
    lam, _, _, alpha, beta, nu = _split(obs)
    a_cmd = pn_acceleration(obs, gains.navigation_gain)

    lam = lam / np.linalg.norm(lam)
    gamma = np.arcsin(np.clip(lam[2], -1.0, 1.0))
    psi = np.arctan2(lam[1], lam[0])
    e_up = np.array([-np.sin(gamma) * np.cos(psi), -np.sin(gamma) * np.sin(psi), np.cos(gamma)])
    e_side = np.array([-np.sin(psi), np.cos(psi), 0.0])

    a_up = a_cmd @ e_up + GRAVITY * np.cos(gamma)
    a_side = a_cmd @ e_side
    bank_cmd = np.arctan2(a_side, a_up)
    lift_g = np.hypot(a_up, a_side) / GRAVITY
    alpha_cmd = np.radians(gains.alpha_trim_deg + gains.alpha_per_g_deg * (lift_g - 1.0))

    rates = np.array([
        gains.bank_gain * wrap_angle(bank_cmd - nu),
        gains.alpha_gain * (alpha_cmd - alpha),
        -gains.beta_gain * beta,
    ])
    return rates / np.asarray(rate_limits, dtype=float)


class PNAgent:
    name = "pn"

    def __init__(self, gains=PNGains(), rate_limits=np.radians([10.0, 4.0, 4.0])):
        self.gains = gains
        self.rate_limits = rate_limits

    def reset(self):
        pass

    def act(self, obs):
        return pn_baseline(obs, self.gains, self.rate_limits)
