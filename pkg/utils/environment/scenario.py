"""Per-episode randomization: initial conditions, model perturbations,
actuator failures, sensor scale factors and the divert schedule.

Everything random about an episode is drawn here, once, at reset, from the
episode's own generator and in a fixed order. The environment only consumes
the generator afterwards for actuator noise and (optionally) per-step sensor
factors.
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from utils.dynamics.equations_of_motion import TargetState, VehicleState
from utils.dynamics.frames import initial_position, s2c, wrap_angle

logger = logging.getLogger(__name__)

OBSERVATION_SIZE = 11


@dataclass(frozen=True)
class PendingDivert:
    trigger_range: float   # m
    offset: np.ndarray     # m, z component always 0
    v_T: np.ndarray
    a_T: np.ndarray
    final: bool = False    # evasion only: return to the true aim point


@dataclass(frozen=True)
class EpisodeDraw:
    vehicle: VehicleState
    target: TargetState
    k_cl: float = 1.0
    k_cd: float = 1.0
    k_cy: float = 1.0
    k_rho: float = 1.0
    mass_scale: float = 1.0
    area_scale: float = 1.0
    failed: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=bool))
    failure_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sensor_factors: np.ndarray = field(default_factory=lambda: np.ones(OBSERVATION_SIZE))
    diverts: Tuple[PendingDivert, ...] = ()
    heading_error: float = 0.0

    @property
    def divert_ranges(self):
        return tuple(d.trigger_range for d in self.diverts)


def _uniform(rng, bounds):
    return float(rng.uniform(bounds[0], bounds[1]))


# Uniform direction on the sphere from a normalized U(-1, 1, 3) draw; a zero draw is redrawn
def random_direction(rng):
    while True:
        v = rng.uniform(-1.0, 1.0, 3)
        norm = float(np.linalg.norm(v))
        if norm > 0.0:
            return v / norm


def draw_target_motion(config, rng):
    v_T = random_direction(rng) * rng.uniform(0.0, config.target_max_speed_m_s)
    a_T = random_direction(rng) * rng.uniform(0.0, config.target_max_accel_m_s2)
    return v_T, a_T


# Multiplier 1 + U(-v, v)
def perturbation(rng, variation):
    return 1.0 + float(rng.uniform(-variation, variation))


def divert_offset(rng, trigger_range, fraction):
    half_width = fraction * trigger_range
    return np.array([rng.uniform(-half_width, half_width), rng.uniform(-half_width, half_width), 0.0])


# Trigger ranges: one optional divert, or an evasion chain stepping down from the start range
def divert_trigger_ranges(config, rng):
    if config.evasion:
        separation = config.evasion_separation_km * 1000.0
        ranges = []
        r = config.evasion_start_km * 1000.0
        while r >= config.evasion_end_km * 1000.0:
            ranges.append(r)
            r -= rng.uniform(separation, 2.0 * separation)
        return ranges
    if rng.random() < config.divert_probability:
        return [rng.uniform(config.divert_range_km[0], config.divert_range_km[1]) * 1000.0]
    return []


def draw_diverts(config, rng):
    ranges = divert_trigger_ranges(config, rng)
    diverts = []
    for i, trigger_range in enumerate(ranges):
        final = config.evasion and i == len(ranges) - 1
        offset = np.zeros(3) if final else divert_offset(rng, trigger_range, config.divert_fraction)
        v_T, a_T = draw_target_motion(config, rng)
        diverts.append(PendingDivert(trigger_range=float(trigger_range), offset=offset, v_T=v_T, a_T=a_T, final=final))
    return tuple(diverts)


def initial_vehicle(config, rng):
    r_init = _uniform(rng, config.range_km) * 1000.0
    phi = np.radians(_uniform(rng, config.azimuth_deg))
    h_init = _uniform(rng, config.altitude_km) * 1000.0
    V = _uniform(rng, config.speed_m_s)
    gamma = np.radians(_uniform(rng, config.flight_path_angle_deg))
    heading_error = np.radians(_uniform(rng, config.heading_error_deg))
    alpha = np.radians(_uniform(rng, config.alpha_init_deg))
    beta = np.radians(_uniform(rng, config.sideslip_init_deg))
    nu = np.radians(_uniform(rng, config.bank_init_deg))

    r_M = initial_position(r_init, h_init, phi)
    # target starts at the origin
    r_TM = -r_M
    psi_ideal = np.arctan2(r_TM[1], r_TM[0])
    psi = wrap_angle(psi_ideal + heading_error)
    vehicle = VehicleState(r_M=r_M, v_M=s2c((V, gamma, psi)), alpha=float(alpha), beta=float(beta), nu=float(nu))
    return vehicle, float(heading_error)


# Draw everything random about one episode
def sample_episode(config, rng):
    vehicle, heading_error = initial_vehicle(config, rng)
    v_T, a_T = draw_target_motion(config, rng)
    target = TargetState(r_T=np.zeros(3), v_T=v_T, a_T=a_T)

    k_cl = perturbation(rng, config.lift_variation)
    k_cd = perturbation(rng, config.drag_variation)
    k_cy = perturbation(rng, config.sideforce_variation)
    k_rho = perturbation(rng, config.density_variation)
    mass_scale = perturbation(rng, config.mass_area_bias)
    area_scale = perturbation(rng, config.mass_area_bias)

    failed = rng.random(3) < config.failure_probability
    bias = rng.uniform(config.failure_bias_range[0], config.failure_bias_range[1], 3)
    failure_bias = np.where(failed, bias, 0.0)

    sensor_factors = sensor_scale_factors(rng, config.sensor_scale_error)
    diverts = draw_diverts(config, rng)

    logger.debug(
        "sample_episode() called: r0=%.0f m, %d divert(s), failed channels %s",
        float(np.linalg.norm(vehicle.r_M)), len(diverts), failed.tolist(),
    )
    return EpisodeDraw(
        vehicle=vehicle,
        target=target,
        k_cl=k_cl,
        k_cd=k_cd,
        k_cy=k_cy,
        k_rho=k_rho,
        mass_scale=mass_scale,
        area_scale=area_scale,
        failed=failed,
        failure_bias=failure_bias,
        sensor_factors=sensor_factors,
        diverts=diverts,
        heading_error=heading_error,
    )


def sensor_scale_factors(rng, scale_error):
    return 1.0 + rng.uniform(-scale_error, scale_error, OBSERVATION_SIZE)
