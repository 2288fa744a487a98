"""Terminal-phase engagement environment.

One ``EngagementEnv`` runs one episode at a time: ``reset`` draws the episode,
``step`` applies one guidance command and integrates the vehicle, the target
and the actuator lag filters over one guidance period. The integration vector
carries the vehicle block, the current target and the true aim point (the aim
point is what an evasion chain finally returns to).
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd

from utils.aero.aerodynamics import aero_coefficients, density, forces, in_envelope, mach
from utils.aero.thermal import ConstraintLimits, check_constraints
from utils.dynamics.equations_of_motion import (
    VEHICLE_VECTOR_SIZE,
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
from utils.dynamics.frames import los_kinematics, wrap_angle
from utils.environment.scenario import sample_episode, sensor_scale_factors
from utils.errors import EpisodeFailure, GeometryError, SimulationError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["t", "x", "y", "z", "V", "gamma", "psi", "alpha", "beta", "nu", "qdot", "q", "n", "r", "v_c", "reward", "event"]
TARGET_COLUMNS = ["x_T", "y_T", "z_T"]

CLOSING_VELOCITY = "closing_velocity"
GROUND_IMPACT = "ground_impact"
CONSTRAINT = "constraint"
TIMEOUT = "timeout"
FAILURE = "failure"
INTERCEPT_REASONS = (CLOSING_VELOCITY, GROUND_IMPACT)

_TARGET = slice(VEHICLE_VECTOR_SIZE, VEHICLE_VECTOR_SIZE + 6)
_AIM = slice(VEHICLE_VECTOR_SIZE + 6, VEHICLE_VECTOR_SIZE + 12)
_TIME_EPS = 1e-9


class RewardComponents(NamedTuple):
    shaping: float
    control: float
    bonus: float

    @property
    def total(self):
        return self.shaping + self.control + self.bonus


class ProcessedAction(NamedTuple):
    rates: np.ndarray       # rad/s after clip, failure scaling and noise
    normalized: np.ndarray  # post-clip commands over their limits, in [-1, 1]


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    components: RewardComponents
    done: bool
    info: dict = field(default_factory=dict)


# Bank, alpha and sideslip rate limits in rad/s
def rate_limits(config):
    return np.radians(np.asarray(config.rate_limits_deg_s, dtype=float))


# Raw policy output -> commanded rates: clip to the rate limits, scale failed
# channels by (1 + eps), add Gaussian actuator noise
def process_action(u, draw, rng, config):
    limits = rate_limits(config)
    commanded = np.clip(np.asarray(u, dtype=float) * limits, -limits, limits)
    normalized = commanded / limits
    rates = np.where(draw.failed, commanded * (1.0 + draw.failure_bias), commanded)
    rates = rates + rng.normal(0.0, np.radians(config.actuator_noise_deg_s), 3)
    return ProcessedAction(rates=rates, normalized=normalized)


# [lambda, Omega, v_c, r, alpha, beta, nu] scaled componentwise by the sensor factors
def make_observation(los, vehicle, sensor_factors):
    clean = np.concatenate([los.lam, los.omega, [los.v_c, los.r, vehicle.alpha, vehicle.beta, vehicle.nu]])
    return clean * sensor_factors


def shaping_reward(omega, sigma, weight=1.0):
    omega = np.asarray(omega, dtype=float)
    return float(weight * np.exp(-(omega @ omega) / sigma**2))


def compute_reward(omega, normalized_rates, config, done=False, altitude=None, miss=None, speed=None, reason=CLOSING_VELOCITY):
    shaping = shaping_reward(omega, config.sigma_omega_rad_s, config.shaping_weight)
    control = float(config.control_weight * np.linalg.norm(normalized_rates))
    bonus = 0.0
    if (
        done
        and reason in INTERCEPT_REASONS
        and altitude < 0.0
        and miss < config.bonus_miss_m
        and speed > config.bonus_speed_m_s
    ):
        bonus = float(config.bonus)
    components = RewardComponents(shaping=shaping, control=control, bonus=bonus)
    return components.total, components


# Closest approach on a segment of relative motion, assumed linear between
# the end points. Returns (distance, s) with s in [0, 1].
def closest_approach(p0, p1):
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    dd = float(d @ d)
    s = 0.0 if dd == 0.0 else float(np.clip(-(p0 @ d) / dd, 0.0, 1.0))
    return float(np.linalg.norm(p0 + s * d)), s


# Miss split along and across the horizontal velocity direction
def miss_components(rel, v_M):
    horizontal = np.array([v_M[0], v_M[1]])
    norm = float(np.linalg.norm(horizontal))
    e_down = horizontal / norm if norm > 0.0 else np.array([1.0, 0.0])
    e_cross = np.array([-e_down[1], e_down[0]])
    return float(rel[:2] @ e_down), float(rel[:2] @ e_cross)


class EngagementEnv:

    def __init__(self, config, record_trace=True):
        self.config = config
        self.record_trace = record_trace
        self.limits = ConstraintLimits(
            heating_rate=config.heating_limit_w_m2,
            dynamic_pressure=config.dynamic_pressure_limit_pa,
            load=config.load_limit_m_s2,
        )
        self._angle_limits = (
            np.radians(config.alpha_limits_deg),
            np.radians(config.sideslip_limits_deg),
            np.radians(config.bank_limits_deg),
        )
        self.draw = None
        self.done = True

    # --- state views -------------------------------------------------------

    @property
    def vehicle(self):
        return VehicleState.from_vector(self._y[:VEHICLE_VECTOR_SIZE], self.t)

    @property
    def target(self):
        y = self._y[_TARGET]
        return TargetState(r_T=np.array(y[0:3]), v_T=np.array(y[3:6]), a_T=self._target_accel)

    @property
    def aim(self):
        y = self._y[_AIM]
        return TargetState(r_T=np.array(y[0:3]), v_T=np.array(y[3:6]), a_T=self._aim_accel)

    @property
    def mass(self):
        return self.config.mass_kg * self.draw.mass_scale

    def reset(self, seed=None):
        logger.debug("reset() called with seed: %s", seed)
        self.rng = np.random.default_rng(seed)
        self.draw = sample_episode(self.config, self.rng)
        target = self.draw.target
        self._y = np.concatenate([self.draw.vehicle.to_vector(), target.to_vector(), target.to_vector()])
        self._target_accel = np.array(target.a_T)
        self._aim_accel = np.array(target.a_T)
        self.t = 0.0
        self.steps = 0
        self.fine = False
        self.done = False
        self._next_divert = 0
        self._envelope_logged = False
        self.sensor_factors = self.draw.sensor_factors
        self.peaks = {"qdot": 0.0, "q": 0.0, "n": 0.0}
        self.violation = None
        self.violation_time = None
        self.divert_log = []
        self.trace = []
        self.total_reward = 0.0

        vehicle = self.vehicle
        self._los = los_kinematics(vehicle.r_M, vehicle.v_M, target.r_T, target.v_T)
        status = self._constraint_status(vehicle)
        self._update_peaks(status)
        self._record(vehicle, target.r_T, status.heating_rate, status.dynamic_pressure, status.load, self._los, 0.0, "reset")
        return make_observation(self._los, vehicle, self.sensor_factors), self.draw

    # --- physics -----------------------------------------------------------

    def _aero(self, vehicle):
        rho = density(vehicle.altitude) * self.draw.k_rho
        V = vehicle.speed
        M = mach(V, self.config.speed_of_sound_m_s)
        if not self._envelope_logged and not in_envelope(M, vehicle.alpha):
            logger.debug("aero model outside its fit envelope at t=%.2f s: M=%.2f, alpha=%.2f deg", self.t, M, np.degrees(vehicle.alpha))
            self._envelope_logged = True
        coeffs = aero_coefficients(M, vehicle.alpha, vehicle.beta, self.draw.k_cl, self.draw.k_cd, self.draw.k_cy)
        return rho, forces(rho, V, self.config.ref_area_m2 * self.draw.area_scale, coeffs)

    def _derivatives(self, y, rates):
        vehicle = VehicleState.from_vector(y[:VEHICLE_VECTOR_SIZE], self.t)
        _, f = self._aero(vehicle)
        lag = y[9:12]
        target = y[_TARGET]
        aim = y[_AIM]
        return np.concatenate([
            vehicle_derivatives(vehicle, f, self.mass, lag),
            actuator_lag_derivatives(lag, rates, self.config.actuator_tau_s),
            target_derivatives(TargetState(r_T=target[0:3], v_T=target[3:6], a_T=self._target_accel)),
            target_derivatives(TargetState(r_T=aim[0:3], v_T=aim[3:6], a_T=self._aim_accel)),
        ])

    def _constraint_status(self, vehicle):
        rho, f = self._aero(vehicle)
        return check_constraints(vehicle, f, self.mass, rho, self.limits, self.config.nose_radius_m)

    def _update_peaks(self, status):
        self.peaks["qdot"] = max(self.peaks["qdot"], status.heating_rate)
        self.peaks["q"] = max(self.peaks["q"], status.dynamic_pressure)
        self.peaks["n"] = max(self.peaks["n"], status.load)
        if status.violated is not None and self.violation is None:
            self.violation = status.violated
            self.violation_time = self.t
            logger.debug("%s constraint violated at t=%.2f s", status.violated.value, self.t)

    def _integrate(self, rates, dt):
        y = rk4_step(lambda y: self._derivatives(y, rates), self._y, dt)
        y = clamp_aero_angles(y, *self._angle_limits)
        y[5] = wrap_angle(y[5])
        y[VEHICLE_VECTOR_SIZE + 3:VEHICLE_VECTOR_SIZE + 6] = clip_speed(y[VEHICLE_VECTOR_SIZE + 3:VEHICLE_VECTOR_SIZE + 6], self.config.target_max_speed_m_s)
        y[VEHICLE_VECTOR_SIZE + 9:VEHICLE_VECTOR_SIZE + 12] = clip_speed(y[VEHICLE_VECTOR_SIZE + 9:VEHICLE_VECTOR_SIZE + 12], self.config.target_max_speed_m_s)
        self._y = y
        self.t += dt

    # --- diverts -----------------------------------------------------------

    # Apply the next scheduled divert once the range drops below its trigger
    def maybe_divert(self, r):
        if self._next_divert >= len(self.draw.diverts):
            return None
        pending = self.draw.diverts[self._next_divert]
        if r >= pending.trigger_range:
            return None
        self._next_divert += 1
        before = self._y[_TARGET][0:3].copy()
        if pending.final:
            self._y[_TARGET] = self._y[_AIM]
            self._target_accel = np.array(self._aim_accel)
        else:
            self._y[VEHICLE_VECTOR_SIZE:VEHICLE_VECTOR_SIZE + 3] = before + pending.offset
            self._y[VEHICLE_VECTOR_SIZE + 3:VEHICLE_VECTOR_SIZE + 6] = pending.v_T
            self._target_accel = np.array(pending.a_T)
        after = self._y[_TARGET][0:3]
        event = {
            "index": self._next_divert,
            "t": self.t,
            "trigger_range": pending.trigger_range,
            "range": r,
            "dx": float(after[0] - before[0]),
            "dy": float(after[1] - before[1]),
            "final": pending.final,
        }
        self.divert_log.append(event)
        logger.debug("divert %d triggered at r=%.0f m (offset %.0f, %.0f m)", event["index"], r, event["dx"], event["dy"])
        return event

    # --- stepping ----------------------------------------------------------

    def _terminal_by_closest_approach(self, r_M0, r_T0, V0, r_M1, r_T1, V1, reason):
        p0 = r_M0 - r_T0
        p1 = r_M1 - r_T1
        if reason == GROUND_IMPACT:
            z0, z1 = r_M0[2], r_M1[2]
            s = float(z0 / (z0 - z1)) if z0 != z1 else 1.0
            miss = float(np.linalg.norm(p0 + s * (p1 - p0)))
        else:
            miss, s = closest_approach(p0, p1)
        return {
            "reason": reason,
            "miss": miss,
            "terminal_speed": float(V0 + s * (V1 - V0)),
            "r_M": r_M0 + s * (r_M1 - r_M0),
            "r_T": r_T0 + s * (r_T1 - r_T0),
            "t": self.t - (1.0 - s) * self._last_dt,
        }

    def _terminal_at_current_state(self, reason, failure=None):
        vehicle = self.vehicle
        r_T = self._y[_TARGET][0:3].copy()
        return {
            "reason": reason,
            "miss": float(np.linalg.norm(vehicle.r_M - r_T)),
            "terminal_speed": vehicle.speed,
            "r_M": vehicle.r_M,
            "r_T": r_T,
            "t": self.t,
            "failure": failure,
        }

    def step(self, u):
        if self.done:
            raise EpisodeFailure("step() called on a finished episode; call reset() first")
        config = self.config
        action = process_action(u, self.draw, self.rng, config)
        diverts_before = len(self.divert_log)
        step_peaks = np.zeros(3)
        terminal = None
        elapsed = 0.0
        period = config.guidance_period_s

        try:
            while period - elapsed > 1e-12 and terminal is None:
                dt = min(integration_dt(config.base_dt_s, config.fine_dt_divisor, self.fine), period - elapsed)
                before = self.vehicle
                r_T0 = self._y[_TARGET][0:3].copy()
                self._integrate(action.rates, dt)
                self._last_dt = dt
                elapsed += dt
                vehicle = self.vehicle
                target = self.target
                r_tm = target.r_T - vehicle.r_M
                r = float(np.linalg.norm(r_tm))
                if not self.fine and r < config.fine_dt_range_m:
                    self.fine = True
                    logger.debug("fine integration step engaged at t=%.3f s, r=%.1f m", self.t, r)

                if config.termination_mode == "GroundImpact":
                    if vehicle.altitude < 0.0:
                        terminal = self._terminal_by_closest_approach(before.r_M, r_T0, before.speed, vehicle.r_M, target.r_T, vehicle.speed, GROUND_IMPACT)
                elif r == 0.0 or float(r_tm @ (target.v_T - vehicle.v_M)) > 0.0:
                    # range rate positive means v_c < 0
                    terminal = self._terminal_by_closest_approach(before.r_M, r_T0, before.speed, vehicle.r_M, target.r_T, vehicle.speed, CLOSING_VELOCITY)

                status = self._constraint_status(vehicle)
                step_peaks = np.maximum(step_peaks, [status.heating_rate, status.dynamic_pressure, status.load])
                self._update_peaks(status)
                if terminal is None and status.violated is not None and config.constraint_mode == "TerminateOnViolation":
                    terminal = self._terminal_at_current_state(CONSTRAINT)

                if terminal is None:
                    event = self.maybe_divert(r)
                    if event is not None and self.record_trace:
                        self._record(
                            vehicle, self._y[_TARGET][0:3], status.heating_rate, status.dynamic_pressure, status.load,
                            None, 0.0, f"divert {event['index']}: dx={event['dx']:.1f} m, dy={event['dy']:.1f} m",
                        )
        except SimulationError as e:
            logger.warning("episode failed at t=%.3f s: %s", self.t, e)
            terminal = self._terminal_at_current_state(FAILURE, failure=str(e))

        if terminal is None and self.t >= config.max_time_s - _TIME_EPS:
            terminal = self._terminal_at_current_state(TIMEOUT)

        self.steps += 1
        vehicle = self.vehicle
        target = self.target
        try:
            self._los = los_kinematics(vehicle.r_M, vehicle.v_M, target.r_T, target.v_T)
        except GeometryError as e:
            logger.debug("exact hit at t=%.3f s, holding the last line of sight: %s", self.t, e)

        if config.sensor_bias_per_step:
            self.sensor_factors = sensor_scale_factors(self.rng, config.sensor_scale_error)
        observation = make_observation(self._los, vehicle, self.sensor_factors)

        done = terminal is not None
        if done:
            reward, components = compute_reward(
                self._los.omega, action.normalized, config, done=True,
                altitude=vehicle.altitude, miss=terminal["miss"], speed=terminal["terminal_speed"], reason=terminal["reason"],
            )
        else:
            reward, components = compute_reward(self._los.omega, action.normalized, config)
        self.total_reward += reward

        self._record(vehicle, target.r_T, *step_peaks, self._los, reward, "")
        info = {
            "t": self.t,
            "step": self.steps,
            "rates": action.rates,
            "step_peaks": {"qdot": step_peaks[0], "q": step_peaks[1], "n": step_peaks[2]},
            "violation": self.violation.value if self.violation is not None else None,
            "divert_events": self.divert_log[diverts_before:],
        }
        if done:
            self.done = True
            info.update(self._terminal_info(terminal, components.bonus))
            logger.debug("episode done: %s, miss=%.2f m, speed=%.0f m/s", terminal["reason"], terminal["miss"], terminal["terminal_speed"])
        return StepResult(observation=observation, reward=reward, components=components, done=done, info=info)

    def _terminal_info(self, terminal, bonus):
        rel = terminal["r_M"] - terminal["r_T"]
        downrange, crossrange = miss_components(rel, self.vehicle.v_M)
        if self.record_trace:
            row = {
                "t": terminal["t"],
                "x": terminal["r_M"][0],
                "y": terminal["r_M"][1],
                "z": terminal["r_M"][2],
                "V": terminal["terminal_speed"],
                "r": terminal["miss"],
                "reward": bonus,
                "event": f"terminal: {terminal['reason']}, miss={terminal['miss']:.3f} m, speed={terminal['terminal_speed']:.1f} m/s",
                "x_T": terminal["r_T"][0],
                "y_T": terminal["r_T"][1],
                "z_T": terminal["r_T"][2],
            }
            last = self.trace[-1]
            for key in ("gamma", "psi", "alpha", "beta", "nu", "qdot", "q", "n", "v_c"):
                row[key] = last[key]
            self.trace.append(row)
        return {
            "reason": terminal["reason"],
            "miss": terminal["miss"],
            "terminal_speed": terminal["terminal_speed"],
            "time_of_flight": terminal["t"],
            "downrange": downrange,
            "crossrange": crossrange,
            "target_x": float(terminal["r_T"][0]),
            "target_y": float(terminal["r_T"][1]),
            "peaks": dict(self.peaks),
            "violation_time": self.violation_time,
            "n_diverts": len(self.divert_log),
            "failure": terminal.get("failure"),
            "total_reward": self.total_reward,
            "steps": self.steps,
        }

    # --- trace -------------------------------------------------------------

    def _record(self, vehicle, r_T, qdot, q, n, los, reward, event):
        if not self.record_trace:
            return
        gamma, psi = self._y[4], self._y[5]
        if los is None:
            rel = np.asarray(r_T) - vehicle.r_M
            r = float(np.linalg.norm(rel))
            v_c = float(-(rel @ (self._y[VEHICLE_VECTOR_SIZE + 3:VEHICLE_VECTOR_SIZE + 6] - vehicle.v_M)) / r) if r > 0.0 else 0.0
        else:
            r, v_c = los.r, los.v_c
        self.trace.append({
            "t": self.t,
            "x": vehicle.r_M[0],
            "y": vehicle.r_M[1],
            "z": vehicle.r_M[2],
            "V": vehicle.speed,
            "gamma": np.degrees(gamma),
            "psi": np.degrees(psi),
            "alpha": np.degrees(vehicle.alpha),
            "beta": np.degrees(vehicle.beta),
            "nu": np.degrees(vehicle.nu),
            "qdot": qdot,
            "q": q,
            "n": n,
            "r": r,
            "v_c": v_c,
            "reward": reward,
            "event": event,
            "x_T": r_T[0],
            "y_T": r_T[1],
            "z_T": r_T[2],
        })

    def trajectory(self, include_target=False):
        columns = TRACE_COLUMNS + TARGET_COLUMNS if include_target else TRACE_COLUMNS
        return pd.DataFrame(self.trace, columns=columns)
