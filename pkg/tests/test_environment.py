import logging
import math
from dataclasses import replace

import numpy as np
import pytest

from utils.config.settings import ScenarioConfig
from utils.dynamics.equations_of_motion import TargetState, VehicleState
from utils.environment.engagement_env import (
    TRACE_COLUMNS,
    EngagementEnv,
    closest_approach,
    compute_reward,
    make_observation,
    miss_components,
    process_action,
    shaping_reward,
)
from utils.environment.scenario import OBSERVATION_SIZE, EpisodeDraw
from utils.errors import EpisodeFailure, GeometryError
from utils.evaluation.pn_baseline import PNAgent
from utils.environment.engagement_env import rate_limits
from tests.conftest import quiet_scenario


def _draw(failed=(False, False, False), bias=(0.0, 0.0, 0.0)):
    vehicle = VehicleState(r_M=np.array([40000.0, 0.0, 10000.0]), v_M=np.array([-3000.0, 0.0, 0.0]), alpha=0.0, beta=0.0, nu=0.0)
    target = TargetState(r_T=np.zeros(3), v_T=np.zeros(3), a_T=np.zeros(3))
    return EpisodeDraw(vehicle=vehicle, target=target, failed=np.array(failed), failure_bias=np.array(bias))


def _run(env, agent, seed):
    obs, _ = env.reset(seed=seed)
    agent.reset()
    while True:
        result = env.step(agent.act(obs))
        if result.done:
            return result
        obs = result.observation


# --- reward -----------------------------------------------------------------

def test_shaping_reward():
    config = ScenarioConfig()
    reward, components = compute_reward(np.zeros(3), np.zeros(3), config)
    assert reward == 1.0
    assert components.bonus == 0.0
    assert shaping_reward([0.0, 0.03, 0.04], 0.05) == pytest.approx(math.exp(-1.0), abs=1e-12)


def test_control_penalty_uses_normalized_rates():
    config = ScenarioConfig()
    _, components = compute_reward(np.zeros(3), np.array([1.0, 0.0, 0.0]), config)
    assert components.control == pytest.approx(-0.01)


@pytest.mark.parametrize("altitude, miss, speed, reason, bonus", [
    (-1.0, 30.0, 1800.0, "closing_velocity", 20.0),
    (-1.0, 60.0, 1800.0, "closing_velocity", 0.0),
    (-1.0, 50.0, 1800.0, "closing_velocity", 0.0),
    (-1.0, 49.999, 1800.0, "closing_velocity", 20.0),
    (-1.0, 30.0, 1700.0, "closing_velocity", 0.0),
    (-1.0, 30.0, 1700.001, "closing_velocity", 20.0),
    (0.0, 30.0, 1800.0, "closing_velocity", 0.0),
    (5.0, 30.0, 1800.0, "closing_velocity", 0.0),
    (-1.0, 30.0, 1800.0, "ground_impact", 20.0),
    (-1.0, 30.0, 1800.0, "timeout", 0.0),
    (-1.0, 30.0, 1800.0, "failure", 0.0),
])
def test_terminal_bonus(altitude, miss, speed, reason, bonus):
    _, components = compute_reward(np.zeros(3), np.zeros(3), ScenarioConfig(), done=True, altitude=altitude, miss=miss, speed=speed, reason=reason)
    assert components.bonus == bonus


def test_no_bonus_before_done():
    _, components = compute_reward(np.zeros(3), np.zeros(3), ScenarioConfig(), done=False, altitude=-1.0, miss=1.0, speed=3000.0)
    assert components.bonus == 0.0


# --- actions and observations -------------------------------------------------

def test_process_action_zero_command():
    action = process_action([0.0, 0.0, 0.0], _draw(), np.random.default_rng(0), quiet_scenario())
    np.testing.assert_array_equal(action.rates, [0.0, 0.0, 0.0])


def test_process_action_clips_to_rate_limit():
    action = process_action([2.0, 0.0, -3.0], _draw(), np.random.default_rng(0), quiet_scenario())
    np.testing.assert_allclose(np.degrees(action.rates), [10.0, 0.0, -4.0])
    np.testing.assert_allclose(action.normalized, [1.0, 0.0, -1.0])


def test_process_action_failed_channel():
    draw = _draw(failed=(False, True, False), bias=(0.0, -0.3, 0.0))
    action = process_action([0.0, 1.0, 0.0], draw, np.random.default_rng(0), quiet_scenario())
    assert np.degrees(action.rates[1]) == pytest.approx(2.8)
    # normalized command is what the policy asked for, before the failure
    assert action.normalized[1] == 1.0


def test_process_action_noise():
    config = quiet_scenario(actuator_noise_deg_s=0.1)
    rates = np.array([process_action([0.0, 0.0, 0.0], _draw(), np.random.default_rng(i), config).rates for i in range(2000)])
    assert np.degrees(rates).std() == pytest.approx(0.1, rel=0.1)


def test_observation_without_sensor_error():
    env = EngagementEnv(quiet_scenario())
    obs, draw = env.reset(seed=0)
    assert obs.shape == (OBSERVATION_SIZE,)
    clean = make_observation(env._los, draw.vehicle, np.ones(OBSERVATION_SIZE))
    np.testing.assert_array_equal(obs, clean)
    assert obs[7] == pytest.approx(np.linalg.norm(draw.vehicle.r_M))


# --- geometry -----------------------------------------------------------------

def test_closest_approach_abeam():
    miss, s = closest_approach([-100.0, 3.0, 0.0], [100.0, 3.0, 0.0])
    assert miss == pytest.approx(3.0, abs=1e-3)
    assert s == pytest.approx(0.5)


def test_closest_approach_head_on():
    miss, _ = closest_approach([-100.0, 0.0, 0.0], [50.0, 0.0, 0.0])
    assert miss == pytest.approx(0.0, abs=1e-6)


def test_closest_approach_clamps_to_segment():
    miss, s = closest_approach([-100.0, 0.0, 0.0], [-50.0, 0.0, 0.0])
    assert s == 1.0
    assert miss == 50.0


def test_miss_components():
    assert miss_components(np.array([3.0, 4.0, 0.0]), np.array([1000.0, 0.0, -50.0])) == pytest.approx((3.0, 4.0))
    assert miss_components(np.array([3.0, 4.0, 0.0]), np.array([0.0, 1000.0, 0.0])) == pytest.approx((4.0, -3.0))


# --- episodes -----------------------------------------------------------------

def test_reset_is_deterministic():
    env = EngagementEnv(ScenarioConfig())
    obs_a, draw_a = env.reset(seed=42)
    obs_b, draw_b = env.reset(seed=42)
    np.testing.assert_array_equal(obs_a, obs_b)
    assert draw_a.divert_ranges == draw_b.divert_ranges


def test_episodes_are_deterministic():
    config = ScenarioConfig(range_km=(40.0, 40.0), altitude_km=(10.0, 10.0), max_time_s=40.0)
    a = _run(EngagementEnv(config), PNAgent(rate_limits=rate_limits(config)), 3)
    b = _run(EngagementEnv(config), PNAgent(rate_limits=rate_limits(config)), 3)
    assert a.info["miss"] == b.info["miss"]
    assert a.info["total_reward"] == b.info["total_reward"]
    assert a.info["steps"] == b.info["steps"]


def test_pn_episode_terminal_info(scenario):
    env = EngagementEnv(scenario)
    result = _run(env, PNAgent(rate_limits=rate_limits(scenario)), 0)
    info = result.info
    assert info["reason"] in ("closing_velocity", "timeout", "failure", "constraint")
    for key in ("miss", "terminal_speed", "time_of_flight", "downrange", "crossrange", "peaks", "n_diverts", "total_reward", "steps"):
        assert key in info
    assert info["time_of_flight"] <= scenario.max_time_s + 1e-9
    assert math.hypot(info["downrange"], info["crossrange"]) <= info["miss"] + 1e-6

    trace = env.trajectory()
    assert list(trace.columns) == TRACE_COLUMNS
    assert trace.iloc[0]["event"] == "reset"
    last = trace.iloc[-1]
    assert last["event"].startswith("terminal")
    assert last["r"] == pytest.approx(info["miss"])
    assert last["V"] == pytest.approx(info["terminal_speed"])
    assert (trace["event"] == "").sum() == info["steps"]


def test_step_after_done_raises(scenario):
    env = EngagementEnv(scenario)
    _run(env, PNAgent(rate_limits=rate_limits(scenario)), 1)
    with pytest.raises(EpisodeFailure):
        env.step(np.zeros(3))


def test_timeout(scenario):
    env = EngagementEnv(replace(scenario, max_time_s=0.4))
    env.reset(seed=0)
    first = env.step(np.zeros(3))
    second = env.step(np.zeros(3))
    assert not first.done
    assert second.done
    assert second.info["reason"] == "timeout"
    assert second.info["time_of_flight"] == pytest.approx(0.4)


def test_constraint_violation_terminates(scenario):
    env = EngagementEnv(replace(scenario, heating_limit_w_m2=1.0))
    env.reset(seed=0)
    result = env.step(np.zeros(3))
    assert result.done
    assert result.info["reason"] == "constraint"
    assert result.info["violation"] == "Heating"


def test_monitor_only_keeps_flying(scenario):
    env = EngagementEnv(replace(scenario, heating_limit_w_m2=1.0, constraint_mode="MonitorOnly"))
    env.reset(seed=0)
    result = env.step(np.zeros(3))
    assert not result.done
    assert result.info["violation"] == "Heating"


def test_divert_event_is_logged(scenario):
    config = replace(scenario, divert_probability=1.0, divert_range_km=(39.0, 39.5), divert_fraction=0.05)
    env = EngagementEnv(config)
    _, draw = env.reset(seed=0)
    assert len(draw.diverts) == 1
    events = []
    for _ in range(20):
        result = env.step(np.zeros(3))
        events += result.info["divert_events"]
        if events or result.done:
            break
    assert len(events) == 1
    event = events[0]
    assert event["range"] < event["trigger_range"]
    assert abs(event["dx"]) <= 0.05 * event["trigger_range"]
    assert abs(event["dy"]) <= 0.05 * event["trigger_range"]
    trace = env.trajectory()
    assert trace["event"].str.startswith("divert").sum() == 1


def test_target_moves_continuously_without_diverts(scenario):
    env = EngagementEnv(scenario)
    env.reset(seed=4)
    previous = env.target.r_T.copy()
    max_step = (scenario.target_max_speed_m_s + scenario.target_max_accel_m_s2 * scenario.guidance_period_s) * scenario.guidance_period_s
    for _ in range(10):
        env.step(np.zeros(3))
        assert np.linalg.norm(env.target.r_T - previous) <= max_step + 1e-9
        previous = env.target.r_T.copy()


def test_target_speed_is_clipped_while_accelerating(scenario):
    config = replace(scenario, target_max_accel_m_s2=50.0, max_time_s=4.0, constraint_mode="MonitorOnly")
    env = EngagementEnv(config)
    env.reset(seed=2)
    limit = config.target_max_speed_m_s
    fastest = 0.0
    done = False
    while not done:
        done = env.step(np.zeros(3)).done
        target_speed = np.linalg.norm(env.target.v_T)
        aim_speed = np.linalg.norm(env.aim.v_T)
        assert target_speed <= limit + 1e-9
        assert aim_speed <= limit + 1e-9
        fastest = max(fastest, target_speed)
    assert fastest >= limit - 1e-6


@pytest.mark.parametrize("max_time_s, expected_steps", [(0.4, 2), (0.5, 3), (1.0, 5)])
def test_timeout_step_count(scenario, max_time_s, expected_steps):
    config = replace(
        scenario, max_time_s=max_time_s, target_max_speed_m_s=0.0, target_max_accel_m_s2=0.0, constraint_mode="MonitorOnly",
    )
    assert config.max_steps == expected_steps == math.ceil(max_time_s / config.guidance_period_s)
    env = EngagementEnv(config)
    env.reset(seed=0)
    results = [env.step(np.zeros(3)) for _ in range(expected_steps)]
    assert not any(result.done for result in results[:-1])
    assert results[-1].done
    assert results[-1].info["reason"] == "timeout"
    assert results[-1].info["step"] == expected_steps
    assert env.t >= max_time_s - 1e-9


def test_coincident_positions_hold_the_last_line_of_sight(scenario, monkeypatch, caplog):
    env = EngagementEnv(replace(scenario, constraint_mode="MonitorOnly"))
    obs, _ = env.reset(seed=0)

    def coincident(*args):
        raise GeometryError("vehicle and target positions coincide")

    monkeypatch.setattr("utils.environment.engagement_env.los_kinematics", coincident)
    caplog.set_level(logging.DEBUG, logger="utils.environment.engagement_env")
    result = env.step(np.zeros(3))
    np.testing.assert_array_equal(result.observation[0:8], obs[0:8])
    assert "holding the last line of sight" in caplog.text


@pytest.mark.slow
def test_pn_hits_stationary_target(scenario):
    config = replace(scenario, target_max_speed_m_s=0.0, target_max_accel_m_s2=0.0, heading_error_deg=(0.0, 0.0), azimuth_deg=(0.0, 0.0), constraint_mode="MonitorOnly")
    result = _run(EngagementEnv(config), PNAgent(rate_limits=rate_limits(config)), 0)
    assert result.info["miss"] < 500.0
