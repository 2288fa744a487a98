"""Run configuration: scenario, training and evaluation settings.

Files are TOML with one table per section. Keys carry their unit in the name and
angles are degrees in the file; conversion to radians happens where the values
are consumed. Every field of the dataclasses below declares the section it lives
in, so the loader, the validator and the printed effective config all share one
source of truth.
"""

import logging
import os
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import toml

from utils.errors import ConfigError
from utils.evaluation.cases import parse_case

logger = logging.getLogger(__name__)

ENV_PREFIX = "HSW_"
TERMINATION_MODES = ("ClosingVelocity", "GroundImpact")
CONSTRAINT_MODES = ("TerminateOnViolation", "MonitorOnly")
ADVANTAGE_MODES = ("empirical", "gae")
OPTIMIZERS = ("adam", "sgd")


def _in(section, default):
    if isinstance(default, (list, tuple)):
        return field(default=tuple(default), metadata={"section": section})
    return field(default=default, metadata={"section": section})


@dataclass(frozen=True)
class ScenarioConfig:
    # initial conditions (uniform bounds)
    range_km: tuple = _in("scenario", (200.0, 200.0))
    azimuth_deg: tuple = _in("scenario", (-10.0, 10.0))
    heading_error_deg: tuple = _in("scenario", (-10.0, 10.0))
    altitude_km: tuple = _in("scenario", (24.8, 25.2))
    speed_m_s: tuple = _in("scenario", (2900.0, 3100.0))
    flight_path_angle_deg: tuple = _in("scenario", (-5.0, 0.0))
    alpha_init_deg: tuple = _in("scenario", (1.0, 3.0))
    bank_init_deg: tuple = _in("scenario", (-2.0, 2.0))
    sideslip_init_deg: tuple = _in("scenario", (-2.0, 2.0))
    max_time_s: float = _in("scenario", 120.0)
    termination_mode: str = _in("scenario", "ClosingVelocity")
    constraint_mode: str = _in("scenario", "TerminateOnViolation")
    case_label: str = _in("scenario", "Optim")

    # vehicle, actuators, sensors, model perturbation
    mass_kg: float = _in("vehicle", 1361.0)
    ref_area_m2: float = _in("vehicle", 3.347)
    nose_radius_m: float = _in("vehicle", 0.034)
    speed_of_sound_m_s: float = _in("vehicle", 340.0)
    guidance_period_s: float = _in("vehicle", 0.2)
    base_dt_s: float = _in("vehicle", 0.1)
    fine_dt_divisor: int = _in("vehicle", 300)
    fine_dt_range_m: float = _in("vehicle", 1200.0)
    alpha_limits_deg: tuple = _in("vehicle", (0.0, 12.0))
    sideslip_limits_deg: tuple = _in("vehicle", (-12.0, 12.0))
    bank_limits_deg: tuple = _in("vehicle", (-180.0, 180.0))
    # bank, alpha, sideslip
    rate_limits_deg_s: tuple = _in("vehicle", (10.0, 4.0, 4.0))
    actuator_tau_s: float = _in("vehicle", 0.1)
    actuator_noise_deg_s: float = _in("vehicle", 0.1)
    failure_probability: float = _in("vehicle", 0.5)
    failure_bias_range: tuple = _in("vehicle", (-0.3, 0.0))
    sensor_scale_error: float = _in("vehicle", 0.005)
    sensor_bias_per_step: bool = _in("vehicle", False)
    lift_variation: float = _in("vehicle", 0.10)
    drag_variation: float = _in("vehicle", 0.10)
    sideforce_variation: float = _in("vehicle", 0.10)
    density_variation: float = _in("vehicle", 0.10)
    mass_area_bias: float = _in("vehicle", 0.0)

    target_max_speed_m_s: float = _in("target", 30.0)
    target_max_accel_m_s2: float = _in("target", 0.5)

    divert_probability: float = _in("divert", 0.5)
    divert_fraction: float = _in("divert", 0.05)
    divert_range_km: tuple = _in("divert", (30.0, 150.0))
    evasion: bool = _in("divert", False)
    evasion_start_km: float = _in("divert", 150.0)
    evasion_end_km: float = _in("divert", 25.0)
    evasion_separation_km: float = _in("divert", 30.0)

    shaping_weight: float = _in("reward", 1.0)
    control_weight: float = _in("reward", -0.01)
    bonus: float = _in("reward", 20.0)
    bonus_miss_m: float = _in("reward", 50.0)
    bonus_speed_m_s: float = _in("reward", 1700.0)
    sigma_omega_rad_s: float = _in("reward", 0.05)

    heating_limit_w_m2: float = _in("constraints", 9.0e6)
    dynamic_pressure_limit_pa: float = _in("constraints", 4.0e6)
    load_limit_m_s2: float = _in("constraints", 147.15)

    @property
    def substeps_per_period(self):
        return int(round(self.guidance_period_s / self.base_dt_s))

    @property
    def max_steps(self):
        return int(-(-self.max_time_s // self.guidance_period_s))


@dataclass(frozen=True)
class TrainingConfig:
    seed: int = _in("training", 0)
    updates: int = _in("training", 1000)
    episodes_per_batch: int = _in("training", 60)
    gamma_shaping: float = _in("training", 0.90)
    gamma_terminal: float = _in("training", 0.995)
    advantage_mode: str = _in("training", "empirical")
    gae_lambda: float = _in("training", 0.95)
    normalize_advantages: bool = _in("training", True)
    entropy_coef: float = _in("training", 0.0)
    optimizer: str = _in("training", "adam")
    policy_lr: float = _in("training", 1e-4)
    value_lr: float = _in("training", 1e-3)
    clip_epsilon: float = _in("training", 0.2)
    kl_target: float = _in("training", 0.001)
    kl_early_stop: float = _in("training", 4.0)
    policy_passes: int = _in("training", 3)
    value_passes: int = _in("training", 10)
    servo_high: float = _in("training", 2.0)
    servo_low: float = _in("training", 0.5)
    lr_decrease: float = _in("training", 0.5)
    lr_increase: float = _in("training", 1.5)
    clip_decrease: float = _in("training", 0.9)
    clip_increase: float = _in("training", 1.1)
    clip_min: float = _in("training", 0.01)
    clip_max: float = _in("training", 0.3)
    init_log_std: float = _in("training", 0.0)
    scaler_floor: float = _in("training", 1e-8)
    scaler_warmup_episodes: int = _in("training", 10)
    checkpoint_every: int = _in("training", 10)
    workers: int = _in("training", 1)


@dataclass(frozen=True)
class EvaluationConfig:
    case: str = _in("evaluation", "Optim")
    episodes: int = _in("evaluation", 1000)
    seed: int = _in("evaluation", 0)
    stochastic: bool = _in("evaluation", False)
    ground_impact: bool = _in("evaluation", False)
    workers: int = _in("evaluation", 1)
    pn_gain: float = _in("evaluation", 4.0)


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)


_PARTS = ("scenario", "training", "evaluation")
_PART_CLASSES = {"scenario": ScenarioConfig, "training": TrainingConfig, "evaluation": EvaluationConfig}


# section name -> (part attribute, {key: dataclass field})
def _section_index():
    index = {}
    for part in _PARTS:
        for f in fields(_PART_CLASSES[part]):
            section = f.metadata["section"]
            index.setdefault(section, (part, {}))[1][f.name] = f
    return index


SECTIONS = tuple(_section_index())


# Best-effort line lookup for error messages
def _find_line(text, section, key=None):
    if text is None:
        return None
    in_section = key is None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("["):
            in_section = stripped.strip("[] ") == section
            if key is None and in_section:
                return number
            continue
        if key is not None and in_section and re.match(rf"{re.escape(key)}\s*=", stripped):
            return number
    return None


def _coerce(f, value, section, text, path):
    default = f.default
    line = _find_line(text, section, f.name)
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError("expected true/false")
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                if isinstance(value, float) and value.is_integer():
                    return int(value)
                raise TypeError("expected an integer")
            return value
        if isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError("expected a number")
            return float(value)
        if isinstance(default, tuple):
            if not isinstance(value, (list, tuple)) or len(value) != len(default):
                raise TypeError(f"expected a list of {len(default)} numbers")
            return tuple(float(v) for v in value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError("expected a string")
            return value
    except TypeError as e:
        raise ConfigError(f"[{section}] {f.name}: {e}, got {value!r}", line=line, path=path)
    return value


# Overlay a parsed TOML document onto the defaults
def config_from_dict(data, text=None, path=None, base=None):
    base = base or RunConfig()
    index = _section_index()
    updates = {part: {} for part in _PARTS}
    for section, values in data.items():
        if section not in index:
            raise ConfigError(
                f"unknown section [{section}] (valid: {', '.join(index)})",
                line=_find_line(text, section), path=path,
            )
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table", line=_find_line(text, section), path=path)
        part, known = index[section]
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"unknown key '{key}' in [{section}]", line=_find_line(text, section, key), path=path)
            updates[part][key] = _coerce(known[key], value, section, text, path)
    return RunConfig(**{part: replace(getattr(base, part), **updates[part]) for part in _PARTS})


# HSW_<SECTION>__<KEY>=value, parsed as a TOML scalar
def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    data = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].split("__", 1)
        try:
            value = toml.loads(f"v = {raw}")["v"]
        except toml.TomlDecodeError:
            value = raw
        data.setdefault(section.lower(), {})[key.lower()] = value
    return data


def validate_config(config, text=None, path=None):
    s, t, e = config.scenario, config.training, config.evaluation

    def fail(section, key, message):
        raise ConfigError(f"[{section}] {key}: {message}", line=_find_line(text, section, key), path=path)

    for name in ("failure_probability", "divert_probability"):
        value = getattr(s, name)
        if not 0.0 <= value <= 1.0:
            fail(fields_section(ScenarioConfig, name), name, f"probability must be in [0, 1], got {value}")
    for name in ("lift_variation", "drag_variation", "sideforce_variation", "density_variation",
                 "mass_area_bias", "divert_fraction", "sensor_scale_error", "actuator_noise_deg_s"):
        value = getattr(s, name)
        if value < 0.0:
            fail(fields_section(ScenarioConfig, name), name, f"must be >= 0, got {value}")
    for name in ("range_km", "azimuth_deg", "heading_error_deg", "altitude_km", "speed_m_s",
                 "flight_path_angle_deg", "alpha_init_deg", "bank_init_deg", "sideslip_init_deg",
                 "alpha_limits_deg", "sideslip_limits_deg", "bank_limits_deg", "failure_bias_range",
                 "divert_range_km"):
        low, high = getattr(s, name)
        if low > high:
            fail(fields_section(ScenarioConfig, name), name, f"lower bound {low} exceeds upper bound {high}")
    if s.altitude_km[1] >= s.range_km[0]:
        fail("scenario", "altitude_km", "altitude must stay below the initial range")
    if s.failure_bias_range[0] < -1.0 or s.failure_bias_range[1] > 0.0:
        fail("vehicle", "failure_bias_range", "bias range must lie within [-1, 0]")
    for name in ("mass_kg", "ref_area_m2", "nose_radius_m", "speed_of_sound_m_s", "base_dt_s",
                 "guidance_period_s", "actuator_tau_s", "max_time_s", "fine_dt_range_m", "sigma_omega_rad_s"):
        value = getattr(s, name)
        if value <= 0.0:
            fail(fields_section(ScenarioConfig, name), name, f"must be > 0, got {value}")
    if any(rate <= 0.0 for rate in s.rate_limits_deg_s):
        fail("vehicle", "rate_limits_deg_s", "rate limits must be > 0")
    if s.fine_dt_divisor < 1:
        fail("vehicle", "fine_dt_divisor", "must be >= 1")
    ratio = s.guidance_period_s / s.base_dt_s
    if ratio < 1.0 - 1e-9 or abs(ratio - round(ratio)) > 1e-9:
        fail("vehicle", "guidance_period_s", "must be a positive integer multiple of base_dt_s")
    if s.termination_mode not in TERMINATION_MODES:
        fail("scenario", "termination_mode", f"must be one of {TERMINATION_MODES}")
    if s.constraint_mode not in CONSTRAINT_MODES:
        fail("scenario", "constraint_mode", f"must be one of {CONSTRAINT_MODES}")
    if s.evasion_start_km < s.evasion_end_km:
        fail("divert", "evasion_start_km", "evasion must start farther out than it ends")

    for name in ("gamma_shaping", "gamma_terminal", "gae_lambda"):
        value = getattr(t, name)
        if not 0.0 <= value <= 1.0:
            fail("training", name, f"must be in [0, 1], got {value}")
    if not 0.0 < t.clip_epsilon < 1.0:
        fail("training", "clip_epsilon", "must be in (0, 1)")
    for name in ("policy_lr", "value_lr", "kl_target", "scaler_floor"):
        if getattr(t, name) <= 0.0:
            fail("training", name, "must be > 0")
    for name in ("updates", "episodes_per_batch", "checkpoint_every", "workers"):
        if getattr(t, name) < 1:
            fail("training", name, "must be >= 1")
    if t.advantage_mode not in ADVANTAGE_MODES:
        fail("training", "advantage_mode", f"must be one of {ADVANTAGE_MODES}")
    if t.optimizer not in OPTIMIZERS:
        fail("training", "optimizer", f"must be one of {OPTIMIZERS}")
    if t.seed < 0:
        fail("training", "seed", "must be >= 0")
    if e.seed < 0:
        fail("evaluation", "seed", "must be >= 0")
    try:
        parse_case(e.case)
    except ConfigError as err:
        fail("evaluation", "case", str(err))
    if e.episodes < 1:
        fail("evaluation", "episodes", "must be >= 1")
    if e.workers < 1:
        fail("evaluation", "workers", "must be >= 1")
    return config


def fields_section(cls, name):
    for f in fields(cls):
        if f.name == name:
            return f.metadata["section"]
    raise KeyError(name)


# Load a config file, apply HSW_* environment overrides, validate
def load_config(path=None, environ=None):
    logger.debug("load_config() called with path: %s", path)
    text = None
    data = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}", path=path)
        text = path.read_text()
        try:
            data = toml.loads(text)
        except toml.TomlDecodeError as e:
            raise ConfigError(f"TOML syntax error: {e.msg}", line=e.lineno, path=path)
    config = config_from_dict(data, text=text, path=path)
    overrides = env_overrides(environ)
    if overrides:
        logger.info("applying environment overrides: %s", overrides)
        config = config_from_dict(overrides, base=config, path="environment")
    return validate_config(config, text=text, path=path)


def config_to_dict(config):
    out = {}
    for part in _PARTS:
        obj = getattr(config, part)
        for f in fields(obj):
            value = getattr(obj, f.name)
            out.setdefault(f.metadata["section"], {})[f.name] = list(value) if isinstance(value, tuple) else value
    return out


# The effective config, every default made explicit
def dump_config(config):
    return toml.dumps(config_to_dict(config))
