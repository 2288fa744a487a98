import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from tqdm import tqdm

from utils.aero.thermal import CONSTRAINT_SHORT_LABELS, ConstraintType
from utils.config.settings import ScenarioConfig
from utils.environment.engagement_env import EngagementEnv, rate_limits
from utils.evaluation.cases import parse_case
from utils.evaluation.pn_baseline import PNAgent, PNGains
from utils.policy.agent import PolicySnapshot, RecurrentPolicyAgent
from utils.policy.checkpoint import load_checkpoint
from utils.policy.network import policy_spec, value_spec
from utils.training.scaler import ObservationScaler

logger = logging.getLogger(__name__)

SUCCESS_SPEED = 1700.0
SUCCESS_RADII = (5.0, 10.0)
PN_POLICY = "pn"

RECORD_COLUMNS = [
    "episode", "reason", "miss", "terminal_speed", "time_of_flight", "downrange", "crossrange",
    "target_x", "target_y", "peak_qdot", "peak_q", "peak_n", "violation", "violation_time",
    "n_diverts", "total_reward", "steps", "failure",
]

# per-episode peak column, display name, display scale, display unit
CONSTRAINT_DISPLAY = (
    ("peak_qdot", ConstraintType.HEATING, 1e-3, "kW/m^2"),
    ("peak_q", ConstraintType.DYNAMIC_PRESSURE, 1e-3, "kPa"),
    ("peak_n", ConstraintType.LOAD, 1.0, "m/s^2"),
)


@dataclass
class CaseSummary:
    label: str
    episodes: int
    miss_mean: float
    miss_std: float
    speed_mean: float
    speed_std: float
    success_5_pct: float
    success_10_pct: float
    violation_pct: float
    violation_types: dict
    constraint_stats: list
    tof_mean: float
    tof_std: float
    tof_min: float
    tof_max: float
    reasons: dict
    failures: int
    target_radial_mean: float
    target_radial_max: float

    @property
    def violation_type(self):
        if not self.violation_types:
            return "-"
        ordered = sorted(self.violation_types.items(), key=lambda item: (-item[1], item[0]))
        return "/".join(label for label, _ in ordered)

    def performance_row(self):
        return {
            "Case": self.label,
            "Miss Mean (m)": self.miss_mean,
            "Miss SD (m)": self.miss_std,
            "Speed Mean (m/s)": self.speed_mean,
            "Speed SD (m/s)": self.speed_std,
            "Miss < 5m (%)": self.success_5_pct,
            "Miss < 10m (%)": self.success_10_pct,
            "Violation (%)": self.violation_pct,
            "Type": self.violation_type,
        }

    def constraint_table(self):
        return pd.DataFrame(self.constraint_stats)

    def to_dict(self):
        out = asdict(self)
        out["type"] = self.violation_type
        return out


@dataclass
class CaseResult:
    summary: CaseSummary
    records: pd.DataFrame
    traces: dict = field(default_factory=dict)


def _success_pct(records, radius):
    hit = (records["miss"] < radius) & (records["terminal_speed"] >= SUCCESS_SPEED)
    return 100.0 * float(hit.sum()) / len(records)


# Summary statistics are a pure function of the raw records
def summarize(label, records):
    n = len(records)
    violated = records["violation"].fillna("").astype(str)
    violated = violated[violated != ""]
    types = {}
    for value, count in violated.value_counts().items():
        types[CONSTRAINT_SHORT_LABELS[ConstraintType(value)]] = int(count)

    stats = []
    for column, constraint, scale, unit in CONSTRAINT_DISPLAY:
        values = records[column].to_numpy(dtype=float) * scale
        stats.append({
            "Constraint": constraint.value,
            "Mean": float(values.mean()),
            "SD": float(values.std()),
            "Max": float(values.max()),
            "Limit": None,
            "Units": unit,
        })

    tof = records["time_of_flight"].to_numpy(dtype=float)
    radial = np.hypot(records["target_x"].to_numpy(dtype=float), records["target_y"].to_numpy(dtype=float))
    return CaseSummary(
        label=label,
        episodes=n,
        miss_mean=float(records["miss"].mean()),
        miss_std=float(records["miss"].std(ddof=0)),
        speed_mean=float(records["terminal_speed"].mean()),
        speed_std=float(records["terminal_speed"].std(ddof=0)),
        success_5_pct=_success_pct(records, SUCCESS_RADII[0]),
        success_10_pct=_success_pct(records, SUCCESS_RADII[1]),
        violation_pct=100.0 * len(violated) / n,
        violation_types=types,
        constraint_stats=stats,
        tof_mean=float(tof.mean()),
        tof_std=float(tof.std()),
        tof_min=float(tof.min()),
        tof_max=float(tof.max()),
        reasons={str(k): int(v) for k, v in records["reason"].value_counts().sort_index().items()},
        failures=int(records["failure"].notna().sum()),
        target_radial_mean=float(radial.mean()),
        target_radial_max=float(radial.max()),
    )


def with_limits(summary, scenario):
    limits = {
        ConstraintType.HEATING.value: scenario.heating_limit_w_m2 * 1e-3,
        ConstraintType.DYNAMIC_PRESSURE.value: scenario.dynamic_pressure_limit_pa * 1e-3,
        ConstraintType.LOAD.value: scenario.load_limit_m_s2,
    }
    for row in summary.constraint_stats:
        row["Limit"] = limits[row["Constraint"]]
    return summary


def snapshot_from_checkpoint(path):
    checkpoint = load_checkpoint(path, expected_policy_spec=policy_spec(), expected_value_spec=value_spec())
    if "scaler" in checkpoint.extra:
        scaler = ObservationScaler.from_array(checkpoint.extra["scaler"])
    else:
        scaler = ObservationScaler(checkpoint.policy_spec.obs_dim)
    return PolicySnapshot(
        policy_params=checkpoint.policy_params,
        policy_spec=checkpoint.policy_spec,
        value_params=checkpoint.value_params,
        value_spec=checkpoint.value_spec,
        scaler=scaler,
    )


def make_agent(policy, scenario, stochastic=False, rng=None, pn_gain=4.0):
    if isinstance(policy, str) and policy == PN_POLICY:
        return PNAgent(PNGains(navigation_gain=pn_gain), rate_limits(scenario))
    return RecurrentPolicyAgent(policy, stochastic=stochastic, rng=rng)


def record_from_info(episode, info):
    peaks = info.get("peaks", {})
    return {
        "episode": episode,
        "reason": info.get("reason"),
        "miss": info.get("miss"),
        "terminal_speed": info.get("terminal_speed"),
        "time_of_flight": info.get("time_of_flight"),
        "downrange": info.get("downrange"),
        "crossrange": info.get("crossrange"),
        "target_x": info.get("target_x"),
        "target_y": info.get("target_y"),
        "peak_qdot": peaks.get("qdot"),
        "peak_q": peaks.get("q"),
        "peak_n": peaks.get("n"),
        "violation": info.get("violation"),
        "violation_time": info.get("violation_time"),
        "n_diverts": info.get("n_diverts"),
        "total_reward": info.get("total_reward"),
        "steps": info.get("steps"),
        "failure": info.get("failure"),
    }


# One full episode; returns the terminal info and the trace
def run_episode(scenario, agent, seed, record_trace=True):
    env = EngagementEnv(scenario, record_trace=record_trace)
    obs, _ = env.reset(seed=seed)
    agent.reset()
    while True:
        result = env.step(agent.act(obs))
        if result.done:
            return result.info, env.trajectory(include_target=True) if record_trace else None
        obs = result.observation


def _keep_trace(selection, episode, n_diverts):
    if selection == "all":
        return True
    if selection == "first":
        return episode == 0
    if selection == "first_divert":
        return n_diverts > 0
    if isinstance(selection, (list, tuple, set)):
        return episode in selection
    return False


def _episode_worker(args):
    scenario, policy, seed, episode, stochastic, pn_gain, selection = args
    env_seq, action_seq = np.random.SeedSequence([seed, episode]).spawn(2)
    agent = make_agent(policy, scenario, stochastic, np.random.default_rng(action_seq), pn_gain)
    info, trace = run_episode(scenario, agent, env_seq, record_trace=selection == "first_divert" or _keep_trace(selection, episode, 0))
    keep = trace is not None and _keep_trace(selection, episode, info.get("n_diverts", 0))
    return record_from_info(episode, info), trace if keep else None


def run_case(case, policy, n_episodes, seed, scenario=None, stochastic=False, ground_impact=False,
             workers=1, pn_gain=4.0, trace_selection="first", show_progress=False, progress=None):
    if isinstance(case, str):
        case = parse_case(case)
    scenario = case.apply(scenario or ScenarioConfig(), ground_impact=ground_impact)
    logger.debug("run_case() called: %s, %d episodes, seed %d", case.label, n_episodes, seed)
    tasks = [(scenario, policy, seed, i, stochastic, pn_gain, trace_selection) for i in range(n_episodes)]

    results = []
    bar = tqdm(total=n_episodes, desc=case.label, unit="ep", disable=not show_progress)
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                for item in executor.map(_episode_worker, tasks, chunksize=max(1, n_episodes // (4 * workers))):
                    results.append(item)
                    bar.update(1)
                    if progress is not None:
                        progress(len(results), n_episodes)
        else:
            for task in tasks:
                results.append(_episode_worker(task))
                bar.update(1)
                if progress is not None:
                    progress(len(results), n_episodes)
    finally:
        bar.close()

    records = pd.DataFrame([record for record, _ in results], columns=RECORD_COLUMNS)
    traces = {}
    for record, trace in results:
        if trace is not None:
            if trace_selection == "first_divert" and traces:
                break
            traces[record["episode"]] = trace
    summary = with_limits(summarize(case.label, records), scenario)
    logger.info(
        "%s: miss %.2f +/- %.2f m, speed %.0f m/s, <5 m %.1f%%, violations %.1f%% (%s)",
        case.label, summary.miss_mean, summary.miss_std, summary.speed_mean, summary.success_5_pct,
        summary.violation_pct, summary.violation_type,
    )
    return CaseResult(summary=summary, records=records, traces=traces)
