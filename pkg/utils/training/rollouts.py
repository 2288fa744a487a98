import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from utils.environment.engagement_env import EngagementEnv
from utils.errors import SimulationError
from utils.policy.agent import RecurrentPolicyAgent

logger = logging.getLogger(__name__)


@dataclass
class EpisodeRollout:
    raw_obs: np.ndarray
    scaled_obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray       # shaping + control per step
    values: np.ndarray
    bonus: float = 0.0        # terminal bonus, on the last step
    info: dict = field(default_factory=dict)
    returns: Optional[np.ndarray] = None
    advantages: Optional[np.ndarray] = None

    @property
    def length(self):
        return len(self.rewards)

    @property
    def total_reward(self):
        return float(self.rewards.sum() + self.bonus)

    @property
    def failed(self):
        return self.info.get("failure") is not None


@dataclass
class RolloutBatch:
    episodes: list

    @property
    def usable(self):
        return [e for e in self.episodes if e.length > 0]

    @property
    def failures(self):
        return sum(1 for e in self.episodes if e.failed)

    # Time-major padded arrays over the usable episodes
    def padded(self):
        episodes = self.usable
        T = max(e.length for e in episodes)
        B = len(episodes)
        obs_dim = episodes[0].scaled_obs.shape[1]
        act_dim = episodes[0].actions.shape[1]
        out = {
            "obs": np.zeros((T, B, obs_dim)),
            "actions": np.zeros((T, B, act_dim)),
            "log_probs": np.zeros((T, B)),
            "returns": np.zeros((T, B)),
            "advantages": np.zeros((T, B)),
            "mask": np.zeros((T, B)),
        }
        for b, e in enumerate(episodes):
            n = e.length
            out["obs"][:n, b] = e.scaled_obs
            out["actions"][:n, b] = e.actions
            out["log_probs"][:n, b] = e.log_probs
            out["mask"][:n, b] = 1.0
            if e.returns is not None:
                out["returns"][:n, b] = e.returns
            if e.advantages is not None:
                out["advantages"][:n, b] = e.advantages
        return out


# Per-episode stream: (seed, update, episode) -> independent generators for the
# environment and for action sampling
def episode_seed(seed, update, episode):
    return np.random.SeedSequence([seed, update, episode])


def collect_episode(scenario, snapshot, seed, update, episode, stochastic=True):
    env_seq, action_seq = episode_seed(seed, update, episode).spawn(2)
    env = EngagementEnv(scenario, record_trace=False)
    agent = RecurrentPolicyAgent(snapshot, stochastic=stochastic, rng=np.random.default_rng(action_seq))
    raw, scaled, actions, log_probs, rewards, values = [], [], [], [], [], []
    bonus = 0.0
    info = {}
    try:
        obs, _ = env.reset(seed=env_seq)
        while True:
            u = agent.act(obs)
            values.append(agent.value(agent.last["scaled"]))
            result = env.step(u)
            raw.append(obs)
            scaled.append(agent.last["scaled"])
            actions.append(u)
            log_probs.append(agent.last["log_prob"])
            rewards.append(result.components.shaping + result.components.control)
            if result.done:
                bonus = result.components.bonus
                info = result.info
                break
            obs = result.observation
    except SimulationError as e:
        logger.warning("episode %d of update %d failed: %s", episode, update, e)
        info = {"failure": str(e)}

    obs_dim = snapshot.policy_spec.obs_dim
    act_dim = snapshot.policy_spec.out_dim
    return EpisodeRollout(
        raw_obs=np.array(raw).reshape(-1, obs_dim),
        scaled_obs=np.array(scaled).reshape(-1, obs_dim),
        actions=np.array(actions).reshape(-1, act_dim),
        log_probs=np.array(log_probs),
        rewards=np.array(rewards),
        values=np.array(values),
        bonus=float(bonus),
        info=info,
    )


# Must live at module level so ProcessPoolExecutor can pickle it
def _collect_worker(args):
    scenario, snapshot, seed, update, episode = args
    return collect_episode(scenario, snapshot, seed, update, episode)


# Episodes come back ordered by index whatever the worker count
def collect_rollouts(scenario, snapshot, n_episodes, seed, update, workers=1, progress=None):
    logger.debug("collect_rollouts() called for update %d with %d episodes", update, n_episodes)
    tasks = [(scenario, snapshot, seed, update, i) for i in range(n_episodes)]
    episodes = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            for rollout in executor.map(_collect_worker, tasks, chunksize=max(1, n_episodes // (4 * workers))):
                episodes.append(rollout)
                if progress is not None:
                    progress(len(episodes), n_episodes)
    else:
        for task in tasks:
            episodes.append(_collect_worker(task))
            if progress is not None:
                progress(len(episodes), n_episodes)
    return RolloutBatch(episodes=episodes)
