from dataclasses import dataclass

import numpy as np

from utils.policy.network import log_prob, policy_forward, sample, value_forward


@dataclass(frozen=True)
class PolicySnapshot:
    policy_params: dict
    policy_spec: object
    value_params: dict
    value_spec: object
    scaler: object


# Recurrent policy driven one observation at a time; the hidden state is the
# only thing that changes during an episode.
class RecurrentPolicyAgent:
    name = "policy"

    def __init__(self, snapshot, stochastic=False, rng=None):
        self.snapshot = snapshot
        self.stochastic = stochastic
        self.rng = rng if rng is not None else np.random.default_rng()
        self.reset()

    def reset(self):
        self.h = np.zeros(self.snapshot.policy_spec.hidden_size)
        self.h_value = np.zeros(self.snapshot.value_spec.hidden_size)
        self.last = None

    def act(self, obs):
        s = self.snapshot
        scaled = s.scaler.scale(obs)
        mean, std, self.h = policy_forward(s.policy_params, s.policy_spec, scaled, self.h)
        u = sample(mean, std, self.rng) if self.stochastic else mean
        self.last = {"scaled": scaled, "mean": mean, "std": std, "log_prob": float(log_prob(mean, std, u))}
        return u

    def value(self, scaled_obs):
        v, self.h_value = value_forward(self.snapshot.value_params, self.snapshot.value_spec, scaled_obs, self.h_value)
        return v
