"""Clipped-surrogate policy optimization for the recurrent networks.

Returns use two discount rates: the per-step shaping and control rewards are
discounted at ``gamma_shaping`` and the terminal bonus is discounted from the
terminal step at ``gamma_terminal``. The value network regresses the combined
return. Every pass recomputes hidden states from the episode starts.
"""

import logging
from dataclasses import dataclass

import numpy as np

from utils.policy.network import backward_sequence, forward_sequence, log_prob, log_prob_grads

logger = logging.getLogger(__name__)


@dataclass
class TrainerState:
    policy_params: dict
    value_params: dict
    policy_spec: object
    value_spec: object
    scaler: object
    policy_optimizer: object
    value_optimizer: object
    policy_lr: float
    value_lr: float
    clip_epsilon: float
    initial_policy_lr: float
    update: int = 0


@dataclass
class UpdateDiagnostics:
    kl: float
    clip_fraction: float
    objective: float
    value_loss: float
    policy_passes: int
    early_stopped: bool
    skipped: bool


# G_k = sum_{l>=k} gamma_s^(l-k) r_l + gamma_t^(T-1-k) bonus
def discounted_returns(rewards, bonus, gamma_shaping, gamma_terminal):
    rewards = np.asarray(rewards, dtype=np.float64)
    T = len(rewards)
    returns = np.empty(T)
    running = 0.0
    for k in reversed(range(T)):
        running = rewards[k] + gamma_shaping * running
        returns[k] = running
    returns += bonus * gamma_terminal ** np.arange(T - 1, -1, -1, dtype=np.float64)
    return returns


# Generalized advantage estimate on the combined reward (bonus on the last step)
def gae_advantages(rewards, bonus, values, gamma, lam):
    rewards = np.asarray(rewards, dtype=np.float64).copy()
    rewards[-1] += bonus
    values = np.asarray(values, dtype=np.float64)
    next_values = np.append(values[1:], 0.0)
    deltas = rewards + gamma * next_values - values
    advantages = np.empty_like(deltas)
    running = 0.0
    for k in reversed(range(len(deltas))):
        running = deltas[k] + gamma * lam * running
        advantages[k] = running
    return advantages


def normalize(advantages):
    centered = advantages - advantages.mean()
    std = centered.std()
    return centered / std if std > 1e-12 else centered


def compute_returns_advantages(batch, config):
    episodes = batch.usable
    for e in episodes:
        e.returns = discounted_returns(e.rewards, e.bonus, config.gamma_shaping, config.gamma_terminal)
        if config.advantage_mode == "gae":
            e.advantages = gae_advantages(e.rewards, e.bonus, e.values, config.gamma_shaping, config.gae_lambda)
        else:
            e.advantages = e.returns - e.values
    if config.normalize_advantages and episodes:
        flat = normalize(np.concatenate([e.advantages for e in episodes]))
        offset = 0
        for e in episodes:
            e.advantages = flat[offset:offset + e.length]
            offset += e.length
    return batch


def clipped_surrogate(ratio, advantages, epsilon):
    return np.minimum(ratio * advantages, np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantages)


# d surrogate / d log pi_new; zero where the clipped branch is binding
def surrogate_grad(ratio, advantages, epsilon):
    binding = ((advantages > 0.0) & (ratio > 1.0 + epsilon)) | ((advantages < 0.0) & (ratio < 1.0 - epsilon))
    return np.where(binding, 0.0, ratio * advantages)


def kl_estimate(log_probs_old, log_probs_new, mask):
    n = mask.sum()
    return float(((log_probs_old - log_probs_new) * mask).sum() / n)


# Mean clipped surrogate over valid steps and its gradient w.r.t. the policy parameters
def policy_objective(params, spec, data, epsilon, entropy_coef=0.0):
    mask = data["mask"]
    n = mask.sum()
    mean, _, cache = forward_sequence(params, spec, data["obs"])
    std = np.exp(params["log_std"])
    new_log_probs = log_prob(mean, std, data["actions"])
    ratio = np.exp(new_log_probs - data["log_probs"]) * mask
    adv = data["advantages"]
    objective = float((clipped_surrogate(ratio, adv, epsilon) * mask).sum() / n)
    objective += entropy_coef * float(np.sum(params["log_std"]))

    weight = surrogate_grad(ratio, adv, epsilon) * mask / n
    d_mean, d_log_std = log_prob_grads(mean, params["log_std"], data["actions"])
    grads = backward_sequence(params, cache, d_mean * weight[:, :, None])
    grads["log_std"] = (d_log_std * weight[:, :, None]).sum(axis=(0, 1)) + entropy_coef

    clipped = (np.abs(ratio - 1.0) > epsilon) & (mask > 0)
    stats = {
        "kl": kl_estimate(data["log_probs"], new_log_probs, mask),
        "clip_fraction": float(clipped.sum() / n),
        "log_probs": new_log_probs,
    }
    return objective, grads, stats


# Half mean squared error against the empirical returns
def value_loss(params, spec, data):
    mask = data["mask"]
    n = mask.sum()
    values, _, cache = forward_sequence(params, spec, data["obs"])
    error = (values[:, :, 0] - data["returns"]) * mask
    loss = float(0.5 * (error**2).sum() / n)
    grads = backward_sequence(params, cache, (error / n)[:, :, None])
    return loss, grads


def _finite(grads):
    return all(np.all(np.isfinite(g)) for g in grads.values())


def ppo_update(state, batch, config):
    logger.debug("ppo_update() called for update %d", state.update)
    data = batch.padded()
    state.policy_optimizer.lr = state.policy_lr
    state.value_optimizer.lr = state.value_lr
    early_stopped = False
    skipped = False
    passes = 0
    objective = float("nan")

    for _ in range(config.policy_passes):
        objective, grads, stats = policy_objective(state.policy_params, state.policy_spec, data, state.clip_epsilon, config.entropy_coef)
        if stats["kl"] > config.kl_early_stop * config.kl_target:
            early_stopped = True
            break
        if not _finite(grads):
            logger.warning("non-finite policy gradient in update %d; skipping the policy step", state.update)
            skipped = True
            break
        state.policy_params = state.policy_optimizer.step(state.policy_params, grads, ascent=True)
        passes += 1

    _, _, stats = policy_objective(state.policy_params, state.policy_spec, data, state.clip_epsilon, config.entropy_coef)

    loss = float("nan")
    for _ in range(config.value_passes):
        loss, grads = value_loss(state.value_params, state.value_spec, data)
        if not _finite(grads):
            logger.warning("non-finite value gradient in update %d; skipping the value step", state.update)
            skipped = True
            break
        state.value_params = state.value_optimizer.step(state.value_params, grads)

    return UpdateDiagnostics(
        kl=stats["kl"],
        clip_fraction=stats["clip_fraction"],
        objective=objective,
        value_loss=loss,
        policy_passes=passes,
        early_stopped=early_stopped,
        skipped=skipped,
    )


# Steer the policy learning rate and clip range toward the KL target
def kl_servo(state, kl, config):
    if kl > config.servo_high * config.kl_target:
        state.policy_lr *= config.lr_decrease
        state.clip_epsilon = max(config.clip_min, state.clip_epsilon * config.clip_decrease)
    elif kl < config.servo_low * config.kl_target:
        state.policy_lr = min(state.initial_policy_lr, state.policy_lr * config.lr_increase)
        state.clip_epsilon = min(config.clip_max, state.clip_epsilon * config.clip_increase)
    return state.clip_epsilon, state.policy_lr
