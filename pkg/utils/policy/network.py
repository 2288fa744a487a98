"""Recurrent policy and value networks with exact backpropagation through time.

Both networks share one shape: dense-tanh, a gated recurrent layer, dense-tanh,
linear output. The policy adds a state-independent log standard deviation.

GRU convention (pinned by the tests):

    z  = sigmoid(x Wz + h Uz + bz)
    r  = sigmoid(x Wr + h Ur + br)
    h~ = tanh(x Wh + (r * h) Uh + bh)
    h' = z * h + (1 - z) * h~

Weights are stored input-major, shape (fan_in, fan_out), so a batch of row
vectors multiplies from the left. Sequences are time-major, (T, B, features).
Everything is float64.
"""

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

OBS_DIM = 11
ACT_DIM = 3
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class NetworkSpec:
    obs_dim: int
    widths: tuple   # (hidden1, recurrent, hidden3, output)
    log_std: bool = False

    @property
    def out_dim(self):
        return self.widths[3]

    @property
    def hidden_size(self):
        return self.widths[1]

    # Ordered (name, shape) pairs; this order is also the checkpoint layout
    def param_shapes(self):
        n1, n2, n3, n_out = self.widths
        shapes = [("W1", (self.obs_dim, n1)), ("b1", (n1,))]
        for gate in ("z", "r", "h"):
            shapes += [(f"W{gate}", (n1, n2)), (f"U{gate}", (n2, n2)), (f"b{gate}", (n2,))]
        shapes += [("W3", (n2, n3)), ("b3", (n3,)), ("W4", (n3, n_out)), ("b4", (n_out,))]
        if self.log_std:
            shapes.append(("log_std", (n_out,)))
        return shapes

    @property
    def n_params(self):
        n1, n2, n3, n_out = self.widths
        count = n1 * (self.obs_dim + 1) + 3 * (n1 * n2 + n2 * n2 + n2) + n3 * (n2 + 1) + n_out * (n3 + 1)
        return count + (n_out if self.log_std else 0)


# Geometric-mean width between the two dense layers
def _middle_width(n1, n3):
    return int(round(np.sqrt(n1 * n3)))


def policy_spec(obs_dim=OBS_DIM, act_dim=ACT_DIM):
    n1, n3 = 10 * obs_dim, 10 * act_dim
    return NetworkSpec(obs_dim=obs_dim, widths=(n1, _middle_width(n1, n3), n3, act_dim), log_std=True)


def value_spec(obs_dim=OBS_DIM):
    n1, n3 = 10 * obs_dim, 5
    return NetworkSpec(obs_dim=obs_dim, widths=(n1, _middle_width(n1, n3), n3, 1), log_std=False)


# Weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero
def init_params(spec, seed=None, init_log_std=0.0):
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in spec.param_shapes():
        if name == "log_std":
            params[name] = np.full(shape, float(init_log_std))
        elif name.startswith("b"):
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, shape)
    return params


def zeros_like_params(params):
    return {name: np.zeros_like(value) for name, value in params.items()}


def flatten_params(params, spec):
    return np.concatenate([params[name].ravel() for name, _ in spec.param_shapes()])


def unflatten_params(flat, spec):
    params = {}
    offset = 0
    for name, shape in spec.param_shapes():
        size = int(np.prod(shape))
        params[name] = np.array(flat[offset:offset + size], dtype=np.float64).reshape(shape)
        offset += size
    if offset != len(flat):
        raise ValueError(f"expected {offset} parameters, got {len(flat)}")
    return params


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def gru_step(params, x, h):
    z = sigmoid(x @ params["Wz"] + h @ params["Uz"] + params["bz"])
    r = sigmoid(x @ params["Wr"] + h @ params["Ur"] + params["br"])
    h_cand = np.tanh(x @ params["Wh"] + (r * h) @ params["Uh"] + params["bh"])
    return z * h + (1.0 - z) * h_cand, (z, r, h_cand)


def _check_input(spec, obs):
    if obs.shape[-1] != spec.obs_dim:
        raise ValueError(f"observation has {obs.shape[-1]} components, network expects {spec.obs_dim}")


# Forward over a (T, B, obs_dim) batch. resets[t, b] zeroes the hidden state
# before step t, so episodes may be concatenated along time.
def forward_sequence(params, spec, obs, h0=None, resets=None):
    obs = np.asarray(obs, dtype=np.float64)
    _check_input(spec, obs)
    T, B, _ = obs.shape
    h = np.zeros((B, spec.hidden_size)) if h0 is None else np.array(h0, dtype=np.float64)
    keep = np.ones((T, B, 1)) if resets is None else 1.0 - np.asarray(resets, dtype=np.float64)[:, :, None]

    cache = {"obs": obs, "keep": keep, "a1": [], "h_prev": [], "z": [], "r": [], "h_cand": [], "h": [], "a3": []}
    out = np.empty((T, B, spec.out_dim))
    for t in range(T):
        a1 = np.tanh(obs[t] @ params["W1"] + params["b1"])
        h_prev = h * keep[t]
        h, (z, r, h_cand) = gru_step(params, a1, h_prev)
        a3 = np.tanh(h @ params["W3"] + params["b3"])
        out[t] = a3 @ params["W4"] + params["b4"]
        for key, value in (("a1", a1), ("h_prev", h_prev), ("z", z), ("r", r), ("h_cand", h_cand), ("h", h), ("a3", a3)):
            cache[key].append(value)
    return out, h, cache


# Reverse-mode gradients of sum(dout * out) through the whole sequence
def backward_sequence(params, cache, dout):
    grads = {name: np.zeros_like(value) for name, value in params.items() if name != "log_std"}
    obs, keep = cache["obs"], cache["keep"]
    T = obs.shape[0]
    dh_next = np.zeros_like(cache["h"][0])

    for t in reversed(range(T)):
        a1, h_prev, z, r = cache["a1"][t], cache["h_prev"][t], cache["z"][t], cache["r"][t]
        h_cand, h, a3 = cache["h_cand"][t], cache["h"][t], cache["a3"][t]
        d_out = dout[t]

        grads["W4"] += a3.T @ d_out
        grads["b4"] += d_out.sum(axis=0)
        d_pre3 = (d_out @ params["W4"].T) * (1.0 - a3**2)
        grads["W3"] += h.T @ d_pre3
        grads["b3"] += d_pre3.sum(axis=0)

        dh = d_pre3 @ params["W3"].T + dh_next
        dz = dh * (h_prev - h_cand)
        d_pre_h = dh * (1.0 - z) * (1.0 - h_cand**2)
        dh_prev = dh * z

        grads["Wh"] += a1.T @ d_pre_h
        grads["Uh"] += (r * h_prev).T @ d_pre_h
        grads["bh"] += d_pre_h.sum(axis=0)
        d_rh = d_pre_h @ params["Uh"].T
        dh_prev += d_rh * r

        d_pre_z = dz * z * (1.0 - z)
        d_pre_r = d_rh * h_prev * r * (1.0 - r)
        grads["Wz"] += a1.T @ d_pre_z
        grads["Uz"] += h_prev.T @ d_pre_z
        grads["bz"] += d_pre_z.sum(axis=0)
        grads["Wr"] += a1.T @ d_pre_r
        grads["Ur"] += h_prev.T @ d_pre_r
        grads["br"] += d_pre_r.sum(axis=0)
        dh_prev += d_pre_z @ params["Uz"].T + d_pre_r @ params["Ur"].T

        d_a1 = d_pre_z @ params["Wz"].T + d_pre_r @ params["Wr"].T + d_pre_h @ params["Wh"].T
        d_pre1 = d_a1 * (1.0 - a1**2)
        grads["W1"] += obs[t].T @ d_pre1
        grads["b1"] += d_pre1.sum(axis=0)

        dh_next = dh_prev * keep[t]

    return grads


def _single_step(params, spec, obs, h):
    obs = np.asarray(obs, dtype=np.float64)
    _check_input(spec, obs)
    if obs.ndim != 1:
        raise ValueError(f"expected a single observation vector, got shape {obs.shape}")
    h = np.zeros(spec.hidden_size) if h is None else np.asarray(h, dtype=np.float64)
    if h.shape != (spec.hidden_size,):
        raise ValueError(f"hidden state has shape {h.shape}, expected ({spec.hidden_size},)")
    out, h_new, _ = forward_sequence(params, spec, obs[None, None, :], h0=h[None, :])
    return out[0, 0], h_new[0]


def policy_forward(params, spec, obs, h=None):
    mean, h_new = _single_step(params, spec, obs, h)
    return mean, np.exp(params["log_std"]), h_new


def value_forward(params, spec, obs, h=None):
    v, h_new = _single_step(params, spec, obs, h)
    return float(v[0]), h_new


# Diagonal Gaussian log-density, summed over the last axis
def log_prob(mean, std, u):
    mean, std, u = np.asarray(mean), np.asarray(std), np.asarray(u)
    z = (u - mean) / std
    return -0.5 * np.sum(z**2, axis=-1) - np.sum(np.log(std)) - 0.5 * z.shape[-1] * LOG_2PI


def sample(mean, std, rng):
    mean = np.asarray(mean)
    return mean + np.asarray(std) * rng.standard_normal(mean.shape)


# d log_prob / d mean and d log_prob / d log_std for each sample
def log_prob_grads(mean, log_std, u):
    std = np.exp(log_std)
    diff = np.asarray(u) - np.asarray(mean)
    d_mean = diff / std**2
    d_log_std = (diff / std) ** 2 - 1.0
    return d_mean, d_log_std


def gaussian_entropy(log_std):
    return float(np.sum(log_std) + 0.5 * len(log_std) * (1.0 + LOG_2PI))
