import logging

import numpy as np

logger = logging.getLogger(__name__)


class SGD:
    name = "sgd"

    def __init__(self, lr):
        self.lr = lr

    # ascent=True follows the gradient uphill
    def step(self, params, grads, ascent=False):
        sign = 1.0 if ascent else -1.0
        return {name: value + sign * self.lr * grads[name] for name, value in params.items()}

    def state_array(self, params):
        return np.array([0.0])

    def load_state_array(self, values, params):
        return self


class Adam:
    name = "adam"

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads, ascent=False):
        if self.m is None:
            self.m = {name: np.zeros_like(value) for name, value in params.items()}
            self.v = {name: np.zeros_like(value) for name, value in params.items()}
        self.t += 1
        sign = 1.0 if ascent else -1.0
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        updated = {}
        for name, value in params.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            updated[name] = value + sign * self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated

    # [t, m (param order)..., v (param order)...]
    def state_array(self, params):
        if self.m is None:
            return np.array([0.0])
        m = np.concatenate([self.m[name].ravel() for name in params])
        v = np.concatenate([self.v[name].ravel() for name in params])
        return np.concatenate([[float(self.t)], m, v])

    def load_state_array(self, values, params):
        values = np.asarray(values, dtype=np.float64)
        self.t = int(values[0])
        if values.size == 1:
            self.m = self.v = None
            return self
        size = sum(value.size for value in params.values())
        if values.size != 1 + 2 * size:
            raise ValueError(f"optimizer state has {values.size} values, expected {1 + 2 * size}")
        self.m, self.v = {}, {}
        offset = 1
        for target in (self.m, self.v):
            for name, value in params.items():
                target[name] = values[offset:offset + value.size].reshape(value.shape).copy()
                offset += value.size
        return self


def make_optimizer(kind, lr):
    if kind == "adam":
        return Adam(lr)
    if kind == "sgd":
        return SGD(lr)
    raise ValueError(f"unknown optimizer: {kind}")
