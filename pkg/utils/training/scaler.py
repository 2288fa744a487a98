import numpy as np


# Running per-component mean and variance. Batches are merged with the
# parallel form of Welford's update, so the result does not depend on how the
# samples were split into batches.
class ObservationScaler:

    def __init__(self, dim, floor=1e-8):
        self.dim = dim
        self.floor = floor
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    @property
    def var(self):
        if self.count < 2:
            return np.ones(self.dim)
        return self.m2 / self.count

    @property
    def std(self):
        return np.sqrt(self.var)

    def update(self, observations):
        batch = np.asarray(observations, dtype=np.float64).reshape(-1, self.dim)
        n = batch.shape[0]
        if n == 0:
            return self
        batch_mean = batch.mean(axis=0)
        batch_m2 = ((batch - batch_mean) ** 2).sum(axis=0)
        total = self.count + n
        delta = batch_mean - self.mean
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + batch_m2 + delta**2 * (self.count * n / total)
        self.count = total
        return self

    def scale(self, obs):
        return (np.asarray(obs, dtype=np.float64) - self.mean) / np.maximum(self.std, self.floor)

    def copy(self):
        other = ObservationScaler(self.dim, self.floor)
        other.count, other.mean, other.m2 = self.count, self.mean.copy(), self.m2.copy()
        return other

    # [count, floor, mean..., m2...] for the checkpoint
    def to_array(self):
        return np.concatenate([[self.count, self.floor], self.mean, self.m2])

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=np.float64)
        dim = (values.size - 2) // 2
        scaler = cls(dim, floor=float(values[1]))
        scaler.count = int(values[0])
        scaler.mean = values[2:2 + dim].copy()
        scaler.m2 = values[2 + dim:].copy()
        return scaler
