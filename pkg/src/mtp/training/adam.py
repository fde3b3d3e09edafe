"""Adam with bias correction.

    m <- b1 m + (1-b1) g        mhat = m / (1 - b1^t)
    v <- b2 v + (1-b2) g^2      vhat = v / (1 - b2^t)
    theta <- theta - lr * mhat / (sqrt(vhat) + eps)

State tensors are float32 like the parameters; a zero gradient leaves a
fresh parameter exactly unchanged because m and v stay zero.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError
from ..model.params import MtpParams


class Adam:
    def __init__(self, params: MtpParams, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ConfigError(f"lr must be > 0, got {lr}")
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ConfigError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        if eps <= 0:
            raise ConfigError(f"eps must be > 0, got {eps}")
        self.params = params
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors.items()}

    def step(self, grads: dict):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, theta in self.params.tensors.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(theta)
            if g.shape != theta.shape:
                raise ShapeError(
                    f"gradient for {name}: shape {g.shape} does not match {theta.shape}"
                )
            g = g.astype(theta.dtype, copy=False)
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            mhat = m / bc1
            vhat = v / bc2
            theta -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
