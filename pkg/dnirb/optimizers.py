"""
Optimizers
==========

Adam and plain SGD over name-keyed float64 arrays. Both update the arrays in
place, so the NetworkParams that own them see every step.
"""

from typing import Dict

import numpy as np

from dnirb.errors import ConfigurationError


class SGD:
    def __init__(self, lr: float = 1e-3):
        self.lr = lr

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        for key, param in params.items():
            param -= self.lr * grads[key]


class Adam:
    """Adaptive moment estimation with bias-corrected first and second moments"""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        # bias corrections once per step, not per parameter
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        step_size = self.lr / bc1

        for key, param in params.items():
            g = grads[key]
            if key not in self.m:
                self.m[key] = np.zeros_like(param)
                self.v[key] = np.zeros_like(param)

            self.m[key] *= self.beta1
            self.m[key] += (1.0 - self.beta1) * g
            self.v[key] *= self.beta2
            self.v[key] += (1.0 - self.beta2) * (g * g)

            denom = np.sqrt(self.v[key] * (1.0 / bc2)) + self.epsilon
            param -= step_size * self.m[key] / denom


def make_optimizer(name: str, lr: float, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
    name = name.lower()
    if name == "adam":
        return Adam(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)
    if name == "sgd":
        return SGD(lr=lr)
    raise ConfigurationError(f"unknown optimizer {name!r}; expected 'adam' or 'sgd'")
