from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from tempofuse.autodiff import Parameter


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads))


def clip_by_global_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm


class Adam:
    """Adaptive-moment optimizer with bias correction.

    Updates allocate new arrays, so parameter values captured elsewhere
    (checkpoints, best-epoch snapshots) are never mutated in place.
    """

    def __init__(self, parameters: Sequence[Parameter], learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.parameters = list(parameters)
        self.learning_rate, self.beta1, self.beta2, self.eps = learning_rate, beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in self.parameters]
        self.v = [np.zeros_like(p.value) for p in self.parameters]
        self.t = 0

    def step(self, grads: Mapping[Parameter, np.ndarray] | Sequence[np.ndarray]) -> None:
        if isinstance(grads, Mapping):
            grads = [grads[p] for p in self.parameters]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1.0 - b1 ** self.t, 1.0 - b2 ** self.t
        for i, (p, g) in enumerate(zip(self.parameters, grads)):
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            p.value = p.value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
