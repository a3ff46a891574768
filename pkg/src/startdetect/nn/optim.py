"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np


def adam_step(param: np.ndarray, grad: np.ndarray, m: np.ndarray,
              v: np.ndarray, t: int, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One in-place Adam update; `t` is the 1-based step count."""
    m[...] = beta1 * m + (1 - beta1) * grad
    v[...] = beta2 * v + (1 - beta2) * grad * grad
    mhat = m / (1 - beta1 ** t)
    vhat = v / (1 - beta2 ** t)
    param[...] = param - lr * mhat / (np.sqrt(vhat) + eps)


class Adam:
    """Keeps first/second moments per parameter, updates in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p) for k, p in params.items()}
        self.v = {k: np.zeros_like(p) for k, p in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, param in self.params.items():
            adam_step(param, grads[name], self.m[name], self.v[name],
                      self.t, self.lr, self.beta1, self.beta2, self.eps)

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Moments plus step count, in parameter declaration order."""
        out = []
        for name in self.params:
            out.append((f"adam.m.{name}", self.m[name]))
            out.append((f"adam.v.{name}", self.v[name]))
        out.append(("adam.t", np.array([float(self.t)])))
        return out
