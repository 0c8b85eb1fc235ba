# misr/neuralnet/optim.py
from typing import Dict

import numpy as np


class Adam:
    """
    Adam with bias-corrected moments. Parameters are updated in place; the
    learning rate is passed per step so a schedule can drive it.
    """

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.cache: Dict[str, Dict[str, np.ndarray]] = {}

    def __str__(self):
        return f"Adam(beta1={self.beta1}, beta2={self.beta2}, eps={self.eps}, t={self.t})"

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, param in params.items():
            grad = grads.get(name)
            if grad is None:
                continue
            state = self.cache.setdefault(name, {"mean": np.zeros_like(param), "var": np.zeros_like(param)})
            state["mean"] = self.beta1 * state["mean"] + (1.0 - self.beta1) * grad
            state["var"] = self.beta2 * state["var"] + (1.0 - self.beta2) * grad * grad
            update = lr * (state["mean"] / c1) / (np.sqrt(state["var"] / c2) + self.eps)
            param -= update.astype(param.dtype)


def exponential_lr(epoch: int, epochs: int, lr_initial: float, lr_final: float) -> float:
    """Per-epoch decay pinned so epoch 0 gives lr_initial and the last epoch lr_final."""
    if epochs <= 1:
        return lr_initial
    return lr_initial * (lr_final / lr_initial) ** (epoch / (epochs - 1))
