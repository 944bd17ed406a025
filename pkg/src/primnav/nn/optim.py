"""Adam optimizer over layer parameter lists."""

from __future__ import annotations

import numpy as np


def adam_update(param: np.ndarray, grad: np.ndarray, m: np.ndarray,
                v: np.ndarray, t: int, lr: float, beta1: float = 0.9,
                beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam step, in place on param, m and v. t >= 1."""
    if t < 1:
        raise ValueError("Adam step count t must be >= 1")
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Tracks first/second moments for every parameter of a layer list.

    Layers expose parameters() -> [(name, param, grad)], and the layer
    list must not change between steps.
    """

    def __init__(self, layers, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.layers = list(layers)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._moments = {}
        for li, layer in enumerate(self.layers):
            for name, param, _ in layer.parameters():
                self._moments[(li, name)] = (np.zeros_like(param),
                                             np.zeros_like(param))

    def step(self) -> None:
        self.t += 1
        for li, layer in enumerate(self.layers):
            for name, param, grad in layer.parameters():
                m, v = self._moments[(li, name)]
                adam_update(param, grad, m, v, self.t, self.lr,
                            self.beta1, self.beta2, self.eps)

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()
