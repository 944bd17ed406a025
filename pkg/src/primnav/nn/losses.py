"""Training loss for per-step collision labels."""

from __future__ import annotations

import numpy as np

CLAMP_EPS = 1e-7


def weighted_bce(pred: np.ndarray, label: np.ndarray,
                 w_pos: float) -> tuple[float, np.ndarray]:
    """Weighted binary cross-entropy, mean-reduced over every element.

    Positive (collision) terms are scaled by w_pos > 0 to trade precision
    for recall. Predictions are clamped to [eps, 1-eps] before the logs;
    the gradient is taken through the clamp (zero outside it) and already
    includes the 1/N mean factor.
    """
    if w_pos <= 0:
        raise ValueError("w_pos must be positive")
    p = np.clip(pred, CLAMP_EPS, 1.0 - CLAMP_EPS)
    y = label.astype(p.dtype)
    losses = -(w_pos * y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    n = p.size
    grad = (-w_pos * y / p + (1.0 - y) / (1.0 - p)) / n
    grad = np.where((pred > CLAMP_EPS) & (pred < 1.0 - CLAMP_EPS), grad, 0.0)
    return float(losses.mean()), grad
