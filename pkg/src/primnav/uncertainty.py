"""Uncertainty-aware collision costs.

Pipeline per action sequence: per-step collision probabilities collapse
into a time-discounted scalar cost; the unscented transform propagates
the (v, omega) covariance through that cost; the dropout-mask ensemble
mean/variance pairs combine by the law of total variance; the final cost
penalizes the mean by a multiple of the total standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_DIM = 2  # (v, omega)


@dataclass(frozen=True)
class PartialState:
    """Estimated forward speed and yaw rate with diagonal covariance."""

    v: float
    omega: float
    var_v: float = 0.0
    var_omega: float = 0.0

    def __post_init__(self):
        if self.var_v < 0 or self.var_omega < 0:
            raise ValueError("variances must be non-negative")

    def mean(self) -> np.ndarray:
        return np.array([self.v, self.omega])


@dataclass(frozen=True)
class SigmaSet:
    """2k+1 sigma points (rows) and their common mean/covariance weights."""

    points: np.ndarray   # (2k+1, STATE_DIM)
    weights: np.ndarray  # (2k+1,)


def discounted_cost(profile: np.ndarray, lam: float) -> np.ndarray:
    """Exponentially discounted sum of per-step collision probabilities.

    cost = sum_i profile[i] * exp(-lam * i) with i counted from 0 at the
    first predicted step, so earlier predicted collisions cost more.
    Accepts (..., H) batches and reduces the last axis.
    """
    if lam <= 0:
        raise ValueError("discount rate lambda must be positive")
    profile = np.asarray(profile)
    steps = np.arange(profile.shape[-1], dtype=profile.dtype)
    return profile @ np.exp(-lam * steps).astype(profile.dtype)


def sigma_points(state: PartialState, kappa: float) -> SigmaSet:
    """Classic Julier sigma points for the 2-D partial state.

    Point 0 is the mean with weight kappa/(k+kappa); the remaining 2k
    points sit at mean +/- sqrt((k+kappa) * Sigma) columns with weight
    1/(2(k+kappa)). Points are returned unclamped; feasibility clamping
    (v >= 0) is the caller's concern so the transform itself stays exact.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    k = STATE_DIM
    mean = state.mean()
    spread = np.sqrt((k + kappa) * np.array([state.var_v, state.var_omega]))
    points = np.tile(mean, (2 * k + 1, 1))
    for dim in range(k):
        points[1 + 2 * dim, dim] += spread[dim]
        points[2 + 2 * dim, dim] -= spread[dim]
    weights = np.full(2 * k + 1, 1.0 / (2.0 * (k + kappa)))
    weights[0] = kappa / (k + kappa)
    return SigmaSet(points=points, weights=weights)


def ut_moments(costs: np.ndarray, weights: np.ndarray
               ) -> tuple[np.ndarray, np.ndarray]:
    """Weighted mean and central second moment over the sigma-point axis.

    costs has shape (..., N_SIGMA); both outputs drop that last axis.
    """
    costs = np.asarray(costs)
    weights = np.asarray(weights, dtype=costs.dtype)
    if costs.shape[-1] != weights.shape[0]:
        raise ValueError("one cost per sigma point required")
    mean = costs @ weights
    centered = costs - mean[..., None]
    var = (centered * centered) @ weights
    return mean, var


def total_variance(means: np.ndarray, variances: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Law-of-total-variance pooling over the mask ensemble (axis 0).

    sigma_tot = mean_n[ var_n + (mean_n - pooled_mean)^2 ].
    """
    means = np.asarray(means)
    variances = np.asarray(variances)
    if np.any(variances < 0):
        raise ValueError("member variances must be non-negative")
    mu_bar = means.mean(axis=0)
    sigma_tot = (variances + (means - mu_bar) ** 2).mean(axis=0)
    return mu_bar, sigma_tot


def uac_cost(mu_bar: np.ndarray, sigma_tot: np.ndarray,
             alpha: float) -> np.ndarray:
    """Uncertainty-aware cost: ensemble mean plus alpha standard deviations."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    sigma_tot = np.asarray(sigma_tot)
    if np.any(sigma_tot < 0):
        raise ValueError("total variance must be non-negative")
    return np.asarray(mu_bar) + alpha * np.sqrt(sigma_tot)
