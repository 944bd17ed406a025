"""Velocity/steering motion-primitive library.

Every primitive holds a single (reference speed, steering offset) pair
for the whole horizon; steering offsets are sampled uniformly inside the
horizontal field of view minus a safety margin so the commanded
trajectories stay visible to the depth sensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sim.dynamics import Action


@dataclass(frozen=True)
class ActionSequence:
    """H identical actions: constant speed and steering primitive."""

    v_ref: float
    steer: float
    horizon: int

    def first_action(self) -> Action:
        return Action(v_ref=self.v_ref, steer=self.steer)

    def as_array(self) -> np.ndarray:
        out = np.empty((self.horizon, 2), dtype=np.float64)
        out[:, 0] = self.v_ref
        out[:, 1] = self.steer
        return out


@dataclass(frozen=True)
class MotionPrimitivesLibrary:
    sequences: tuple[ActionSequence, ...]
    horizon: int

    def __len__(self) -> int:
        return len(self.sequences)

    def steers(self) -> np.ndarray:
        return np.array([s.steer for s in self.sequences])

    def speeds(self) -> np.ndarray:
        return np.array([s.v_ref for s in self.sequences])

    def action_array(self) -> np.ndarray:
        """(N_MP, H, 2) array of (v_ref, steer) rows."""
        return np.stack([s.as_array() for s in self.sequences])


def build_mpl(speeds: list[float], n_steer: int, fov_h: float,
              fov_margin: float, horizon: int) -> MotionPrimitivesLibrary:
    """Cartesian product of speeds with a uniform symmetric steering grid.

    Ordering is speed-major with steering ascending, deterministically.
    """
    if n_steer < 2:
        raise ValueError("n_steer must be >= 2")
    if not speeds or any(v <= 0 for v in speeds):
        raise ValueError("speeds must be non-empty and positive")
    steer_max = fov_h / 2.0 - fov_margin
    if steer_max <= 0:
        raise ValueError("fov_h/2 must exceed the margin")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")

    steer_grid = np.linspace(-steer_max, steer_max, n_steer)
    sequences = tuple(
        ActionSequence(v_ref=float(v), steer=float(psi), horizon=horizon)
        for v in speeds for psi in steer_grid
    )
    return MotionPrimitivesLibrary(sequences=sequences, horizon=horizon)


def mpl_from_config(cfg) -> MotionPrimitivesLibrary:
    return build_mpl(
        speeds=cfg.get_float_list("mpl.speeds"),
        n_steer=cfg.get_int("mpl.n_steer"),
        fov_h=math.radians(cfg.get_float("sim.fov_h_deg")),
        fov_margin=math.radians(cfg.get_float("mpl.fov_margin_deg")),
        horizon=cfg.get_int("mpl.horizon"),
    )
