"""Receding-horizon action selection over the motion-primitive library.

Each planning step scores every primitive with the uncertainty-aware
collision cost, keeps the primitives within c_th of the cheapest one, and
among those survivors picks the smallest deviation from the goal heading.
Only the first action of the winner is executed before replanning.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .angles import wrap_angle
from .cpn import CpnModel, DropoutMask, normalize_depth, staged_inference
from .depthfill import FilterConfig, fill_depth
from .mpl import MotionPrimitivesLibrary
from .sim.camera import DepthImage
from .uncertainty import (
    PartialState,
    discounted_cost,
    sigma_points,
    total_variance,
    uac_cost,
    ut_moments,
)

MODE_NAIVE = "naive"
MODE_UNCERTAINTY = "uncertainty-aware"


@dataclass(frozen=True)
class PlannerConfig:
    mode: str = MODE_UNCERTAINTY
    c_th: float = 0.2
    lam: float = 0.4
    alpha: float = 1.0
    kappa_ut: float = 1.0
    n_mc: int = 5
    jobs: int = 1

    def __post_init__(self):
        if self.c_th <= 0:
            raise ValueError("c_th must be positive")
        if self.mode not in (MODE_NAIVE, MODE_UNCERTAINTY):
            raise ValueError(f"unknown planner mode {self.mode!r}")
        if self.n_mc < 1:
            raise ValueError("n_mc must be >= 1")

    @classmethod
    def from_config(cls, cfg) -> "PlannerConfig":
        return cls(
            mode=cfg.get_str("planner.mode"),
            c_th=cfg.get_float("planner.c_th"),
            lam=cfg.get_float("uncertainty.lambda"),
            alpha=cfg.get_float("uncertainty.alpha"),
            kappa_ut=cfg.get_float("uncertainty.kappa_ut"),
            n_mc=cfg.get_int("uncertainty.n_mc"),
        )


@dataclass
class StepTimings:
    filter_ms: float = 0.0
    cnn_ms: float = 0.0
    combiner_ms: float = 0.0
    prediction_ms: float = 0.0
    total_ms: float = 0.0


@dataclass
class PlanStepResult:
    chosen: int
    costs: np.ndarray          # (N_MP,) uncertainty-aware collision costs
    survivors: np.ndarray      # (N_MP,) bool
    goal_costs: np.ndarray     # (N_MP,)
    timings: StepTimings = field(default_factory=StepTimings)


def goal_cost(steer: float, yaw: float, goal_heading: float) -> float:
    """Absolute wrapped deviation of (steer + yaw) from the goal heading."""
    return abs(wrap_angle(steer + yaw - goal_heading))


def select_action(costs: np.ndarray, goal_costs: np.ndarray,
                  steers: np.ndarray, c_th: float
                  ) -> tuple[int, np.ndarray]:
    """Threshold-filter then goal-rank; returns (chosen index, survivors).

    A primitive survives iff its cost is within c_th of the minimum
    (closed inequality, so the minimizer itself always survives). Among
    survivors the smallest goal cost wins; ties break to the smallest
    |steer|, then the lowest index, which keeps left/right symmetric
    situations deterministic.
    """
    if costs.size == 0:
        raise ValueError("empty primitive library")
    survivors = costs <= costs.min() + c_th
    idx = np.flatnonzero(survivors)
    order = np.lexsort((idx, np.abs(steers[idx]), goal_costs[idx]))
    return int(idx[order[0]]), survivors


def plan_step(img: DepthImage, est: PartialState, yaw: float,
              goal_heading: float, mpl: MotionPrimitivesLibrary,
              model: CpnModel, filter_cfg: FilterConfig,
              cfg: PlannerConfig, mask_seed: int = 0) -> PlanStepResult:
    """One receding-horizon planning step from a raw depth image.

    In uncertainty-aware mode, sigma points of the estimated state and
    n_mc dropout masks (seeded deterministically from mask_seed) feed the
    staged inference; naive mode collapses to the mean state and a single
    deterministic pass. States with negative v are clamped to zero before
    entering the network (outside its training support).
    """
    if len(mpl) == 0:
        raise ValueError("empty primitive library")
    t_start = time.perf_counter()

    filled, _ = fill_depth(img, filter_cfg)
    image = normalize_depth(filled)
    t_filter = time.perf_counter()

    if cfg.mode == MODE_UNCERTAINTY:
        sset = sigma_points(est, cfg.kappa_ut)
        states = sset.points.copy()
        weights = sset.weights
        masks: list[DropoutMask | None] = [
            model.new_mask(mask_seed + n) for n in range(cfg.n_mc)]
    else:
        states = est.mean()[None, :]
        weights = np.ones(1)
        masks = [None]
    states[:, 0] = np.maximum(states[:, 0], 0.0)

    probs, stage_t = staged_inference(
        model, image, states, masks, mpl.action_array(), jobs=cfg.jobs)

    col_costs = discounted_cost(probs.astype(np.float64), cfg.lam)
    mean_per_mask, var_per_mask = ut_moments(
        np.moveaxis(col_costs, 1, -1), weights)      # (N_MC, N_MP) each
    mu_bar, sigma_tot = total_variance(mean_per_mask, var_per_mask)
    if cfg.mode == MODE_UNCERTAINTY:
        costs = uac_cost(mu_bar, sigma_tot, cfg.alpha)
    else:
        costs = mu_bar

    steers = mpl.steers()
    goal_costs = np.array(
        [goal_cost(s, yaw, goal_heading) for s in steers])
    chosen, survivors = select_action(costs, goal_costs, steers, cfg.c_th)
    t_end = time.perf_counter()

    timings = StepTimings(
        filter_ms=(t_filter - t_start) * 1e3,
        cnn_ms=stage_t.cnn_ms,
        combiner_ms=stage_t.combiner_ms,
        prediction_ms=stage_t.prediction_ms,
        total_ms=(t_end - t_start) * 1e3,
    )
    return PlanStepResult(chosen=chosen, costs=costs, survivors=survivors,
                          goal_costs=goal_costs, timings=timings)
