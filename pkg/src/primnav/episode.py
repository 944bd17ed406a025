"""Closed-loop episodes and their replayable binary logs.

An episode renders, plans and steps at the control rate until the robot
collides (ground truth) or the timeout elapses. The log header embeds the
resolved config, the world and the start state, so a log plus the
checkpoint reproduces the run bit-for-bit.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config, config_from_text, config_to_text
from .cpn import CpnModel, model_to_bytes
from .depthfill import FilterConfig
from .goals import GoalPolicy
from .mpl import MotionPrimitivesLibrary, mpl_from_config
from .planner import PlannerConfig, PlanStepResult, plan_step
from .sim import (
    CameraConfig,
    DynamicsParams,
    RobotState,
    World,
    check_collision,
    render_depth,
    step_dynamics,
)
from .sim.world import world_from_bytes, world_to_bytes
from .uncertainty import PartialState

_MAGIC = b"OREP"
_VERSION = 1


class EpisodeLogError(ValueError):
    pass


@dataclass
class StepRecord:
    state: tuple[float, float, float, float, float]  # x, y, yaw, v, omega
    est: tuple[float, float]                         # corrupted (v, omega)
    action: tuple[float, float]                      # executed (v_ref, steer)
    chosen: int
    costs: np.ndarray                                # (N_MP,) f32
    timings: tuple[float, float, float, float, float]


@dataclass
class EpisodeLog:
    config_text: str
    world: World
    start: RobotState
    seed: int
    checkpoint_sha: bytes
    steps: list[StepRecord]
    collided: bool
    flight_time: float
    distance: float


def _f32(x) -> float:
    return float(np.float32(x))


def _mask_seed(seed: int, step: int) -> int:
    return int(np.random.SeedSequence([seed, step, 7]).generate_state(1)[0])


def run_episode(world: World, start: RobotState, model: CpnModel,
                cfg: Config, seed: int,
                goal_policy: GoalPolicy | None = None,
                record_timing: bool = True) -> EpisodeLog:
    """Run one seeded episode under the given resolved configuration.

    The planner sees the corrupted estimate (v - delta_v, omega +
    delta_omega with the configured covariance); the true state drives the
    dynamics and the ground-truth collision check.
    """
    cam = CameraConfig.from_config(cfg)
    dyn = DynamicsParams.from_config(cfg)
    filter_cfg = FilterConfig.from_config(cfg)
    planner_cfg = PlannerConfig.from_config(cfg)
    mpl = mpl_from_config(cfg)
    if goal_policy is None:
        goal_policy = GoalPolicy.from_config(cfg)
    goal_policy.reset()

    robot_radius = cfg.get_float("sim.robot_radius")
    flight_height = cfg.get_float("sim.flight_height")
    delta_v = cfg.get_float("eval.delta_v")
    delta_omega = cfg.get_float("eval.delta_omega")
    var_v = cfg.get_float("uncertainty.sigma_v") ** 2
    var_omega = cfg.get_float("uncertainty.sigma_omega") ** 2
    timeout = cfg.get_float("eval.timeout")
    n_steps_max = int(round(timeout / dyn.dt))

    state = start
    steps: list[StepRecord] = []
    collided = False
    distance = 0.0

    for step_idx in range(n_steps_max):
        render_rng = np.random.default_rng([seed, step_idx, 0])
        img = render_depth(world, state, cam, render_rng)
        est = PartialState(
            v=_f32(state.v - delta_v),
            omega=_f32(state.omega + delta_omega),
            var_v=var_v, var_omega=var_omega,
        )
        goal = goal_policy.goal_heading(state)
        res: PlanStepResult = plan_step(
            img, est, state.yaw, goal, mpl, model, filter_cfg, planner_cfg,
            mask_seed=_mask_seed(seed, step_idx))
        seq = mpl.sequences[res.chosen]
        action = seq.first_action()

        timings = res.timings if record_timing else None
        steps.append(StepRecord(
            state=(_f32(state.x), _f32(state.y), _f32(state.yaw),
                   _f32(state.v), _f32(state.omega)),
            est=(est.v, est.omega),
            action=(_f32(action.v_ref), _f32(action.steer)),
            chosen=res.chosen,
            costs=res.costs.astype(np.float32),
            timings=((timings.filter_ms, timings.cnn_ms, timings.combiner_ms,
                      timings.prediction_ms, timings.total_ms)
                     if timings else (0.0, 0.0, 0.0, 0.0, 0.0)),
        ))

        # steering offsets are re-anchored at every replan, so plan yaw is
        # the yaw at the step start
        new_state = step_dynamics(state, action, dyn, plan_yaw=state.yaw)
        distance += float(np.hypot(new_state.x - state.x,
                                   new_state.y - state.y))
        state = new_state
        if check_collision(world, state, robot_radius, flight_height):
            collided = True
            break

    flight_time = len(steps) * dyn.dt if collided else timeout
    return EpisodeLog(
        config_text=config_to_text(cfg),
        world=world,
        start=start,
        seed=int(seed),
        checkpoint_sha=hashlib.sha256(model_to_bytes(model)).digest(),
        steps=steps,
        collided=collided,
        flight_time=flight_time,
        distance=distance,
    )


# ---------- OREP serialization ----------

def save_episode_log(log: EpisodeLog, path: str | Path) -> None:
    Path(path).write_bytes(episode_log_to_bytes(log))


def episode_log_to_bytes(log: EpisodeLog) -> bytes:
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<H", _VERSION)
    cfg_bytes = log.config_text.encode("utf-8")
    out += struct.pack("<I", len(cfg_bytes))
    out += cfg_bytes
    world_bytes = world_to_bytes(log.world)
    out += struct.pack("<I", len(world_bytes))
    out += world_bytes
    out += struct.pack("<Q", log.seed)
    out += log.checkpoint_sha
    out += struct.pack("<5f", log.start.x, log.start.y, log.start.yaw,
                       log.start.v, log.start.omega)
    out += struct.pack("<B", 1 if log.collided else 0)
    out += struct.pack("<2f", log.flight_time, log.distance)
    n_mp = log.steps[0].costs.shape[0] if log.steps else 0
    out += struct.pack("<HI", n_mp, len(log.steps))
    for rec in log.steps:
        out += struct.pack("<5f", *rec.state)
        out += struct.pack("<2f", *rec.est)
        out += struct.pack("<2f", *rec.action)
        out += struct.pack("<H", rec.chosen)
        out += np.ascontiguousarray(rec.costs, dtype="<f4").tobytes()
        out += struct.pack("<5f", *rec.timings)
    return bytes(out)


def load_episode_log(path: str | Path) -> EpisodeLog:
    return episode_log_from_bytes(Path(path).read_bytes())


def episode_log_from_bytes(data: bytes) -> EpisodeLog:
    pos = 0

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(data):
            raise EpisodeLogError("truncated episode log")
        vals = struct.unpack_from(fmt, data, pos)
        pos += size
        return vals

    def take_bytes(n):
        nonlocal pos
        if pos + n > len(data):
            raise EpisodeLogError("truncated episode log")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take_bytes(4) != _MAGIC:
        raise EpisodeLogError("bad magic, not an OREP episode log")
    (version,) = take("<H")
    if version != _VERSION:
        raise EpisodeLogError(f"unsupported episode log version {version}")
    (cfg_len,) = take("<I")
    config_text = take_bytes(cfg_len).decode("utf-8")
    (world_len,) = take("<I")
    world = world_from_bytes(take_bytes(world_len))
    (seed,) = take("<Q")
    checkpoint_sha = take_bytes(32)
    sx, sy, syaw, sv, somega = take("<5f")
    (collided,) = take("<B")
    flight_time, distance = take("<2f")
    n_mp, n_steps = take("<HI")

    steps = []
    for _ in range(n_steps):
        state = take("<5f")
        est = take("<2f")
        action = take("<2f")
        (chosen,) = take("<H")
        costs = np.frombuffer(take_bytes(4 * n_mp), dtype="<f4").copy()
        timings = take("<5f")
        steps.append(StepRecord(state=state, est=est, action=action,
                                chosen=chosen, costs=costs, timings=timings))
    if pos != len(data):
        raise EpisodeLogError("trailing bytes after episode payload")

    return EpisodeLog(
        config_text=config_text, world=world,
        start=RobotState(sx, sy, syaw, sv, somega),
        seed=seed, checkpoint_sha=checkpoint_sha, steps=steps,
        collided=bool(collided), flight_time=flight_time, distance=distance,
    )


def replay_episode(log: EpisodeLog, model: CpnModel) -> tuple[bool, str]:
    """Re-run an episode from its log header and diff the step records.

    Timing fields are excluded from the comparison (wall clock is not
    reproducible); everything else must match exactly.
    """
    sha = hashlib.sha256(model_to_bytes(model)).digest()
    if sha != log.checkpoint_sha:
        return False, "checkpoint hash differs from the one in the log"
    cfg = config_from_text(log.config_text)
    fresh = run_episode(log.world, log.start, model, cfg, log.seed,
                        record_timing=False)
    if fresh.collided != log.collided:
        return False, "collision outcome differs"
    if len(fresh.steps) != len(log.steps):
        return False, (f"step count differs: replay {len(fresh.steps)} "
                       f"vs log {len(log.steps)}")
    for i, (a, b) in enumerate(zip(fresh.steps, log.steps)):
        if tuple(a.state) != tuple(b.state):
            return False, f"step {i}: true state differs"
        if tuple(a.est) != tuple(b.est):
            return False, f"step {i}: estimated state differs"
        if tuple(a.action) != tuple(b.action) or a.chosen != b.chosen:
            return False, f"step {i}: chosen action differs"
        if not np.array_equal(a.costs, b.costs):
            return False, f"step {i}: primitive costs differ"
    return True, "replay matches the log"
