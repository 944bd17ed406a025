"""Batch evaluation experiments and the metrics CSV.

Two arena families mirror the simulation study: "seen" uses the same
obstacle generator the training data came from with exact state, "novel"
shifts the obstacle dimension ranges and density and corrupts the
planner's state estimate. Each (env, planner) cell runs seeded episodes
and reports collisions and flight time before collision.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import Config
from .cpn import CpnModel
from .episode import EpisodeLog, run_episode
from .sim import RobotState, World
from .sim.world import WorldGenConfig, generate_world

CSV_HEADER = "seed,planner,env,collided,flight_time_s,distance_m,step_ms"

ENV_SEEN = "seen-obstacles"
ENV_NOVEL = "novel-obstacles"

# full-scale reference outcomes from the original study (20 runs per cell,
# 100 s timeout): env A 0/20 at 100 s for both planners; env B 20/20 at
# 25.9 s naive vs 10/20 at 62.9 s uncertainty-aware. Context only; the
# desk-scale acceptance checks the trend, not these numbers.
REFERENCE_TABLE = {
    (ENV_SEEN, "naive"): (0, 100.0),
    (ENV_SEEN, "uncertainty-aware"): (0, 100.0),
    (ENV_NOVEL, "naive"): (20, 25.9),
    (ENV_NOVEL, "uncertainty-aware"): (10, 62.9),
}


@dataclass
class MetricsRow:
    seed: int
    planner: str
    env: str
    collided: bool
    flight_time_s: float
    distance_m: float
    step_ms: float

    def to_csv(self) -> str:
        return (f"{self.seed},{self.planner},{self.env},"
                f"{'true' if self.collided else 'false'},"
                f"{self.flight_time_s:.3f},{self.distance_m:.6f},"
                f"{self.step_ms:.3f}")


def novel_world_config(base: WorldGenConfig) -> WorldGenConfig:
    """Obstacle family for the novel arena: same kinds, unseen shapes.

    Bigger slab-like boxes, fat cylinders, longer walls and a higher
    density than anything in the training draw.
    """
    return replace(
        base,
        density=base.density * 1.25,
        box_side=(base.box_side[1], base.box_side[1] * 2.0),
        cyl_radius=(base.cyl_radius[1], base.cyl_radius[1] * 2.0),
        wall_length=(base.wall_length[1], base.wall_length[1] * 1.5),
        obstacle_height=(1.2, 2.8),
    )


def world_for_cell(cfg: Config, env: str, seed: int) -> World:
    gen = WorldGenConfig.from_config(cfg)
    if env == ENV_NOVEL:
        gen = novel_world_config(gen)
    env_code = 0 if env == ENV_SEEN else 1
    world_seed = int(np.random.SeedSequence(
        [seed, env_code, 303]).generate_state(1)[0])
    return generate_world(gen, world_seed)


def start_for_seed(cfg: Config, seed: int) -> RobotState:
    rng = np.random.default_rng([seed, 404])
    clearance = cfg.get_float("world.spawn_clearance")
    jitter = rng.uniform(-0.5, 0.5, size=2) * clearance
    return RobotState(x=float(np.float32(jitter[0])),
                      y=float(np.float32(jitter[1])),
                      yaw=float(np.float32(rng.uniform(-np.pi, np.pi))),
                      v=0.0, omega=0.0)


def cell_config(cfg: Config, env: str, mode: str) -> Config:
    out = cfg.copy()
    out.set("planner.mode", mode)
    if env == ENV_SEEN:
        out.set("eval.delta_v", 0.0)
        out.set("eval.delta_omega", 0.0)
    return out


def _episode_metrics(log: EpisodeLog, timing: bool) -> tuple[bool, float,
                                                             float, float]:
    step_ms = 0.0
    if timing and log.steps:
        step_ms = float(np.mean([rec.timings[4] for rec in log.steps]))
    return log.collided, log.flight_time, log.distance, step_ms


def _cell_task(args):
    cfg_values, env, mode, seed, timing = args
    cfg = Config(cfg_values)
    ccfg = cell_config(cfg, env, mode)
    from .cpn import model_from_bytes

    model = model_from_bytes(_cell_task.model_bytes, dtype=np.float32)
    world = world_for_cell(cfg, env, seed)
    start = start_for_seed(cfg, seed)
    log = run_episode(world, start, model, ccfg, seed)
    collided, flight, dist, step_ms = _episode_metrics(log, timing)
    return MetricsRow(seed=seed, planner=mode, env=env, collided=collided,
                      flight_time_s=flight, distance_m=dist, step_ms=step_ms)


def run_cells(cfg: Config, model: CpnModel, envs: list[str],
              modes: list[str], seeds: list[int], jobs: int = 1,
              timing: bool = False, progress=None) -> list[MetricsRow]:
    """Run every (env, mode, seed) episode; rows come back in that order
    regardless of completion order."""
    from .cpn import model_to_bytes

    tasks = [(cfg.as_dict(), env, mode, seed, timing)
             for env in envs for mode in modes for seed in seeds]
    rows: list[MetricsRow] = []
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        model_bytes = model_to_bytes(model)
        with ProcessPoolExecutor(
                max_workers=jobs, initializer=_set_cell_model,
                initargs=(model_bytes,)) as pool:
            for i, row in enumerate(pool.map(_cell_task, tasks)):
                rows.append(row)
                if progress is not None:
                    progress(i + 1, len(tasks), row)
    else:
        _set_cell_model(model_to_bytes(model))
        for i, task in enumerate(tasks):
            row = _cell_task(task)
            rows.append(row)
            if progress is not None:
                progress(i + 1, len(tasks), row)
    return rows


def _set_cell_model(model_bytes: bytes) -> None:
    _cell_task.model_bytes = model_bytes


def rows_to_csv(rows: list[MetricsRow]) -> str:
    return "\n".join([CSV_HEADER] + [row.to_csv() for row in rows]) + "\n"


@dataclass
class CellSummary:
    env: str
    planner: str
    collisions: int
    n_runs: int
    mean_flight_time: float


def summarize(rows: list[MetricsRow]) -> list[CellSummary]:
    cells: dict[tuple[str, str], list[MetricsRow]] = {}
    for row in rows:
        cells.setdefault((row.env, row.planner), []).append(row)
    out = []
    for (env, planner), cell_rows in cells.items():
        out.append(CellSummary(
            env=env, planner=planner,
            collisions=sum(r.collided for r in cell_rows),
            n_runs=len(cell_rows),
            mean_flight_time=float(np.mean(
                [r.flight_time_s for r in cell_rows])),
        ))
    return out


def summary_text(summaries: list[CellSummary]) -> str:
    lines = ["env                 planner             collisions  mean_flight_s"]
    for s in summaries:
        lines.append(f"{s.env:<19} {s.planner:<19} "
                     f"{s.collisions}/{s.n_runs:<9}  {s.mean_flight_time:.1f}")
    lines.append("(non-collision episodes count flight time at the timeout)")
    for (env, planner), (col, t) in REFERENCE_TABLE.items():
        lines.append(f"reference full-scale {env}/{planner}: "
                     f"{col}/20 at {t:.1f} s")
    return "\n".join(lines)


def timing_report(cfg: Config, model: CpnModel, n_steps: int = 20,
                  warmup: int = 3) -> dict:
    """Mean per-stage plan_step timing on a representative rendered scene.

    The original system reported a 47.4 ms loop on an embedded GPU with a
    6.2 / 2.5 / 8.4 / 20.1 ms CNN / combiner / prediction / filter split;
    that figure is context, not a target for this CPU implementation.
    """
    from .depthfill import FilterConfig
    from .mpl import mpl_from_config
    from .planner import PlannerConfig, plan_step
    from .sim import CameraConfig, render_depth
    from .uncertainty import PartialState

    world = world_for_cell(cfg, ENV_SEEN, seed=12345)
    start = start_for_seed(cfg, 12345)
    cam = CameraConfig.from_config(cfg)
    img = render_depth(world, start, cam, np.random.default_rng(0))
    est = PartialState(v=1.0, omega=0.0,
                       var_v=cfg.get_float("uncertainty.sigma_v") ** 2,
                       var_omega=cfg.get_float("uncertainty.sigma_omega") ** 2)
    mpl = mpl_from_config(cfg)
    fcfg = FilterConfig.from_config(cfg)
    pcfg = PlannerConfig.from_config(cfg)

    stages = {"filter_ms": [], "cnn_ms": [], "combiner_ms": [],
              "prediction_ms": [], "total_ms": []}
    for i in range(warmup + n_steps):
        res = plan_step(img, est, start.yaw, 0.0, mpl, model, fcfg, pcfg,
                        mask_seed=i)
        if i < warmup:
            continue
        t = res.timings
        stages["filter_ms"].append(t.filter_ms)
        stages["cnn_ms"].append(t.cnn_ms)
        stages["combiner_ms"].append(t.combiner_ms)
        stages["prediction_ms"].append(t.prediction_ms)
        stages["total_ms"].append(t.total_ms)
    report = {name: float(np.mean(vals)) for name, vals in stages.items()}
    report["n_mc"] = pcfg.n_mc
    report["n_mp"] = len(mpl)
    report["horizon"] = mpl.horizon
    report["reference_gpu_loop_ms"] = 47.4
    return report
