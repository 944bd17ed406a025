"""Command-line harness: world generation, data collection, training,
evaluation, single-step debugging and replay."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, ConfigError, load_config, parse_config_text


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--jobs", type=int, default=1)


def _build_config(args) -> Config:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        parsed = parse_config_text(item)
        overrides.update(parsed)
    return load_config(args.config, overrides)


def cmd_gen_worlds(args) -> int:
    from .evaluate import ENV_NOVEL, ENV_SEEN, world_for_cell
    from .sim.world import save_world

    cfg = _build_config(args)
    env = ENV_NOVEL if args.env == "novel" else ENV_SEEN
    args.out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        world = world_for_cell(cfg, env, args.seed + i)
        path = args.out / f"world_{env}_{args.seed + i:04d}.orwd"
        save_world(world, path)
        print(f"{path}  obstacles={len(world.obstacles)}")
    return 0


def cmd_collect(args) -> int:
    from .dataset import build_dataset, class_ratio, save_dataset

    cfg = _build_config(args)

    def progress(episodes, n_records, n_pos, n_neg):
        print(f"episodes {episodes:5d}  records {n_records:6d}  "
              f"(+{n_pos} / -{n_neg})", flush=True)

    ds = build_dataset(cfg, args.seed, jobs=args.jobs, progress=progress)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, args.out)
    print(f"wrote {args.out}: {len(ds)} records, "
          f"class ratio {class_ratio(ds):.3f}, checksum {ds.checksum()[:16]}")
    return 0


def cmd_train(args) -> int:
    from .cpn import save_model
    from .dataset import load_dataset
    from .training import TrainReport, train_cpn

    cfg = _build_config(args)
    ds = load_dataset(args.dataset)
    print(f"dataset: {len(ds)} records, horizon {ds.horizon}")
    model, report = train_cpn(ds, cfg, args.seed, log=print)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out)
    final = report.final()
    ref = TrainReport.REFERENCE_VALIDATION
    print(f"wrote {args.out}")
    print(f"validation: accuracy {final.val_accuracy:.4f}, "
          f"precision {final.val_precision:.4f}, recall {final.val_recall:.4f}")
    print(f"(full-scale reference: accuracy {ref['accuracy']:.4f}, "
          f"precision {ref['precision']:.4f}, recall {ref['recall']:.4f} — "
          "not a desk-scale target)")
    return 0


def cmd_eval(args) -> int:
    from .cpn import load_model
    from .evaluate import (
        ENV_NOVEL,
        ENV_SEEN,
        rows_to_csv,
        run_cells,
        summarize,
        summary_text,
    )

    cfg = _build_config(args)
    model = load_model(args.checkpoint, dtype=np.float32)
    envs = {"seen": [ENV_SEEN], "novel": [ENV_NOVEL],
            "both": [ENV_SEEN, ENV_NOVEL]}[args.env]
    modes = {"naive": ["naive"], "ua": ["uncertainty-aware"],
             "both": ["naive", "uncertainty-aware"]}[args.planner]
    n_runs = cfg.get_int("eval.n_runs")
    seeds = [args.seed + i for i in range(n_runs)]

    def progress(done, total, row):
        print(f"[{done}/{total}] {row.env} {row.planner} seed {row.seed}: "
              f"{'collision' if row.collided else 'clear'} "
              f"at {row.flight_time_s:.1f} s", flush=True)

    rows = run_cells(cfg, model, envs, modes, seeds, jobs=args.jobs,
                     timing=args.timing == "wall", progress=progress)
    csv_text = rows_to_csv(rows)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(csv_text, encoding="utf-8")
    print(f"wrote {args.out}")
    print(summary_text(summarize(rows)))
    return 0


def cmd_plan_step(args) -> int:
    import math

    from .cpn import load_model
    from .depthfill import FilterConfig
    from .mpl import mpl_from_config
    from .planner import PlannerConfig, plan_step
    from .sim.camera import DepthImage
    from .sim.dynamics import Action, DynamicsParams, RobotState, step_dynamics
    from .uncertainty import PartialState

    cfg = _build_config(args)
    model = load_model(args.checkpoint, dtype=np.float32)
    depth = np.load(args.image)
    rows = cfg.get_int("sim.image_rows")
    cols = cfg.get_int("sim.image_cols")
    if depth.shape != (rows, cols):
        print(f"error: image shape {depth.shape} does not match configured "
              f"{(rows, cols)}", file=sys.stderr)
        return 2
    img = DepthImage(
        depth=depth.astype(np.float32), valid=depth > 0,
        fov_h=math.radians(cfg.get_float("sim.fov_h_deg")),
        fov_v=math.radians(cfg.get_float("sim.fov_v_deg")),
        max_range=cfg.get_float("sim.max_range"))

    est = PartialState(v=args.v, omega=args.omega,
                       var_v=cfg.get_float("uncertainty.sigma_v") ** 2,
                       var_omega=cfg.get_float("uncertainty.sigma_omega") ** 2)
    mpl = mpl_from_config(cfg)
    res = plan_step(img, est, args.yaw, args.goal, mpl, model,
                    FilterConfig.from_config(cfg), PlannerConfig.from_config(cfg),
                    mask_seed=args.seed)

    print("idx  v_ref  steer     cost  survivor  goal_cost")
    for k, seq in enumerate(mpl.sequences):
        mark = "*" if k == res.chosen else " "
        print(f"{k:3d}{mark} {seq.v_ref:5.2f} {seq.steer:+.3f} "
              f"{res.costs[k]:8.4f}  {str(bool(res.survivors[k])):<8} "
              f"{res.goal_costs[k]:.4f}")
    print(f"chosen index: {res.chosen}")
    t = res.timings
    print(f"timing ms: filter {t.filter_ms:.2f}  cnn {t.cnn_ms:.2f}  "
          f"combiner {t.combiner_ms:.2f}  prediction {t.prediction_ms:.2f}  "
          f"total {t.total_ms:.2f}")

    # rollout polylines from the estimated state, for visualization only
    dyn = DynamicsParams.from_config(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    poly_path = args.out / "primitives.csv"
    with open(poly_path, "w", encoding="utf-8") as f:
        f.write("primitive,step,x,y\n")
        for k, seq in enumerate(mpl.sequences):
            state = RobotState(x=0.0, y=0.0, yaw=args.yaw, v=args.v,
                               omega=args.omega)
            f.write(f"{k},0,{state.x:.4f},{state.y:.4f}\n")
            for step in range(mpl.horizon):
                state = step_dynamics(
                    state, Action(seq.v_ref, seq.steer), dyn,
                    plan_yaw=args.yaw)
                f.write(f"{k},{step + 1},{state.x:.4f},{state.y:.4f}\n")
    print(f"wrote {poly_path}")
    return 0


def cmd_replay(args) -> int:
    from .cpn import load_model
    from .episode import load_episode_log, replay_episode

    log = load_episode_log(args.log)
    model = load_model(args.checkpoint, dtype=np.float32)
    ok, message = replay_episode(log, model)
    print(f"replay of {args.log}: {message}")
    print(f"episode: seed {log.seed}, steps {len(log.steps)}, "
          f"collided {log.collided}, flight time {log.flight_time:.1f} s")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="primnav",
        description="depth-image navigation stack: simulator, collision "
                    "predictor training, and planner evaluation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-worlds", help="write seeded worlds to ORWD files")
    _add_common(p)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--env", choices=["seen", "novel"], default="seen")
    p.set_defaults(func=cmd_gen_worlds)

    p = sub.add_parser("collect", help="collect a labeled training dataset")
    _add_common(p)
    p.set_defaults(func=cmd_collect, out=Path("out/dataset.ords"))
    p.add_argument("--out-file", dest="out", type=Path,
                   default=Path("out/dataset.ords"))

    p = sub.add_parser("train", help="train the collision predictor")
    _add_common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.set_defaults(func=cmd_train, out=Path("out/cpn.ornn"))
    p.add_argument("--out-file", dest="out", type=Path,
                   default=Path("out/cpn.ornn"))

    p = sub.add_parser("eval", help="run evaluation experiment cells")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--env", choices=["seen", "novel", "both"], default="both")
    p.add_argument("--planner", choices=["naive", "ua", "both"],
                   default="both")
    p.add_argument("--timing", choices=["off", "wall"], default="off",
                   help="wall timing makes step_ms real but the CSV "
                        "non-reproducible")
    p.set_defaults(func=cmd_eval, out=Path("out/metrics.csv"))
    p.add_argument("--out-file", dest="out", type=Path,
                   default=Path("out/metrics.csv"))

    p = sub.add_parser("plan-step", help="debug one planning step")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--image", type=Path, required=True,
                   help=".npy depth array, 0 marks invalid pixels")
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--yaw", type=float, default=0.0)
    p.add_argument("--goal", type=float, default=0.0)
    p.set_defaults(func=cmd_plan_step)

    p = sub.add_parser("replay", help="re-run an episode log and verify it")
    _add_common(p)
    p.add_argument("--log", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
