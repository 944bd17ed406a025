"""Training-data collection, labeling, augmentation and persistence.

Collection drives the simulated robot with random constant
(speed, steering) sequences, snapshots a record at the start and then
every delta_th meters of path, and labels each record with the ground
truth of actually executing the scheduled future actions. Class balance
comes from resampling the never-executed tail actions of collision
records; every record is also mirrored left/right.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .angles import wrap_angle
from .config import Config, config_to_text
from .sim import (
    CameraConfig,
    DynamicsParams,
    RobotState,
    World,
    check_collision,
    render_depth,
)
from .sim.dynamics import Action, step_dynamics

_MAGIC = b"ORDS"
_VERSION = 1


class DatasetFormatError(ValueError):
    pass


@dataclass
class EpisodeRecord:
    """One training datum: raw depth image, state, future actions, labels."""

    depth: np.ndarray        # (H, W) f32, 0.0 marks invalid pixels
    valid: np.ndarray        # (H, W) bool
    v: float
    omega: float
    actions: np.ndarray      # (T, 2) f32 rows of (v_ref, steer)
    labels: np.ndarray       # (T,) u8, monotone non-decreasing
    episode_id: int

    def has_collision(self) -> bool:
        return bool(self.labels.any())


def fill_labels(k: int, horizon: int) -> np.ndarray:
    """Labels once a collision lands at step k (1-based): zeros before k,
    ones from k on."""
    if not 1 <= k <= horizon:
        raise ValueError(f"collision step {k} outside 1..{horizon}")
    labels = np.zeros(horizon, dtype=np.uint8)
    labels[k - 1:] = 1
    return labels


def augment_flip(rec: EpisodeRecord) -> EpisodeRecord:
    """Mirror a record left/right: image columns, yaw rate and steering
    flip sign; speeds and labels are unchanged. An involution."""
    actions = rec.actions.copy()
    actions[:, 1] = -actions[:, 1]
    return EpisodeRecord(
        depth=rec.depth[:, ::-1].copy(),
        valid=rec.valid[:, ::-1].copy(),
        v=rec.v,
        omega=-rec.omega,
        actions=actions,
        labels=rec.labels.copy(),
        episode_id=rec.episode_id,
    )


def augment_resample(rec: EpisodeRecord, n_aug: int,
                     rng: np.random.Generator, v_range: tuple[float, float],
                     steer_max: float) -> list[EpisodeRecord]:
    """Copies of a collision record with the never-executed tail actions
    replaced by fresh random draws; labels and the action prefix stay."""
    if not rec.has_collision():
        raise ValueError("resample augmentation needs a collision record")
    k = int(np.argmax(rec.labels)) + 1   # first collision step, 1-based
    horizon = rec.labels.shape[0]
    out = []
    for _ in range(n_aug):
        actions = rec.actions.copy()
        n_tail = horizon - k
        if n_tail > 0:
            actions[k:, 0] = rng.uniform(*v_range, size=n_tail)
            actions[k:, 1] = rng.uniform(-steer_max, steer_max, size=n_tail)
        out.append(EpisodeRecord(
            depth=rec.depth, valid=rec.valid, v=rec.v, omega=rec.omega,
            actions=actions.astype(np.float32), labels=rec.labels,
            episode_id=rec.episode_id,
        ))
    return out


@dataclass(frozen=True)
class CollectParams:
    horizon: int
    delta_th: float
    timeout: float
    v_range: tuple[float, float]
    steer_max: float
    spawn_clearance: float

    @classmethod
    def from_config(cls, cfg: Config, steer_max: float) -> "CollectParams":
        return cls(
            horizon=cfg.get_int("mpl.horizon"),
            delta_th=cfg.get_float("dataset.delta_th"),
            timeout=cfg.get_float("dataset.episode_timeout"),
            v_range=(cfg.get_float("dataset.v_min"),
                     cfg.get_float("dataset.v_max")),
            steer_max=steer_max,
            spawn_clearance=cfg.get_float("world.spawn_clearance"),
        )


def collect_episode(world: World, cam: CameraConfig, dyn: DynamicsParams,
                    params: CollectParams, robot_radius: float,
                    flight_height: float, seed: int,
                    episode_id: int) -> list[EpisodeRecord]:
    """Run one random-action episode and snapshot labeled records.

    The action schedule is drawn ahead of the trajectory (one constant
    sequence per horizon-length block), so a snapshot's future actions are
    known even past a collision or the timeout. Records store steering
    re-expressed relative to the snapshot yaw, clamped to the steering
    limit, so a stored sequence means the same thing it would mean coming
    from the planner.
    """
    rng = np.random.default_rng([seed, episode_id])
    horizon = params.horizon
    n_episode = int(round(params.timeout / dyn.dt))
    n_total = n_episode + horizon

    # schedule of per-step (v_ref, steer) plus the block index that ties
    # each step to the yaw its steering was anchored at
    n_blocks = -(-n_total // horizon)
    block_v = rng.uniform(*params.v_range, size=n_blocks)
    block_s = rng.uniform(-params.steer_max, params.steer_max, size=n_blocks)
    step_block = np.repeat(np.arange(n_blocks), horizon)[:n_total]

    jitter = rng.uniform(-0.5, 0.5, size=2) * params.spawn_clearance
    state = RobotState(x=float(jitter[0]), y=float(jitter[1]),
                       yaw=float(rng.uniform(-np.pi, np.pi)), v=0.0,
                       omega=0.0)

    states = [state]
    anchors = np.empty(n_total)
    cum_path = [0.0]
    collided_at = None   # state index of the first collision
    prev_block = -1
    anchor_yaw = state.yaw
    for t in range(n_total):
        if step_block[t] != prev_block:
            anchor_yaw = states[t].yaw
            prev_block = step_block[t]
        anchors[t] = anchor_yaw
        action = Action(v_ref=float(block_v[step_block[t]]),
                        steer=float(block_s[step_block[t]]))
        new_state = step_dynamics(states[t], action, dyn, plan_yaw=anchor_yaw)
        states.append(new_state)
        cum_path.append(cum_path[-1] + float(np.hypot(
            new_state.x - states[t].x, new_state.y - states[t].y)))
        if check_collision(world, new_state, robot_radius, flight_height):
            collided_at = t + 1
            break

    n_exec = len(states) - 1   # steps with a defined steering anchor
    records = []
    last_snap_path = -np.inf
    for t in range(min(n_episode, len(states))):
        if collided_at is not None and t >= collided_at:
            break
        if cum_path[t] - last_snap_path <= params.delta_th and t != 0:
            continue
        last_snap_path = cum_path[t]

        yaw_t = states[t].yaw
        actions = np.empty((horizon, 2), dtype=np.float32)
        for i in range(horizon):
            blk = step_block[t + i]
            # scheduled steps past a collision were never anchored; keep
            # their raw draw (labels are all-ones there anyway)
            rel = wrap_angle(anchors[t + i] + block_s[blk] - yaw_t) \
                if t + i < n_exec else block_s[blk]
            actions[i, 0] = block_v[blk]
            actions[i, 1] = np.clip(rel, -params.steer_max, params.steer_max)

        if collided_at is not None and collided_at - t <= horizon:
            labels = fill_labels(collided_at - t, horizon)
        else:
            labels = np.zeros(horizon, dtype=np.uint8)

        img = render_depth(world, states[t], cam,
                           np.random.default_rng([seed, episode_id, t]))
        records.append(EpisodeRecord(
            depth=img.depth, valid=img.valid,
            v=float(np.float32(states[t].v)),
            omega=float(np.float32(states[t].omega)),
            actions=actions, labels=labels, episode_id=episode_id,
        ))
    return records


def balance_records(records: list[EpisodeRecord], rng: np.random.Generator,
                    v_range: tuple[float, float], steer_max: float,
                    tol: float = 0.1) -> list[EpisodeRecord]:
    """Bring collision / non-collision record counts within tol of equal.

    The usual case (fewer collision records) adds resampled-tail copies of
    collision records; the rare opposite case subsamples the collision
    side.
    """
    pos = [r for r in records if r.has_collision()]
    neg = [r for r in records if not r.has_collision()]
    if not pos or not neg:
        return list(records)
    if len(pos) < len(neg):
        need = len(neg) - len(pos)
        extra: list[EpisodeRecord] = []
        base, rem = divmod(need, len(pos))
        for i, rec in enumerate(pos):
            n_aug = base + (1 if i < rem else 0)
            if n_aug:
                extra.extend(augment_resample(rec, n_aug, rng, v_range,
                                              steer_max))
        out = records + extra
    else:
        keep = rng.permutation(len(pos))[:len(neg)]
        out = neg + [pos[i] for i in sorted(keep)]
    n_pos = sum(1 for r in out if r.has_collision())
    n_neg = len(out) - n_pos
    assert n_neg > 0 and (1 - tol) <= n_pos / n_neg <= (1 + tol)
    return out


def class_ratio(records_or_dataset) -> float:
    """Collision count over non-collision count."""
    if isinstance(records_or_dataset, Dataset):
        has = records_or_dataset.labels.any(axis=1)
    else:
        has = np.array([r.has_collision() for r in records_or_dataset])
    n_pos = int(has.sum())
    n_neg = int(len(has) - n_pos)
    if n_neg == 0:
        return np.inf
    return n_pos / n_neg


# ---------- dataset container and the ORDS file format ----------

@dataclass
class Dataset:
    depth: np.ndarray         # (N, H, W) f32
    valid: np.ndarray         # (N, H, W) bool
    states: np.ndarray        # (N, 2) f32
    actions: np.ndarray       # (N, T, 2) f32
    labels: np.ndarray        # (N, T) u8
    episode_ids: np.ndarray   # (N,) u32
    config_hash: bytes = b"\x00" * 8

    def __len__(self) -> int:
        return self.depth.shape[0]

    @property
    def horizon(self) -> int:
        return self.labels.shape[1]

    def record(self, i: int) -> EpisodeRecord:
        return EpisodeRecord(
            depth=self.depth[i], valid=self.valid[i],
            v=float(self.states[i, 0]), omega=float(self.states[i, 1]),
            actions=self.actions[i], labels=self.labels[i],
            episode_id=int(self.episode_ids[i]),
        )

    @classmethod
    def from_records(cls, records: list[EpisodeRecord],
                     config_hash: bytes = b"\x00" * 8) -> "Dataset":
        if not records:
            raise ValueError("cannot build a dataset from zero records")
        return cls(
            depth=np.stack([r.depth for r in records]).astype(np.float32),
            valid=np.stack([r.valid for r in records]),
            states=np.array([[r.v, r.omega] for r in records],
                            dtype=np.float32),
            actions=np.stack([r.actions for r in records]).astype(np.float32),
            labels=np.stack([r.labels for r in records]).astype(np.uint8),
            episode_ids=np.array([r.episode_id for r in records],
                                 dtype=np.uint32),
            config_hash=config_hash,
        )

    def checksum(self) -> str:
        h = hashlib.sha256()
        for arr in (self.depth, self.valid.astype(np.uint8), self.states,
                    self.actions, self.labels, self.episode_ids):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def config_fingerprint(cfg: Config) -> bytes:
    return hashlib.sha256(config_to_text(cfg).encode()).digest()[:8]


def save_dataset(ds: Dataset, path: str | Path) -> None:
    rows, cols = ds.depth.shape[1:]
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<H", _VERSION))
        f.write(struct.pack("<HHH", rows, cols, ds.horizon))
        f.write(struct.pack("<I", len(ds)))
        f.write(ds.config_hash)
        f.write(np.ascontiguousarray(ds.depth, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(ds.valid.astype(np.uint8)).tobytes())
        f.write(np.ascontiguousarray(ds.states, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(ds.actions, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(ds.labels, dtype=np.uint8).tobytes())
        f.write(np.ascontiguousarray(ds.episode_ids, dtype="<u4").tobytes())


def load_dataset(path: str | Path) -> Dataset:
    data = Path(path).read_bytes()
    header_fmt = "<4sHHHHI8s"
    header_size = struct.calcsize(header_fmt)
    if len(data) < header_size:
        raise DatasetFormatError("truncated dataset header")
    magic, version, rows, cols, horizon, count, config_hash = \
        struct.unpack_from(header_fmt, data, 0)
    if magic != _MAGIC:
        raise DatasetFormatError("bad magic, not an ORDS dataset")
    if version != _VERSION:
        raise DatasetFormatError(f"unsupported dataset version {version}")

    sizes = [
        ("depth", "<f4", (count, rows, cols)),
        ("valid", "u1", (count, rows, cols)),
        ("states", "<f4", (count, 2)),
        ("actions", "<f4", (count, horizon, 2)),
        ("labels", "u1", (count, horizon)),
        ("episode_ids", "<u4", (count,)),
    ]
    expected = header_size + sum(
        int(np.prod(shape)) * np.dtype(dt).itemsize for _, dt, shape in sizes)
    if len(data) != expected:
        raise DatasetFormatError(
            f"dataset payload is {len(data)} bytes, expected {expected}")

    pos = header_size
    arrays = {}
    for name, dt, shape in sizes:
        nbytes = int(np.prod(shape)) * np.dtype(dt).itemsize
        arrays[name] = np.frombuffer(
            data, dtype=dt, count=int(np.prod(shape)), offset=pos
        ).reshape(shape).copy()
        pos += nbytes

    return Dataset(
        depth=arrays["depth"], valid=arrays["valid"].astype(bool),
        states=arrays["states"], actions=arrays["actions"],
        labels=arrays["labels"],
        episode_ids=arrays["episode_ids"], config_hash=config_hash,
    )


# ---------- full pipeline ----------

def _episode_task(args):
    cfg_values, seed, episode_id = args
    cfg = Config(cfg_values)
    return _collect_one(cfg, seed, episode_id)


def _collect_one(cfg: Config, seed: int, episode_id: int
                 ) -> list[EpisodeRecord]:
    from .mpl import mpl_from_config
    from .sim.world import WorldGenConfig, generate_world

    gen_cfg = WorldGenConfig.from_config(cfg)
    world_seed = int(np.random.SeedSequence(
        [seed, episode_id, 101]).generate_state(1)[0])
    world = generate_world(gen_cfg, world_seed)
    cam = CameraConfig.from_config(cfg)
    dyn = DynamicsParams.from_config(cfg)
    steer_max = mpl_from_config(cfg).steers().max()
    params = CollectParams.from_config(cfg, steer_max=float(steer_max))
    return collect_episode(
        world, cam, dyn, params,
        robot_radius=cfg.get_float("sim.robot_radius"),
        flight_height=cfg.get_float("sim.flight_height"),
        seed=seed, episode_id=episode_id)


def collect(cfg: Config, seed: int, target_base_estimate: int | None = None,
            jobs: int = 1, progress=None) -> list[EpisodeRecord]:
    """Collect base records across seeded episodes until the post-pipeline
    size estimate (balance then flip) reaches dataset.target_records."""
    target = cfg.get_int("dataset.target_records") \
        if target_base_estimate is None else target_base_estimate
    records: list[EpisodeRecord] = []
    n_pos = n_neg = 0
    episode_id = 0
    batch = max(jobs, 4)
    while 2 * (n_neg + max(n_pos, n_neg)) < target or not records:
        tasks = [(cfg.as_dict(), seed, episode_id + i) for i in range(batch)]
        if jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_episode_task, tasks))
        else:
            results = [_episode_task(t) for t in tasks]
        for recs in results:
            records.extend(recs)
        episode_id += batch
        n_pos = sum(1 for r in records if r.has_collision())
        n_neg = len(records) - n_pos
        if progress is not None:
            progress(episode_id, len(records), n_pos, n_neg)
        if episode_id > 100000:
            raise RuntimeError("data collection is not converging")
    return records


def build_dataset(cfg: Config, seed: int, jobs: int = 1,
                  progress=None) -> Dataset:
    """collect -> balance -> mirror, then pack into a Dataset."""
    from .mpl import mpl_from_config

    records = collect(cfg, seed, jobs=jobs, progress=progress)
    rng = np.random.default_rng([seed, 2024])
    steer_max = float(mpl_from_config(cfg).steers().max())
    v_range = (cfg.get_float("dataset.v_min"), cfg.get_float("dataset.v_max"))
    balanced = balance_records(records, rng, v_range, steer_max,
                               tol=cfg.get_float("dataset.balance_tol"))
    mirrored = balanced + [augment_flip(r) for r in balanced]
    return Dataset.from_records(mirrored, config_hash=config_fingerprint(cfg))
