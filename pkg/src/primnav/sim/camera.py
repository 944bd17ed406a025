"""Pinhole depth-camera rendering against world parts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dynamics import RobotState
from .geometry import ray_hits
from .world import World

INVALID_DEPTH = 0.0


@dataclass(frozen=True)
class CameraConfig:
    rows: int = 24
    cols: int = 32
    fov_h: float = math.radians(87.0)
    fov_v: float = math.radians(58.0)
    max_range: float = 5.0
    height: float = 1.0          # camera height above ground
    p_holes: float = 0.1         # chance of injecting invalid blobs per frame

    def __post_init__(self):
        if not (0 < self.fov_h < math.pi and 0 < self.fov_v < math.pi):
            raise ValueError("FOVs must lie in (0, pi)")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("image must have at least one pixel")

    @classmethod
    def from_config(cls, cfg) -> "CameraConfig":
        return cls(
            rows=cfg.get_int("sim.image_rows"),
            cols=cfg.get_int("sim.image_cols"),
            fov_h=math.radians(cfg.get_float("sim.fov_h_deg")),
            fov_v=math.radians(cfg.get_float("sim.fov_v_deg")),
            max_range=cfg.get_float("sim.max_range"),
            height=cfg.get_float("sim.flight_height"),
            p_holes=cfg.get_float("sim.p_holes"),
        )


@dataclass
class DepthImage:
    """Range image in meters; invalid pixels hold the 0.0 sentinel."""

    depth: np.ndarray            # (rows, cols) f32
    valid: np.ndarray            # (rows, cols) bool
    fov_h: float
    fov_v: float
    max_range: float

    @property
    def rows(self) -> int:
        return self.depth.shape[0]

    @property
    def cols(self) -> int:
        return self.depth.shape[1]

    def copy(self) -> "DepthImage":
        return DepthImage(self.depth.copy(), self.valid.copy(),
                          self.fov_h, self.fov_v, self.max_range)

    def flipped(self) -> "DepthImage":
        return DepthImage(self.depth[:, ::-1].copy(),
                          self.valid[:, ::-1].copy(),
                          self.fov_h, self.fov_v, self.max_range)


@lru_cache(maxsize=8)
def _camera_rays(rows: int, cols: int, fov_h: float, fov_v: float):
    """Unit ray directions in the camera frame (x forward, y left, z up)."""
    tan_h = math.tan(fov_h / 2.0)
    tan_v = math.tan(fov_v / 2.0)
    ys = (cols / 2.0 - (np.arange(cols) + 0.5)) * (tan_h / (cols / 2.0))
    zs = (rows / 2.0 - (np.arange(rows) + 0.5)) * (tan_v / (rows / 2.0))
    yy, zz = np.meshgrid(ys, zs)
    dirs = np.stack([np.ones_like(yy), yy, zz], axis=-1).reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs.setflags(write=False)
    return dirs


def _inject_blobs(valid: np.ndarray, rng: np.random.Generator,
                  p_holes: float) -> None:
    # contiguous invalid rectangles mimicking reflective-surface gaps
    if rng.random() >= p_holes:
        return
    rows, cols = valid.shape
    for _ in range(int(rng.integers(1, 4))):
        h = int(rng.integers(1, max(2, rows // 3)))
        w = int(rng.integers(1, max(2, cols // 3)))
        r0 = int(rng.integers(0, rows - h + 1))
        c0 = int(rng.integers(0, cols - w + 1))
        valid[r0:r0 + h, c0:c0 + w] = False


def render_depth(world: World, state: RobotState, cam: CameraConfig,
                 rng: np.random.Generator | None = None) -> DepthImage:
    """Cast one ray per pixel from the robot pose.

    Depth is the Euclidean distance to the nearest surface along the ray;
    pixels with no hit within max_range are invalid. When rng is given,
    synthetic invalid blobs are injected with probability p_holes.
    """
    dirs_cam = _camera_rays(cam.rows, cam.cols, cam.fov_h, cam.fov_v)
    c, s = math.cos(state.yaw), math.sin(state.yaw)
    dirs = np.empty_like(dirs_cam)
    dirs[:, 0] = c * dirs_cam[:, 0] - s * dirs_cam[:, 1]
    dirs[:, 1] = s * dirs_cam[:, 0] + c * dirs_cam[:, 1]
    dirs[:, 2] = dirs_cam[:, 2]
    origin = np.array([state.x, state.y, cam.height])

    t_min = np.full(dirs.shape[0], np.inf)
    for part in world.all_parts():
        t_min = np.minimum(t_min, ray_hits(part, origin, dirs))

    valid = np.isfinite(t_min) & (t_min <= cam.max_range)
    if rng is not None and cam.p_holes > 0.0:
        valid = valid.reshape(cam.rows, cam.cols)
        _inject_blobs(valid, rng, cam.p_holes)
        valid = valid.reshape(-1)

    depth = np.where(valid, t_min, INVALID_DEPTH).astype(np.float32)
    return DepthImage(
        depth=depth.reshape(cam.rows, cam.cols),
        valid=valid.reshape(cam.rows, cam.cols).copy(),
        fov_h=cam.fov_h, fov_v=cam.fov_v, max_range=cam.max_range,
    )
