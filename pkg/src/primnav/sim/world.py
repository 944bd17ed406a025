"""Procedural 2.5-D obstacle worlds and their binary serialization."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import BoxPart, CylinderPart, Part

KIND_BOX = "box"
KIND_CYLINDER = "cylinder"
KIND_WALL_WITH_HOLE = "wall-with-hole"

_KIND_CODES = {KIND_BOX: 0, KIND_CYLINDER: 1, KIND_WALL_WITH_HOLE: 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

_MAGIC = b"ORWD"
_VERSION = 1

BOUNDARY_WALL_HEIGHT = 3.0
BOUNDARY_WALL_THICKNESS = 0.2


class GenerationError(RuntimeError):
    pass


class WorldFormatError(ValueError):
    pass


def _f32(x: float) -> float:
    # all world geometry is stored in f32; rounding at construction time
    # makes the serialized form bit-exact against the in-memory one
    return float(np.float32(x))


@dataclass(frozen=True)
class Obstacle:
    """One obstacle footprint with a height.

    dims by kind: box -> (length_x, length_y); cylinder -> (radius,);
    wall-with-hole -> (length, thickness). The hole (u0, u1, z0, z1) lives
    in the wall face: u along the wall axis measured from the center, z up
    from the ground; it must sit strictly inside the face.
    """

    kind: str
    x: float
    y: float
    yaw: float
    dims: tuple[float, ...]
    height: float
    hole: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown obstacle kind {self.kind!r}")
        if any(d <= 0 for d in self.dims) or self.height <= 0:
            raise ValueError("obstacle dims and height must be positive")
        if self.kind == KIND_WALL_WITH_HOLE:
            if self.hole is None:
                raise ValueError("wall-with-hole requires a hole")
            u0, u1, z0, z1 = self.hole
            half = self.dims[0] / 2.0
            if not (-half < u0 < u1 < half):
                raise ValueError("hole must sit strictly inside the wall length")
            if not (0.0 < z0 < z1 < self.height):
                raise ValueError("hole must sit strictly inside the wall height")
        elif self.hole is not None:
            raise ValueError(f"{self.kind} cannot carry a hole")

    def parts(self) -> list[Part]:
        if self.kind == KIND_CYLINDER:
            return [CylinderPart(self.x, self.y, self.dims[0], 0.0, self.height)]
        if self.kind == KIND_BOX:
            hx, hy = self.dims[0] / 2.0, self.dims[1] / 2.0
            return [BoxPart(self.x, self.y, self.yaw, hx, hy, 0.0, self.height)]
        # wall with a rectangular aperture: four solid slabs around the hole
        length, thickness = self.dims
        u0, u1, z0, z1 = self.hole
        half = length / 2.0
        ht = thickness / 2.0
        c, s = math.cos(self.yaw), math.sin(self.yaw)

        def slab(ua, ub, za, zb):
            cu = 0.5 * (ua + ub)
            return BoxPart(self.x + cu * c, self.y + cu * s, self.yaw,
                           0.5 * (ub - ua), ht, za, zb)

        return [
            slab(-half, u0, 0.0, self.height),       # left of hole
            slab(u1, half, 0.0, self.height),        # right of hole
            slab(u0, u1, 0.0, z0),                   # below hole
            slab(u0, u1, z1, self.height),           # above hole
        ]

    def bounding_radius(self) -> float:
        if self.kind == KIND_CYLINDER:
            return self.dims[0]
        if self.kind == KIND_BOX:
            return math.hypot(self.dims[0], self.dims[1]) / 2.0
        return math.hypot(self.dims[0], self.dims[1]) / 2.0


@dataclass(frozen=True)
class World:
    """Axis-aligned arena with obstacles; (config, seed) fully determine it."""

    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    obstacles: tuple[Obstacle, ...]
    seed: int

    def obstacle_parts(self) -> list[Part]:
        parts: list[Part] = []
        for obs in self.obstacles:
            parts.extend(obs.parts())
        return parts

    def boundary_parts(self) -> list[Part]:
        """Four tall walls sitting just outside the bounds rectangle."""
        xmin, ymin, xmax, ymax = self.bounds
        t = BOUNDARY_WALL_THICKNESS
        h = BOUNDARY_WALL_HEIGHT
        cx = 0.5 * (xmin + xmax)
        cy = 0.5 * (ymin + ymax)
        hx = 0.5 * (xmax - xmin) + t
        hy = 0.5 * (ymax - ymin) + t
        return [
            BoxPart(xmin - t / 2, cy, 0.0, t / 2, hy, 0.0, h),
            BoxPart(xmax + t / 2, cy, 0.0, t / 2, hy, 0.0, h),
            BoxPart(cx, ymin - t / 2, 0.0, hx, t / 2, 0.0, h),
            BoxPart(cx, ymax + t / 2, 0.0, hx, t / 2, 0.0, h),
        ]

    def all_parts(self) -> list[Part]:
        return self.obstacle_parts() + self.boundary_parts()


@dataclass(frozen=True)
class WorldGenConfig:
    """Sampling ranges for procedural worlds.

    density is obstacles per square meter; the obstacle count is the
    rounded density * area. kind_weights orders (box, cylinder,
    wall-with-hole).
    """

    size_x: float = 20.0
    size_y: float = 20.0
    density: float = 0.06
    adversarial_holes: bool = True
    hole_margin: float = 1.2
    spawn_clearance: float = 1.5
    robot_diameter: float = 0.5
    flight_height: float = 1.0
    kind_weights: tuple[float, float, float] = (0.45, 0.35, 0.2)
    box_side: tuple[float, float] = (0.4, 1.6)
    cyl_radius: tuple[float, float] = (0.15, 0.5)
    wall_length: tuple[float, float] = (1.5, 4.0)
    wall_thickness: float = 0.15
    obstacle_height: tuple[float, float] = (0.6, 2.5)
    wall_height: float = 2.5
    max_tries: int = 200

    def __post_init__(self):
        if self.density < 0:
            raise ValueError("density must be >= 0")
        for lo, hi in (self.box_side, self.cyl_radius, self.wall_length,
                       self.obstacle_height):
            if not (0 < lo <= hi):
                raise ValueError("dimension ranges must be positive and ordered")

    @classmethod
    def from_config(cls, cfg) -> "WorldGenConfig":
        return cls(
            size_x=cfg.get_float("world.size_x"),
            size_y=cfg.get_float("world.size_y"),
            density=cfg.get_float("world.density"),
            adversarial_holes=cfg.get_bool("world.adversarial_holes"),
            hole_margin=cfg.get_float("world.hole_margin"),
            spawn_clearance=cfg.get_float("world.spawn_clearance"),
            robot_diameter=2.0 * cfg.get_float("sim.robot_radius"),
            flight_height=cfg.get_float("sim.flight_height"),
        )


def _sample_hole(rng: np.random.Generator, length: float, wall_height: float,
                 robot_diameter: float, hole_margin: float):
    # apertures that barely fit the robot, or do not fit it at all
    width = rng.uniform(0.6, hole_margin) * robot_diameter
    width = min(width, 0.8 * length)
    half = length / 2.0
    u_center = rng.uniform(-half + width, half - width) if length > 2 * width \
        else 0.0
    z0 = rng.uniform(0.15, 0.5)
    z1 = min(z0 + rng.uniform(0.9, 1.6), wall_height - 0.1)
    return (u_center - width / 2.0, u_center + width / 2.0, z0, z1)


def _sample_obstacle(rng: np.random.Generator, cfg: WorldGenConfig,
                     kind: str) -> tuple[tuple[float, ...], float,
                                         tuple | None]:
    height = rng.uniform(*cfg.obstacle_height)
    if kind == KIND_BOX:
        dims = (rng.uniform(*cfg.box_side), rng.uniform(*cfg.box_side))
        return dims, height, None
    if kind == KIND_CYLINDER:
        return (rng.uniform(*cfg.cyl_radius),), height, None
    length = rng.uniform(*cfg.wall_length)
    hole = _sample_hole(rng, length, cfg.wall_height, cfg.robot_diameter,
                        cfg.hole_margin)
    return (length, cfg.wall_thickness), cfg.wall_height, hole


def generate_world(cfg: WorldGenConfig, seed: int) -> World:
    """Deterministic world for a given (config, seed).

    The spawn region (arena center, radius spawn_clearance) is kept
    obstacle-free, obstacles stay inside the bounds, and when
    adversarial_holes is on (and any obstacles exist at all) at least one
    wall-with-hole is present.
    """
    rng = np.random.default_rng(seed)
    xmin, ymin = -cfg.size_x / 2.0, -cfg.size_y / 2.0
    xmax, ymax = cfg.size_x / 2.0, cfg.size_y / 2.0
    bounds = (_f32(xmin), _f32(ymin), _f32(xmax), _f32(ymax))

    count = int(round(cfg.density * cfg.size_x * cfg.size_y))
    weights = np.asarray(cfg.kind_weights, dtype=float)
    weights = weights / weights.sum()
    kinds = list(rng.choice(
        [KIND_BOX, KIND_CYLINDER, KIND_WALL_WITH_HOLE], size=count, p=weights))
    if cfg.adversarial_holes and count >= 1 \
            and KIND_WALL_WITH_HOLE not in kinds:
        kinds[int(rng.integers(count))] = KIND_WALL_WITH_HOLE

    obstacles = []
    for kind in kinds:
        dims, height, hole = _sample_obstacle(rng, cfg, kind)
        placed = False
        for _ in range(cfg.max_tries):
            x = rng.uniform(xmin, xmax)
            y = rng.uniform(ymin, ymax)
            yaw = rng.uniform(-math.pi, math.pi)
            obs = Obstacle(
                kind=kind,
                x=_f32(x), y=_f32(y), yaw=_f32(yaw),
                dims=tuple(_f32(d) for d in dims),
                height=_f32(height),
                hole=None if hole is None else tuple(_f32(v) for v in hole),
            )
            r = obs.bounding_radius()
            if not (xmin + r <= x <= xmax - r and ymin + r <= y <= ymax - r):
                continue
            if math.hypot(x, y) < cfg.spawn_clearance + r:
                continue
            obstacles.append(obs)
            placed = True
            break
        if not placed:
            raise GenerationError(
                f"could not place a {kind} inside bounds with spawn clearance "
                f"{cfg.spawn_clearance} m after {cfg.max_tries} tries")

    return World(bounds=bounds, obstacles=tuple(obstacles), seed=int(seed))


# ---------- serialization (magic ORWD, version u16, little-endian) ----------

def save_world(world: World, path: str | Path) -> None:
    Path(path).write_bytes(world_to_bytes(world))


def world_to_bytes(world: World) -> bytes:
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<H", _VERSION)
    out += struct.pack("<4f", *world.bounds)
    out += struct.pack("<Q", world.seed)
    out += struct.pack("<I", len(world.obstacles))
    for obs in world.obstacles:
        out += struct.pack("<B", _KIND_CODES[obs.kind])
        out += struct.pack("<3f", obs.x, obs.y, obs.yaw)
        out += struct.pack("<B", len(obs.dims))
        out += struct.pack(f"<{len(obs.dims)}f", *obs.dims)
        out += struct.pack("<f", obs.height)
        if obs.hole is None:
            out += struct.pack("<B", 0)
        else:
            out += struct.pack("<B", 1)
            out += struct.pack("<4f", *obs.hole)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise WorldFormatError(f"truncated {self.what}")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals


def world_from_bytes(data: bytes) -> World:
    rd = _Reader(data, "world file")
    if bytes(rd.take("<4s")[0]) != _MAGIC:
        raise WorldFormatError("bad magic, not an ORWD world file")
    (version,) = rd.take("<H")
    if version != _VERSION:
        raise WorldFormatError(f"unsupported world version {version}")
    bounds = rd.take("<4f")
    (seed,) = rd.take("<Q")
    (count,) = rd.take("<I")
    obstacles = []
    for _ in range(count):
        (code,) = rd.take("<B")
        if code not in _KIND_NAMES:
            raise WorldFormatError(f"unknown obstacle kind code {code}")
        x, y, yaw = rd.take("<3f")
        (ndims,) = rd.take("<B")
        dims = rd.take(f"<{ndims}f")
        (height,) = rd.take("<f")
        (has_hole,) = rd.take("<B")
        hole = rd.take("<4f") if has_hole else None
        obstacles.append(Obstacle(
            kind=_KIND_NAMES[code], x=x, y=y, yaw=yaw, dims=tuple(dims),
            height=height, hole=None if hole is None else tuple(hole)))
    if rd.pos != len(data):
        raise WorldFormatError("trailing bytes after world payload")
    return World(bounds=tuple(bounds), obstacles=tuple(obstacles), seed=seed)


def load_world(path: str | Path) -> World:
    return world_from_bytes(Path(path).read_bytes())
