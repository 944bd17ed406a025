"""Ray casting and distance kernels over obstacle parts.

Every obstacle decomposes into vertical-axis parts: oriented boxes and
cylinders. The depth renderer intersects rays with parts and the
collision checker measures planar distance to the same parts, so the two
views of the world can never disagree about geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_EPS = 1e-9


@dataclass(frozen=True)
class BoxPart:
    """Oriented box: center (cx, cy), yaw, half-extents (hx, hy), z-range."""

    cx: float
    cy: float
    yaw: float
    hx: float
    hy: float
    z0: float
    z1: float


@dataclass(frozen=True)
class CylinderPart:
    """Vertical cylinder: center (cx, cy), radius, z-range."""

    cx: float
    cy: float
    radius: float
    z0: float
    z1: float


Part = BoxPart | CylinderPart


def ray_hits(part: Part, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """First-hit distances along unit rays, +inf where the part is missed.

    origin is (3,), dirs is (N, 3) with unit rows. Rays starting inside a
    part report no hit (the surface behind the origin is not a surface in
    front of the camera).
    """
    if isinstance(part, BoxPart):
        return _ray_box(part, origin, dirs)
    return _ray_cylinder(part, origin, dirs)


def _ray_box(box: BoxPart, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    ox = origin[0] - box.cx
    oy = origin[1] - box.cy
    # rotate into the box frame (by -yaw)
    lox = c * ox + s * oy
    loy = -s * ox + c * oy
    loz = origin[2]
    ldx = c * dirs[:, 0] + s * dirs[:, 1]
    ldy = -s * dirs[:, 0] + c * dirs[:, 1]
    ldz = dirs[:, 2]

    t_near = np.full(dirs.shape[0], -np.inf)
    t_far = np.full(dirs.shape[0], np.inf)
    for o, d, lo, hi in (
        (lox, ldx, -box.hx, box.hx),
        (loy, ldy, -box.hy, box.hy),
        (loz, ldz, box.z0, box.z1),
    ):
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = (lo - o) / d
            t1 = (hi - o) / d
        parallel = np.abs(d) < _EPS
        t_lo = np.where(parallel, -np.inf, np.minimum(t0, t1))
        t_hi = np.where(parallel, np.inf, np.maximum(t0, t1))
        outside = parallel & ((o < lo) | (o > hi))
        t_lo = np.where(outside, np.inf, t_lo)
        t_hi = np.where(outside, -np.inf, t_hi)
        t_near = np.maximum(t_near, t_lo)
        t_far = np.minimum(t_far, t_hi)

    hit = (t_near <= t_far) & (t_near > _EPS)
    return np.where(hit, t_near, np.inf)


def _ray_cylinder(cyl: CylinderPart, origin: np.ndarray,
                  dirs: np.ndarray) -> np.ndarray:
    ox = origin[0] - cyl.cx
    oy = origin[1] - cyl.cy
    oz = origin[2]
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]

    best = np.full(dirs.shape[0], np.inf)

    # lateral surface
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    cc = ox * ox + oy * oy - cyl.radius * cyl.radius
    disc = b * b - 4.0 * a * cc
    ok = (disc >= 0.0) & (a > _EPS)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        for sign in (-1.0, 1.0):
            t = (-b + sign * sq) / (2.0 * a)
            z = oz + t * dz
            cand = ok & (t > _EPS) & (z >= cyl.z0) & (z <= cyl.z1)
            best = np.where(cand & (t < best), t, best)

    # end caps
    for z_cap in (cyl.z0, cyl.z1):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (z_cap - oz) / dz
        px = ox + t * dx
        py = oy + t * dy
        cand = (np.abs(dz) > _EPS) & (t > _EPS) \
            & (px * px + py * py <= cyl.radius * cyl.radius)
        best = np.where(cand & (t < best), t, best)

    return best


def disc_distance(part: Part, px: float, py: float, z: float) -> float:
    """Planar distance from point (px, py) to the part footprint at height z.

    Returns +inf when the part's z-range does not contain z; 0 inside the
    footprint.
    """
    if not (part.z0 <= z <= part.z1):
        return np.inf
    if isinstance(part, CylinderPart):
        return max(math.hypot(px - part.cx, py - part.cy) - part.radius, 0.0)
    c, s = math.cos(part.yaw), math.sin(part.yaw)
    ox = px - part.cx
    oy = py - part.cy
    lx = c * ox + s * oy
    ly = -s * ox + c * oy
    ex = max(abs(lx) - part.hx, 0.0)
    ey = max(abs(ly) - part.hy, 0.0)
    return math.hypot(ex, ey)
