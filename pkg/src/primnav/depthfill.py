"""Morphological completion of invalid depth-image regions.

Iterated masked min-dilation: each pass turns every invalid pixel with at
least one valid pixel inside the kernel window into the minimum (or
maximum, if configured) of those neighbors. Min-fill is the conservative
default: gaps inherit the nearest surface rather than free space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .sim.camera import DepthImage

FILL_MIN = "nearest-valid-min"
FILL_MAX = "nearest-valid-max"


@dataclass(frozen=True)
class FilterConfig:
    kernel_radius: int = 1
    passes: int = 3
    fill_order: str = FILL_MIN

    def __post_init__(self):
        if self.kernel_radius < 1 or self.passes < 1:
            raise ValueError("kernel_radius and passes must be >= 1")
        if self.fill_order not in (FILL_MIN, FILL_MAX):
            raise ValueError(f"unknown fill order {self.fill_order!r}")

    @classmethod
    def from_config(cls, cfg) -> "FilterConfig":
        return cls(
            kernel_radius=cfg.get_int("filter.kernel_radius"),
            passes=cfg.get_int("filter.passes"),
            fill_order=cfg.get_str("filter.fill_order"),
        )


class FillResult(NamedTuple):
    image: DepthImage
    no_valid_support: bool


def fill_depth(img: DepthImage, cfg: FilterConfig) -> FillResult:
    """Fill invalid pixels from valid neighbors; valid pixels never change.

    A fully-invalid image cannot be filled and is returned unchanged with
    no_valid_support set.
    """
    if not img.valid.any():
        return FillResult(img.copy(), True)

    depth = img.depth.astype(np.float32).copy()
    valid = img.valid.copy()
    size = 2 * cfg.kernel_radius + 1
    minimize = cfg.fill_order == FILL_MIN
    sentinel = np.inf if minimize else -np.inf
    filt = ndimage.minimum_filter if minimize else ndimage.maximum_filter

    for _ in range(cfg.passes):
        if valid.all():
            break
        work = np.where(valid, depth, sentinel)
        dilated = filt(work, size=size, mode="constant", cval=sentinel)
        newly = ~valid & np.isfinite(dilated)
        depth[newly] = dilated[newly]
        valid |= newly

    depth[~valid] = 0.0
    out = DepthImage(depth=depth, valid=valid, fov_h=img.fov_h,
                     fov_v=img.fov_v, max_range=img.max_range)
    return FillResult(out, False)
