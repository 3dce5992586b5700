"""Shared raster conventions and the four-channel world-model frame.

Rasters are plain numpy arrays, row-major, origin top-left:

  depth map    float64 H x W, meters, all finite and >= 0; exactly 0.0
               means "no value".
  binary mask  uint8 H x W with values in {0, 1}.
  prob map     float64 H x W with values in [0, 1]. A binary mask is a
               valid prob map.

The helpers below validate and normalize dtypes; operations assume their
inputs already satisfy these conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_depth_map(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"depth map must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("depth map contains non-finite values")
    if np.any(arr < 0):
        raise ValueError("depth map contains negative values")
    return arr


def as_binary_mask(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    return arr.astype(np.uint8)


def as_prob_map(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"probability map must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("probability map contains non-finite values")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("probability values must lie in [0, 1]")
    return arr


def is_binary(values: np.ndarray) -> bool:
    return bool(np.isin(values, (0, 1)).all())


@dataclass(frozen=True, eq=False)
class FootprintFrame:
    """The four-channel world model for one image.

    visible_ground  prob map (or binary mask) of visible traversable surface
    visible_depth   depth map of the nearest visible surface
    hidden_ground   prob map (or binary mask): the ray meets walkable floor
                    anywhere along it, occluded or not
    hidden_depth    depth to that (visible or hidden) floor point; 0 where
                    hidden_ground is off
    """

    visible_ground: np.ndarray
    visible_depth: np.ndarray
    hidden_ground: np.ndarray
    hidden_depth: np.ndarray

    def __post_init__(self) -> None:
        vg = as_prob_map(self.visible_ground)
        vd = as_depth_map(self.visible_depth)
        hg = as_prob_map(self.hidden_ground)
        hd = as_depth_map(self.hidden_depth)
        for name, arr in (("visible_depth", vd), ("hidden_ground", hg), ("hidden_depth", hd)):
            if arr.shape != vg.shape:
                raise ValueError(f"{name} shape {arr.shape} != {vg.shape}")
        # When the hidden-ground channel is already binarized, a ray that
        # meets no traversable surface cannot carry a floor depth.
        if is_binary(hg) and np.any(hd[hg == 0] != 0):
            raise ValueError("hidden_depth must be 0 where binary hidden_ground is 0")
        object.__setattr__(self, "visible_ground", vg)
        object.__setattr__(self, "visible_depth", vd)
        object.__setattr__(self, "hidden_ground", hg)
        object.__setattr__(self, "hidden_depth", hd)

    @property
    def shape(self) -> tuple[int, int]:
        return self.visible_ground.shape
