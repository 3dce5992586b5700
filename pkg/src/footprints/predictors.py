"""Baseline hidden-ground predictors and the external-prediction loader.

Baselines build a full four-channel frame from the visible channels
alone; the loader brings in predictions produced elsewhere (e.g. by a
trained network) from raster files, validating them against the raster
conventions.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import MIN_RAY_T, Intrinsics, Plane, pixel_rays
from .labels import RansacParams, fit_ground_plane
from .rasters import FootprintFrame, as_binary_mask
from .fileio import read_pfm, write_pfm

BASELINE_KINDS = ("visible_only", "convex_hull", "all_traversable",
                  "none_traversable", "ground_truth")

PREDICTION_FILES = {
    "visible_ground": "visible_ground.pfm",
    "visible_depth": "visible_depth.pfm",
    "hidden_ground": "hidden_ground.pfm",
    "hidden_depth": "hidden_depth.pfm",
}


def _hull_vertices(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull of (N, 2) points, counter-clockwise."""
    order = np.lexsort((points[:, 1], points[:, 0]))
    pts = points[order]

    def half(iterable):
        chain: list[np.ndarray] = []
        for p in iterable:
            while len(chain) >= 2:
                a, b = chain[-2], chain[-1]
                cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
                if cross <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    return np.asarray(lower[:-1] + upper[:-1], dtype=np.float64)


def convex_hull_fill(mask: np.ndarray) -> np.ndarray:
    """Filled convex hull of a mask's set pixel centers.

    Hull by monotone chain over pixel centers (u, v), fill by scanline;
    centers lying exactly on a hull edge count as inside. Empty input
    gives an empty output; the result always contains the input.
    """
    mask = as_binary_mask(mask)
    filled = np.zeros_like(mask)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return filled
    points = np.stack([cols, rows], axis=1).astype(np.float64)
    if rows.size <= 2:
        hull = points
    else:
        hull = _hull_vertices(points)
    if hull.shape[0] == 1:
        filled[int(hull[0, 1]), int(hull[0, 0])] = 1
        return filled

    eps = 1e-9
    n = hull.shape[0]
    v_min = int(np.ceil(hull[:, 1].min() - eps))
    v_max = int(np.floor(hull[:, 1].max() + eps))
    width = mask.shape[1]
    for v in range(max(v_min, 0), min(v_max, mask.shape[0] - 1) + 1):
        xs: list[float] = []
        for i in range(n):
            p, q = hull[i], hull[(i + 1) % n]
            if p[1] == q[1]:
                if p[1] == v:
                    xs.extend((p[0], q[0]))
                continue
            lo, hi = (p, q) if p[1] < q[1] else (q, p)
            if lo[1] <= v <= hi[1]:
                xs.append(lo[0] + (v - lo[1]) * (hi[0] - lo[0]) / (hi[1] - lo[1]))
        if not xs:
            continue
        u_lo = max(int(np.ceil(min(xs) - eps)), 0)
        u_hi = min(int(np.floor(max(xs) + eps)), width - 1)
        if u_lo <= u_hi:
            filled[v, u_lo:u_hi + 1] = 1
    return filled


def plane_ray_depths(plane: Plane, intrinsics: Intrinsics,
                     select: np.ndarray) -> np.ndarray:
    """Camera z-depth of each selected pixel's ray-plane intersection; 0
    where the ray is parallel or meets the plane behind the camera."""
    rays = pixel_rays(intrinsics)
    denom = rays @ plane.normal
    parallel = np.abs(denom) < 1e-12
    t = np.where(parallel, 0.0, -plane.offset / np.where(parallel, 1.0, denom))
    depths = np.where((t > MIN_RAY_T) & (select > 0), t, 0.0)
    return depths


def baseline_predict(kind: str, ground_mask: np.ndarray, depth: np.ndarray,
                     intrinsics: Intrinsics,
                     gt_hidden: tuple[np.ndarray, np.ndarray] | None = None,
                     ransac: RansacParams = RansacParams()) -> FootprintFrame:
    """Build a four-channel frame from one of the reference baselines.

    visible_only     hidden ground = the visible ground mask
    convex_hull      hidden ground = filled convex hull of that mask
    all_traversable  hidden ground = 1 everywhere
    none_traversable hidden ground = 0 everywhere
    ground_truth     oracle channels, passed in via gt_hidden

    Hidden depth for the non-oracle kinds comes from intersecting pixel
    rays with the RANSAC-fitted visible-ground plane wherever the hidden
    mask is on.
    """
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}; expected one of {BASELINE_KINDS}")
    ground_mask = as_binary_mask(ground_mask)

    if kind == "ground_truth":
        if gt_hidden is None:
            raise ValueError("ground_truth baseline needs gt_hidden=(mask, depth)")
        hidden_mask, hidden_depth = gt_hidden
        return FootprintFrame(ground_mask, depth, hidden_mask, hidden_depth)

    if kind == "visible_only":
        hidden_mask = ground_mask.copy()
    elif kind == "convex_hull":
        hidden_mask = convex_hull_fill(ground_mask)
    elif kind == "all_traversable":
        hidden_mask = np.ones_like(ground_mask)
    else:
        hidden_mask = np.zeros_like(ground_mask)

    if np.any(hidden_mask):
        plane = fit_ground_plane(depth, ground_mask, intrinsics, ransac)
        hidden_depth = plane_ray_depths(plane, intrinsics, hidden_mask)
    else:
        hidden_depth = np.zeros_like(np.asarray(depth, dtype=np.float64))
    return FootprintFrame(ground_mask, depth, hidden_mask, hidden_depth)


def save_prediction(frame: FootprintFrame, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_pfm(directory / PREDICTION_FILES["visible_ground"], frame.visible_ground)
    write_pfm(directory / PREDICTION_FILES["visible_depth"], frame.visible_depth)
    write_pfm(directory / PREDICTION_FILES["hidden_ground"], frame.hidden_ground)
    write_pfm(directory / PREDICTION_FILES["hidden_depth"], frame.hidden_depth)


def load_prediction(directory) -> FootprintFrame:
    """Load a four-channel prediction from its raster files.

    Raises FileNotFoundError for missing files and ValueError when the
    rasters disagree in shape or violate the range conventions.
    """
    directory = Path(directory)
    rasters = {}
    for key, name in PREDICTION_FILES.items():
        path = directory / name
        if not path.is_file():
            raise FileNotFoundError(f"missing prediction raster: {path}")
        rasters[key] = read_pfm(path)
    return FootprintFrame(rasters["visible_ground"], rasters["visible_depth"],
                          rasters["hidden_ground"], rasters["hidden_depth"])
