"""Training-label generation from posed depth + segmentation frames.

The pipeline turns one target frame plus N nearby source frames into
three disjoint pixel sets (traversable / untraversable / unknown), a
hidden-depth regression target, and a moving-object mask:

  1. forward-warp each source's traversable depths into the target view,
  2. keep pixels supported by strictly more than k warped maps and take
     the per-pixel median of the positive warped depths,
  3. fit the ground plane to visible-ground points with RANSAC, project
     every off-plane depth point onto it and splat a small grid around
     the landing position to recover object footprints (this catches
     thin structures the multi-view aggregation misses),
  4. remove those footprint pixels from the traversable set,
  5. compare induced flow (depth + camera motion) against observed
     optical flow and mark pixels whose endpoints disagree by more than
     a few pixels as moving.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .geometry import (
    MIN_RAY_T,
    Intrinsics,
    Plane,
    Pose,
    backproject_pixels,
    project_points,
    relative_pose,
)
from .rasters import as_binary_mask, as_depth_map
from .scene import FrameRender

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


class PlaneFitError(RuntimeError):
    """RANSAC ground-plane estimation failed (too few points or inliers)."""


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 200
    inlier_threshold: float = 0.02
    min_inlier_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")


@dataclass(frozen=True)
class LabelParams:
    """All knobs of the label pipeline (CLI keys in parentheses).

    support_count    (k) a pixel is traversable when strictly more than
                     this many warped maps carry a value there
    flow_tolerance   (tau) endpoint disagreement, in pixels, beyond which
                     a pixel counts as moving
    splat_halfwidth  spacing of the 3x3 world-space splat grid, meters
    height_threshold plane distance separating floor noise from objects
    min_component_px 4-connected untraversable blobs smaller than this
                     are dropped
    """

    support_count: int = 2
    flow_tolerance: float = 3.0
    ransac: RansacParams = field(default_factory=RansacParams)
    splat_halfwidth: float = 0.05
    height_threshold: float = 0.05
    min_component_px: int = 20


@dataclass(frozen=True, eq=False)
class WarpedDepthSet:
    """Sparse depth maps warped from source frames into one target view."""

    maps: np.ndarray                 # (N, H, W), 0 = no data
    source_frame_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        maps = np.asarray(self.maps, dtype=np.float64)
        if maps.ndim != 3 or maps.shape[0] == 0:
            raise ValueError("need a non-empty (N, H, W) stack of warped maps")
        if np.any(maps < 0) or not np.all(np.isfinite(maps)):
            raise ValueError("warped depths must be finite and >= 0")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "source_frame_ids", tuple(self.source_frame_ids))


@dataclass(frozen=True, eq=False)
class TrainingTarget:
    """Per-pixel supervision for one training image.

    traversable, untraversable and the implicit unknown remainder are
    pairwise disjoint and cover the image. moving_mask is 0 on pixels
    judged to be moving. hidden_depth carries the aggregated floor depth
    and is positive only inside the traversable set.
    """

    traversable: np.ndarray
    untraversable: np.ndarray
    moving_mask: np.ndarray
    hidden_depth: np.ndarray
    visible_ground: np.ndarray
    visible_depth: np.ndarray

    def __post_init__(self) -> None:
        traversable = as_binary_mask(self.traversable)
        untraversable = as_binary_mask(self.untraversable)
        moving = as_binary_mask(self.moving_mask)
        hidden_depth = as_depth_map(self.hidden_depth)
        visible_ground = as_binary_mask(self.visible_ground)
        visible_depth = as_depth_map(self.visible_depth)
        shape = traversable.shape
        for name, arr in (("untraversable", untraversable), ("moving_mask", moving),
                          ("hidden_depth", hidden_depth), ("visible_ground", visible_ground),
                          ("visible_depth", visible_depth)):
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} != {shape}")
        if np.any((traversable == 1) & (untraversable == 1)):
            raise ValueError("traversable and untraversable sets must be disjoint")
        if np.any(hidden_depth[traversable == 0] > 0):
            raise ValueError("hidden_depth must be positive only on traversable pixels")
        object.__setattr__(self, "traversable", traversable)
        object.__setattr__(self, "untraversable", untraversable)
        object.__setattr__(self, "moving_mask", moving)
        object.__setattr__(self, "hidden_depth", hidden_depth)
        object.__setattr__(self, "visible_ground", visible_ground)
        object.__setattr__(self, "visible_depth", visible_depth)

    @property
    def unknown(self) -> np.ndarray:
        return ((self.traversable == 0) & (self.untraversable == 0)).astype(np.uint8)


def forward_warp(source: FrameRender, relative: Pose, target_k: Intrinsics) -> np.ndarray:
    """Warp the source frame's traversable depths into the target view.

    Each source pixel with ground_mask 1 and positive depth is
    backprojected, moved by `relative` (source-camera to target-camera),
    projected, and written to the nearest target pixel. Pixel collisions
    keep the minimum depth (z-buffer); everything else stays 0.
    """
    height, width = target_k.height, target_k.width
    select = (source.ground_mask == 1) & (source.depth > 0)
    if not np.any(select):
        return np.zeros((height, width))
    rows, cols = np.nonzero(select)
    points = backproject_pixels(np.stack([cols, rows], axis=1),
                                source.depth[select], source.intrinsics)
    pixels, depths, valid = project_points(relative.transform(points), target_k)
    u = np.rint(pixels[:, 0]).astype(np.int64)
    v = np.rint(pixels[:, 1]).astype(np.int64)
    keep = valid & (u >= 0) & (u < width) & (v >= 0) & (v < height)
    buffer = np.full(height * width, np.inf)
    np.minimum.at(buffer, v[keep] * width + u[keep], depths[keep])
    warped = np.where(np.isfinite(buffer), buffer, 0.0)
    return warped.reshape(height, width)


def warp_sources(target: FrameRender, sources: Sequence[FrameRender]) -> WarpedDepthSet:
    """Forward-warp every source frame into the target camera."""
    if not sources:
        raise ValueError("need at least one source frame")
    maps = [forward_warp(src, relative_pose(src.pose, target.pose), target.intrinsics)
            for src in sources]
    return WarpedDepthSet(np.stack(maps), tuple(src.frame_index for src in sources))


def aggregate_traversable(warped: WarpedDepthSet, support_count: int) -> np.ndarray:
    """Pixels carried by strictly more than `support_count` warped maps."""
    support = (warped.maps > 0).sum(axis=0)
    return (support > support_count).astype(np.uint8)


def median_hidden_depth(warped: WarpedDepthSet) -> np.ndarray:
    """Per-pixel median of the positive warped depths; 0 where none.

    An even number of values yields the mean of the two middle ones.
    """
    stack = np.where(warped.maps > 0, warped.maps, np.inf)
    stack = np.sort(stack, axis=0)
    counts = (warped.maps > 0).sum(axis=0)
    has_value = counts > 0
    safe = np.maximum(counts, 1)
    lo = np.take_along_axis(stack, ((safe - 1) // 2)[None], axis=0)[0]
    hi = np.take_along_axis(stack, (safe // 2)[None], axis=0)[0]
    return np.where(has_value, 0.5 * (lo + hi), 0.0)


def fit_ground_plane(depth: np.ndarray, ground_mask: np.ndarray,
                     intrinsics: Intrinsics, params: RansacParams) -> Plane:
    """3-point RANSAC plane fit over backprojected visible-ground pixels.

    The winning hypothesis (most points within inlier_threshold of the
    plane) is refined by least squares over its inliers, and the normal
    is oriented toward the camera origin. Raises PlaneFitError when
    fewer than 3 ground points exist or the best hypothesis explains
    less than min_inlier_fraction of them.
    """
    depth = as_depth_map(depth)
    ground_mask = as_binary_mask(ground_mask)
    select = (ground_mask == 1) & (depth > 0)
    rows, cols = np.nonzero(select)
    if rows.size < 3:
        raise PlaneFitError(f"need >= 3 ground pixels, got {rows.size}")
    points = backproject_pixels(np.stack([cols, rows], axis=1), depth[select], intrinsics)

    rng = np.random.default_rng(params.seed)
    best_count = -1
    best_inliers = None
    for _ in range(params.iterations):
        i, j, k = rng.choice(rows.size, size=3, replace=False)
        normal = np.cross(points[j] - points[i], points[k] - points[i])
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue  # collinear sample
        normal = normal / norm
        offset = -normal @ points[i]
        inliers = np.abs(points @ normal + offset) <= params.inlier_threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None or best_count < params.min_inlier_fraction * rows.size:
        raise PlaneFitError(
            f"best hypothesis explains {max(best_count, 0)}/{rows.size} points, "
            f"below min_inlier_fraction={params.min_inlier_fraction}")

    support = points[best_inliers]
    centroid = support.mean(axis=0)
    _, _, vt = np.linalg.svd(support - centroid, full_matrices=False)
    normal = vt[2]
    offset = -normal @ centroid
    if offset < 0:  # orient the normal toward the camera origin
        normal, offset = -normal, -offset
    return Plane(normal, offset)


def untraversable_from_depth(depth: np.ndarray, ground_mask: np.ndarray,
                             plane: Plane, intrinsics: Intrinsics,
                             splat_halfwidth: float = 0.05,
                             height_threshold: float = 0.05,
                             min_component_px: int = 20) -> np.ndarray:
    """Object-footprint pixels recovered from a single depth map.

    Every non-ground depth point farther than height_threshold from the
    plane (on the camera side) is dropped onto the plane; a 3x3 grid of
    points spaced splat_halfwidth apart is splatted around the landing
    position and reprojected into the camera. Visible-ground pixels are
    then cleared and 4-connected components smaller than
    min_component_px are dropped.
    """
    depth = as_depth_map(depth)
    ground_mask = as_binary_mask(ground_mask)
    height, width = depth.shape
    footprint = np.zeros((height, width), dtype=bool)

    select = (depth > 0) & (ground_mask == 0)
    if np.any(select):
        rows, cols = np.nonzero(select)
        points = backproject_pixels(np.stack([cols, rows], axis=1),
                                    depth[select], intrinsics)
        distances = plane.signed_distance(points)
        above = distances > height_threshold
        if np.any(above):
            landed = plane.project_points(points[above])
            axis_a = np.cross(plane.normal, np.array([1.0, 0.0, 0.0]))
            if np.linalg.norm(axis_a) < 1e-9:
                axis_a = np.cross(plane.normal, np.array([0.0, 1.0, 0.0]))
            axis_a /= np.linalg.norm(axis_a)
            axis_b = np.cross(plane.normal, axis_a)
            steps = np.array([-splat_halfwidth, 0.0, splat_halfwidth])
            grid = (steps[:, None, None] * axis_a[None, None, :]
                    + steps[None, :, None] * axis_b[None, None, :]).reshape(-1, 3)
            splats = (landed[:, None, :] + grid[None, :, :]).reshape(-1, 3)
            pixels, _, valid = project_points(splats, intrinsics)
            u = np.rint(pixels[:, 0]).astype(np.int64)
            v = np.rint(pixels[:, 1]).astype(np.int64)
            keep = valid & (u >= 0) & (u < width) & (v >= 0) & (v < height)
            footprint[v[keep], u[keep]] = True

    footprint[ground_mask == 1] = False
    labeled, n_components = ndimage.label(footprint, structure=FOUR_CONNECTED)
    if n_components:
        sizes = np.bincount(labeled.ravel())
        small = np.nonzero(sizes < min_component_px)[0]
        footprint[np.isin(labeled, small[small > 0])] = False
    return footprint.astype(np.uint8)


def induced_flow(depth: np.ndarray, relative: Pose,
                 intrinsics: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Flow a static scene would produce given depth and camera motion.

    `relative` maps this frame's camera coordinates into the next
    frame's. Returns (flow (H, W, 2) as (du, dv), validity mask);
    pixels without depth or reprojected behind the camera are invalid.
    """
    depth = as_depth_map(depth)
    height, width = depth.shape
    u0 = np.arange(width, dtype=np.float64)[None, :]
    v0 = np.arange(height, dtype=np.float64)[:, None]
    has_depth = depth > 0
    safe_depth = np.where(has_depth, depth, 1.0)
    x = (u0 - intrinsics.cx) / intrinsics.fx * safe_depth
    y = (v0 - intrinsics.cy) / intrinsics.fy * safe_depth
    points = np.stack([x, y, safe_depth], axis=-1)
    moved = relative.transform(points)
    z1 = moved[..., 2]
    valid = has_depth & (z1 > MIN_RAY_T)
    safe_z = np.where(valid, z1, 1.0)
    u1 = intrinsics.fx * moved[..., 0] / safe_z + intrinsics.cx
    v1 = intrinsics.fy * moved[..., 1] / safe_z + intrinsics.cy
    flow = np.zeros((height, width, 2))
    flow[..., 0] = np.where(valid, u1 - u0, 0.0)
    flow[..., 1] = np.where(valid, v1 - v0, 0.0)
    return flow, valid.astype(np.uint8)


def moving_object_mask(induced: np.ndarray, induced_valid: np.ndarray,
                       optical: np.ndarray, optical_valid: np.ndarray,
                       flow_tolerance: float = 3.0) -> np.ndarray:
    """0 where the two flows' endpoints disagree by more than the tolerance.

    Pixels where either flow is unavailable stay 1: missing flow is not
    evidence of motion, and masking removes supervision.
    """
    induced_valid = as_binary_mask(induced_valid)
    optical_valid = as_binary_mask(optical_valid)
    if induced.shape != optical.shape or induced_valid.shape != induced.shape[:2]:
        raise ValueError("flow rasters must share one shape")
    both = (induced_valid == 1) & (optical_valid == 1)
    difference = np.linalg.norm(induced - optical, axis=-1)
    mask = np.ones(induced.shape[:2], dtype=np.uint8)
    mask[both & (difference > flow_tolerance)] = 0
    return mask


def build_training_target(target: FrameRender, sources: Sequence[FrameRender],
                          params: LabelParams = LabelParams(),
                          optical_flow: np.ndarray | None = None,
                          optical_flow_valid: np.ndarray | None = None,
                          next_pose: Pose | None = None) -> TrainingTarget:
    """Run the full label pipeline for one target frame.

    Supplying (optical_flow, optical_flow_valid, next_pose) enables
    moving-object masking against the induced flow; without them every
    pixel keeps moving_mask 1.
    """
    if not sources:
        raise ValueError("need at least one source frame")
    warped = warp_sources(target, sources)
    supported = aggregate_traversable(warped, params.support_count)
    hidden_depth = median_hidden_depth(warped)

    plane = fit_ground_plane(target.depth, target.ground_mask,
                             target.intrinsics, params.ransac)
    untraversable = untraversable_from_depth(
        target.depth, target.ground_mask, plane, target.intrinsics,
        splat_halfwidth=params.splat_halfwidth,
        height_threshold=params.height_threshold,
        min_component_px=params.min_component_px)

    traversable = ((supported == 1) & (untraversable == 0)).astype(np.uint8)
    hidden_depth = np.where(traversable == 1, hidden_depth, 0.0)

    if optical_flow is not None:
        if optical_flow_valid is None or next_pose is None:
            raise ValueError("optical flow needs its validity mask and the next frame's pose")
        flow, flow_valid = induced_flow(target.depth,
                                        relative_pose(target.pose, next_pose),
                                        target.intrinsics)
        moving = moving_object_mask(flow, flow_valid, optical_flow,
                                    optical_flow_valid, params.flow_tolerance)
    else:
        moving = np.ones_like(traversable)

    return TrainingTarget(traversable, untraversable, moving, hidden_depth,
                          target.ground_mask, target.depth)
