"""Synthetic world generator and exact oracle.

A scene is a rectangular patch of flat ground (the plane y = 0) plus
axis-aligned box obstacles resting on it. Obstacles may translate at a
constant velocity per frame. The renderer produces per-frame visible
depth and ground-segmentation rasters; oracle routines produce the exact
hidden-ground channels, optical flow, and evaluation regions that real
pipelines would obtain from SLAM, stereo, learned segmentation/flow, and
human annotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import MIN_RAY_T, Intrinsics, Plane, Pose, pixel_rays
from .rasters import as_binary_mask, as_depth_map

GROUND_ID = -1
NO_HIT_ID = -2


@dataclass(frozen=True, eq=False)
class Obstacle:
    """Axis-aligned box resting on the ground plane.

    The base rectangle (its footprint) is the region of ground the box
    makes untraversable. velocity is meters per frame; its vertical
    component must be zero so the box stays grounded.
    """

    center: np.ndarray
    half_extents: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=np.float64).reshape(3)
        half = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        vel = np.asarray(self.velocity, dtype=np.float64).reshape(3)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_extents", half)
        object.__setattr__(self, "velocity", vel)
        if np.any(half <= 0):
            raise ValueError("half_extents must be positive")
        if abs(center[1] - half[1]) > 1e-9:
            raise ValueError("obstacle must rest on the ground (center.y == half height)")
        if vel[1] != 0:
            raise ValueError("obstacle velocity must stay in the ground plane")

    def center_at(self, frame_index: int) -> np.ndarray:
        return self.center + frame_index * self.velocity

    def bounds_at(self, frame_index: int) -> tuple[np.ndarray, np.ndarray]:
        c = self.center_at(frame_index)
        return c - self.half_extents, c + self.half_extents

    def footprint_at(self, frame_index: int) -> tuple[float, float, float, float]:
        """(x_min, x_max, z_min, z_max) of the base rectangle."""
        lo, hi = self.bounds_at(frame_index)
        return float(lo[0]), float(hi[0]), float(lo[2]), float(hi[2])


@dataclass(frozen=True, eq=False)
class Scene:
    """Ground rectangle plus box obstacles; the verification oracle."""

    ground_x: tuple[float, float]
    ground_z: tuple[float, float]
    obstacles: tuple[Obstacle, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "ground_x", (float(self.ground_x[0]), float(self.ground_x[1])))
        object.__setattr__(self, "ground_z", (float(self.ground_z[0]), float(self.ground_z[1])))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not (self.ground_x[1] > self.ground_x[0] and self.ground_z[1] > self.ground_z[0]):
            raise ValueError("ground extent must have positive area")
        for obstacle in self.obstacles:
            x_lo, x_hi, z_lo, z_hi = obstacle.footprint_at(0)
            if (x_lo < self.ground_x[0] or x_hi > self.ground_x[1]
                    or z_lo < self.ground_z[0] or z_hi > self.ground_z[1]):
                raise ValueError("obstacle footprint must lie within the ground extent")

    @property
    def ground_plane(self) -> Plane:
        return Plane(np.array([0.0, 1.0, 0.0]), 0.0)


@dataclass(frozen=True, eq=False)
class FrameRender:
    """Visible depth + ground segmentation for one posed frame."""

    depth: np.ndarray
    ground_mask: np.ndarray
    intrinsics: Intrinsics
    pose: Pose
    frame_index: int = 0

    def __post_init__(self) -> None:
        depth = as_depth_map(self.depth)
        mask = as_binary_mask(self.ground_mask)
        if mask.shape != depth.shape:
            raise ValueError("depth and ground mask shapes differ")
        if np.any(depth[mask == 1] <= 0):
            raise ValueError("ground pixels must carry a positive depth")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "ground_mask", mask)


class RayHit(NamedTuple):
    t: float            # meters along the (unit-direction) ray
    surface_id: int     # GROUND_ID for the ground, obstacle index otherwise
    kind: str           # "ground" | "obstacle"


def _ground_hit_t(scene: Scene, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Per-pixel ray parameter of the ground-rectangle hit; inf where none.

    dirs is an (H, W, 3) array of world-frame directions; the returned t is
    in units of those directions.
    """
    d_y = dirs[..., 1]
    parallel = np.abs(d_y) < 1e-12
    t = np.where(parallel, np.inf, -origin[1] / np.where(parallel, 1.0, d_y))
    valid = np.isfinite(t) & (t > MIN_RAY_T)
    t_safe = np.where(valid, t, 0.0)
    x = origin[0] + t_safe * dirs[..., 0]
    z = origin[2] + t_safe * dirs[..., 2]
    inside = (valid
              & (x >= scene.ground_x[0]) & (x <= scene.ground_x[1])
              & (z >= scene.ground_z[0]) & (z <= scene.ground_z[1]))
    return np.where(inside, t_safe, np.inf)


def _box_entry_t(origin: np.ndarray, dirs: np.ndarray,
                 lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Per-pixel first box-surface crossing (slab method); inf where none."""
    t_near = np.full(dirs.shape[:2], -np.inf)
    t_far = np.full(dirs.shape[:2], np.inf)
    for axis in range(3):
        d = dirs[..., axis]
        o = origin[axis]
        parallel = np.abs(d) < 1e-15
        safe_d = np.where(parallel, 1.0, d)
        t1 = (lo[axis] - o) / safe_d
        t2 = (hi[axis] - o) / safe_d
        lo_t = np.minimum(t1, t2)
        hi_t = np.maximum(t1, t2)
        if lo[axis] <= o <= hi[axis]:
            lo_t = np.where(parallel, -np.inf, lo_t)
            hi_t = np.where(parallel, np.inf, hi_t)
        else:
            lo_t = np.where(parallel, np.inf, lo_t)
            hi_t = np.where(parallel, -np.inf, hi_t)
        t_near = np.maximum(t_near, lo_t)
        t_far = np.minimum(t_far, hi_t)
    hit = (t_near <= t_far) & (t_far > MIN_RAY_T)
    entry = np.where(t_near > MIN_RAY_T, t_near, t_far)
    return np.where(hit, entry, np.inf)


def _trace(scene: Scene, intrinsics: Intrinsics, pose: Pose,
           frame_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-surface trace for every pixel.

    Returns (t, surface): t is the ray parameter (== camera z-depth, since
    camera-frame directions have z = 1), inf where nothing is hit; surface
    holds obstacle indices, GROUND_ID, or NO_HIT_ID. Obstacles win exact
    ties against the ground (a ray grazing a box base edge reads as box).
    """
    dirs = pose.rotate(pixel_rays(intrinsics))
    origin = pose.translation
    layers = [_box_entry_t(origin, dirs, *obs.bounds_at(frame_index))
              for obs in scene.obstacles]
    layers.append(_ground_hit_t(scene, origin, dirs))
    stack = np.stack(layers, axis=0)
    best = np.argmin(stack, axis=0)
    t = np.take_along_axis(stack, best[None], axis=0)[0]
    surface = np.where(best == len(scene.obstacles), GROUND_ID, best)
    surface = np.where(np.isinf(t), NO_HIT_ID, surface).astype(np.int64)
    return t, surface


def render_frame(scene: Scene, intrinsics: Intrinsics, pose: Pose,
                 frame_index: int = 0) -> FrameRender:
    """Render visible depth and ground segmentation for a posed camera.

    Depth is the camera z-depth of the nearest surface (0 where none);
    the mask is 1 exactly where that nearest surface is the ground.
    Obstacles are evaluated at center + frame_index * velocity.
    """
    if pose.translation[1] <= 0:
        raise ValueError("camera must be above the ground plane")
    t, surface = _trace(scene, intrinsics, pose, frame_index)
    depth = np.where(np.isfinite(t), t, 0.0)
    mask = (surface == GROUND_ID).astype(np.uint8)
    return FrameRender(depth, mask, intrinsics, pose, frame_index)


def ground_truth_hidden(scene: Scene, intrinsics: Intrinsics, pose: Pose,
                        frame_index: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Exact hidden-ground channels for a posed camera.

    For each pixel the ray is intersected with the ground plane; the mask
    is 1 iff that floor point lies inside the ground extent and strictly
    outside every obstacle footprint (occlusion by the boxes is ignored:
    this is what the visible channels hide). The depth raster carries the
    camera z-depth of the floor point where the mask is 1, else 0.
    """
    dirs = pose.rotate(pixel_rays(intrinsics))
    origin = pose.translation
    t = _ground_hit_t(scene, origin, dirs)
    on_ground = np.isfinite(t)
    t_safe = np.where(on_ground, t, 0.0)
    x = origin[0] + t_safe * dirs[..., 0]
    z = origin[2] + t_safe * dirs[..., 2]
    blocked = np.zeros_like(on_ground)
    for obstacle in scene.obstacles:
        x_lo, x_hi, z_lo, z_hi = obstacle.footprint_at(frame_index)
        blocked |= (x > x_lo) & (x < x_hi) & (z > z_lo) & (z < z_hi)
    mask = (on_ground & ~blocked).astype(np.uint8)
    depth = np.where(mask == 1, t_safe, 0.0)
    return mask, depth


def oracle_frame(scene: Scene, intrinsics: Intrinsics, pose: Pose,
                 frame_index: int = 0):
    """Convenience: (FrameRender, hidden mask, hidden depth) for one camera."""
    render = render_frame(scene, intrinsics, pose, frame_index)
    hidden_mask, hidden_depth = ground_truth_hidden(scene, intrinsics, pose, frame_index)
    return render, hidden_mask, hidden_depth


def ground_truth_flow(scene: Scene, intrinsics: Intrinsics, pose_t: Pose,
                      pose_t1: Pose, frame_t: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Exact optical flow from frame t to frame t+1.

    Surface points seen at frame t are advanced by one step of their
    obstacle's velocity (ground points stay put) and reprojected into the
    t+1 camera. Returns (flow (H, W, 2) as (du, dv), validity mask);
    pixels with no surface hit or a reprojection behind the camera are
    invalid and carry zero flow.
    """
    t, surface = _trace(scene, intrinsics, pose_t, frame_t)
    has_hit = surface != NO_HIT_ID
    t_safe = np.where(has_hit, t, 0.0)
    dirs = pose_t.rotate(pixel_rays(intrinsics))
    points = pose_t.translation + t_safe[..., None] * dirs
    for idx, obstacle in enumerate(scene.obstacles):
        moving = surface == idx
        if np.any(moving):
            points = np.where(moving[..., None], points + obstacle.velocity, points)
    cam1 = pose_t1.inverse().transform(points)
    z1 = cam1[..., 2]
    valid = has_hit & (z1 > MIN_RAY_T)
    safe_z = np.where(valid, z1, 1.0)
    u1 = intrinsics.fx * cam1[..., 0] / safe_z + intrinsics.cx
    v1 = intrinsics.fy * cam1[..., 1] / safe_z + intrinsics.cy
    u0 = np.arange(intrinsics.width, dtype=np.float64)[None, :]
    v0 = np.arange(intrinsics.height, dtype=np.float64)[:, None]
    flow = np.zeros((intrinsics.height, intrinsics.width, 2))
    flow[..., 0] = np.where(valid, u1 - u0, 0.0)
    flow[..., 1] = np.where(valid, v1 - v0, 0.0)
    return flow, valid.astype(np.uint8)


EVAL_REGION_MODES = ("full_image", "true_ground", "hull_of_visible_ground")


def eval_region(scene: Scene, intrinsics: Intrinsics, pose: Pose, mode: str,
                frame_index: int = 0) -> np.ndarray:
    """Evaluation-region mask for the footprint/freespace protocols.

    full_image: all pixels. true_ground: pixels whose ray meets the plane
    inside the ground extent, obstacle footprints included. hull_of_
    visible_ground: filled convex hull of the rendered visible-ground mask.
    """
    shape = (intrinsics.height, intrinsics.width)
    if mode == "full_image":
        return np.ones(shape, dtype=np.uint8)
    if mode == "true_ground":
        dirs = pose.rotate(pixel_rays(intrinsics))
        t = _ground_hit_t(scene, pose.translation, dirs)
        return np.isfinite(t).astype(np.uint8)
    if mode == "hull_of_visible_ground":
        from .predictors import convex_hull_fill

        render = render_frame(scene, intrinsics, pose, frame_index)
        return convex_hull_fill(render.ground_mask)
    raise ValueError(f"unknown eval-region mode {mode!r}; expected one of {EVAL_REGION_MODES}")


def cast_ray(pixel, intrinsics: Intrinsics, pose: Pose, scene: Scene,
             frame_index: int = 0) -> list[RayHit]:
    """All surface hits along a pixel's ray, nearest first.

    t is in meters (unit direction). Each obstacle contributes at most one
    hit: its first surface crossing with t > MIN_RAY_T. The ground
    contributes a hit only where the intersection lies inside the extent.
    """
    from .geometry import intersect_ray_box, intersect_ray_plane

    u, v = float(pixel[0]), float(pixel[1])
    if not (0 <= u < intrinsics.width and 0 <= v < intrinsics.height):
        raise ValueError(f"pixel ({u}, {v}) outside image bounds")
    dir_cam = np.array([(u - intrinsics.cx) / intrinsics.fx,
                        (v - intrinsics.cy) / intrinsics.fy,
                        1.0])
    direction = pose.rotate(dir_cam / np.linalg.norm(dir_cam))
    origin = pose.translation

    hits: list[RayHit] = []
    t_ground = intersect_ray_plane(origin, direction, scene.ground_plane)
    if t_ground is not None:
        point = origin + t_ground * direction
        if (scene.ground_x[0] <= point[0] <= scene.ground_x[1]
                and scene.ground_z[0] <= point[2] <= scene.ground_z[1]):
            hits.append(RayHit(t_ground, GROUND_ID, "ground"))
    for idx, obstacle in enumerate(scene.obstacles):
        lo, hi = obstacle.bounds_at(frame_index)
        span = intersect_ray_box(origin, direction, lo, hi)
        if span is not None:
            t_near, t_far = span
            t_hit = t_near if t_near > MIN_RAY_T else t_far
            hits.append(RayHit(t_hit, idx, "obstacle"))
    hits.sort(key=lambda h: h.t)
    return hits


def random_scene(rng: np.random.Generator,
                 ground_x: tuple[float, float] = (-4.0, 4.0),
                 ground_z: tuple[float, float] = (1.0, 11.0),
                 min_boxes: int = 1,
                 max_boxes: int = 6,
                 size_range: tuple[float, float] = (0.2, 2.0),
                 moving_fraction: float = 0.0,
                 speed_range: tuple[float, float] = (0.1, 0.5)) -> Scene:
    """Seeded scene randomizer: uniform box count, sizes, and positions."""
    n_boxes = int(rng.integers(min_boxes, max_boxes + 1))
    obstacles = []
    for _ in range(n_boxes):
        half = rng.uniform(*size_range, size=3) / 2.0
        half[0] = min(half[0], 0.45 * (ground_x[1] - ground_x[0]))
        half[2] = min(half[2], 0.45 * (ground_z[1] - ground_z[0]))
        cx = rng.uniform(ground_x[0] + half[0], ground_x[1] - half[0])
        cz = rng.uniform(ground_z[0] + half[2], ground_z[1] - half[2])
        velocity = np.zeros(3)
        if rng.random() < moving_fraction:
            angle = rng.uniform(0.0, 2.0 * math.pi)
            speed = rng.uniform(*speed_range)
            velocity = np.array([speed * math.cos(angle), 0.0, speed * math.sin(angle)])
        obstacles.append(Obstacle(np.array([cx, half[1], cz]), half, velocity))
    return Scene(ground_x, ground_z, tuple(obstacles))


def camera_path(n_frames: int,
                height: float = 1.5,
                tilt_deg: float = 25.0,
                forward_step: float = 0.35,
                sway_amplitude: float = 0.5,
                sway_period: float = 8.0,
                start_z: float = 0.0) -> list[Pose]:
    """Forward-walking camera with lateral sway and a fixed downward tilt.

    The sway gives source frames enough parallax to see behind obstacles.
    """
    tilt = math.radians(tilt_deg)
    view = np.array([0.0, -math.sin(tilt), math.cos(tilt)])
    poses = []
    for i in range(n_frames):
        position = np.array([sway_amplitude * math.sin(2.0 * math.pi * i / sway_period),
                             height,
                             start_z + forward_step * i])
        poses.append(Pose.look_at(position, position + view))
    return poses
