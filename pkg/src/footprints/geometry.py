"""Pinhole camera math, rigid poses, planes, and analytic ray intersections.

Conventions used throughout the package:

Camera frame (right-handed, standard computer vision):
  x right in the image, y down in the image, z forward along the optical
  axis. Depth means the camera-frame z coordinate, in meters.

World frame (right-handed):
  y up, ground plane at y = 0. Cameras sit at y > 0 and typically view
  along +z, tilted downward.

Image frame:
  continuous pixel coordinates (u, v); u grows to the right (columns),
  v grows downward (rows). Pixel centers sit at integer coordinates, so
  a continuous position (u, v) discretizes to raster index
  (round(v), round(u)). Rasters are row-major, origin top-left.

Depth rasters use exactly 0.0 as the "no value" sentinel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Points closer than this along a ray (in the ray's own parameterization)
# are treated as "at the origin" and never reported as hits.
MIN_RAY_T = 1e-6

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics. Focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width):
            raise ValueError(f"cx={self.cx} outside [0, {self.width})")
        if not (0 <= self.cy < self.height):
            raise ValueError(f"cy={self.cy} outside [0, {self.height})")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid camera-to-world transform: p_world = rotation @ p_cam + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)
        if not np.allclose(rot.T @ rot, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation determinant is not +1 (improper rotation)")

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def look_at(position, target, up=(0.0, 1.0, 0.0)) -> "Pose":
        """Camera-to-world pose for a camera at `position` viewing `target`.

        Orients the image-down axis toward world-down (-up). Falls back to a
        fixed in-plane axis when the view direction is parallel to `up`.
        """
        position = np.asarray(position, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - position
        norm = np.linalg.norm(forward)
        if norm < 1e-12:
            raise ValueError("look_at target coincides with position")
        z_axis = forward / norm
        down = -np.asarray(up, dtype=np.float64)
        x_axis = np.cross(down, z_axis)
        x_norm = np.linalg.norm(x_axis)
        if x_norm < 1e-12:
            # Straight up/down view: any horizontal x works; pick -x world.
            x_axis = np.array([-1.0, 0.0, 0.0])
        else:
            x_axis = x_axis / x_norm
        y_axis = np.cross(z_axis, x_axis)
        return Pose(np.stack([x_axis, y_axis, z_axis], axis=1), position)

    def inverse(self) -> "Pose":
        rot_inv = self.rotation.T
        return Pose(rot_inv, -rot_inv @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """Transform applying `other` first, then self."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply to a (3,) point or (..., 3) array of points."""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous camera-to-world matrix."""
        mat = np.eye(4)
        mat[:3, :3] = self.rotation
        mat[:3, 3] = self.translation
        return mat

    @staticmethod
    def from_matrix(mat: np.ndarray) -> "Pose":
        mat = np.asarray(mat, dtype=np.float64).reshape(4, 4)
        return Pose(mat[:3, :3], mat[:3, 3])


def relative_pose(source: Pose, target: Pose) -> Pose:
    """Transform mapping source-camera coordinates to target-camera coordinates."""
    return target.inverse().compose(source)


@dataclass(frozen=True, eq=False)
class Plane:
    """Plane {p : normal . p + offset = 0} with unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self) -> None:
        normal = np.asarray(self.normal, dtype=np.float64).reshape(3)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))
        if abs(np.linalg.norm(normal) - 1.0) > _ORTHO_TOL:
            raise ValueError("plane normal must be a unit vector")

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.normal + self.offset

    def project_points(self, points: np.ndarray) -> np.ndarray:
        """Orthogonal projection of (..., 3) points onto the plane."""
        dist = self.signed_distance(points)
        return np.asarray(points, dtype=np.float64) - dist[..., None] * self.normal

    def flipped(self) -> "Plane":
        return Plane(-self.normal, -self.offset)


def project(point, intrinsics: Intrinsics):
    """Project a camera-frame point. Returns (pixel (2,), depth) or None.

    None when the point is at or behind the camera (z <= MIN_RAY_T). No
    bounds clamping: out-of-frame pixels are returned and callers filter.
    """
    point = np.asarray(point, dtype=np.float64).reshape(3)
    z = point[2]
    if z <= MIN_RAY_T:
        return None
    pixel = np.array([intrinsics.fx * point[0] / z + intrinsics.cx,
                      intrinsics.fy * point[1] / z + intrinsics.cy])
    return pixel, float(z)


def project_points(points: np.ndarray, intrinsics: Intrinsics):
    """Vectorized projection of (N, 3) camera-frame points.

    Returns (pixels (N, 2), depths (N,), valid (N,) bool). Pixels for
    invalid (z <= MIN_RAY_T) points are set to 0 and must be ignored.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = points[:, 2]
    valid = z > MIN_RAY_T
    safe_z = np.where(valid, z, 1.0)
    pixels = np.empty((points.shape[0], 2))
    pixels[:, 0] = intrinsics.fx * points[:, 0] / safe_z + intrinsics.cx
    pixels[:, 1] = intrinsics.fy * points[:, 1] / safe_z + intrinsics.cy
    pixels[~valid] = 0.0
    return pixels, z, valid


def backproject(pixel, depth: float, intrinsics: Intrinsics) -> np.ndarray:
    """Camera-frame point for a pixel at the given z-depth. Rejects depth <= 0."""
    if depth <= 0:
        raise ValueError(f"depth must be positive, got {depth}")
    u, v = np.asarray(pixel, dtype=np.float64).reshape(2)
    return np.array([(u - intrinsics.cx) / intrinsics.fx * depth,
                     (v - intrinsics.cy) / intrinsics.fy * depth,
                     depth])


def backproject_pixels(pixels: np.ndarray, depths: np.ndarray,
                       intrinsics: Intrinsics) -> np.ndarray:
    """Vectorized backprojection of (N, 2) pixels at (N,) positive depths."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    depths = np.asarray(depths, dtype=np.float64).reshape(-1)
    if np.any(depths <= 0):
        raise ValueError("all depths must be positive")
    points = np.empty((pixels.shape[0], 3))
    points[:, 0] = (pixels[:, 0] - intrinsics.cx) / intrinsics.fx * depths
    points[:, 1] = (pixels[:, 1] - intrinsics.cy) / intrinsics.fy * depths
    points[:, 2] = depths
    return points


def pixel_rays(intrinsics: Intrinsics) -> np.ndarray:
    """(H, W, 3) camera-frame ray directions with z = 1 for every pixel center.

    With this parameterization, the ray parameter t equals the z-depth of
    the point origin + t * direction.
    """
    u = np.arange(intrinsics.width, dtype=np.float64)
    v = np.arange(intrinsics.height, dtype=np.float64)
    x = (u - intrinsics.cx) / intrinsics.fx
    y = (v - intrinsics.cy) / intrinsics.fy
    rays = np.empty((intrinsics.height, intrinsics.width, 3))
    rays[..., 0] = x[None, :]
    rays[..., 1] = y[:, None]
    rays[..., 2] = 1.0
    return rays


def intersect_ray_plane(origin, direction, plane: Plane):
    """Ray-plane intersection by substitution.

    Returns the parameter t (in units of `direction`) with t > MIN_RAY_T,
    or None when the ray is parallel to the plane or the hit is behind
    the origin.
    """
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    denom = plane.normal @ direction
    if abs(denom) < 1e-12:
        return None
    t = -(plane.normal @ origin + plane.offset) / denom
    if t <= MIN_RAY_T:
        return None
    return float(t)


def intersect_ray_box(origin, direction, lo, hi):
    """Slab-method ray/axis-aligned-box test.

    Returns (t_near, t_far) in units of `direction`, or None when the ray
    misses the box or the box lies entirely behind the origin
    (t_far <= MIN_RAY_T). t_near may be <= 0 when the origin is inside.
    """
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)

    t_near = -np.inf
    t_far = np.inf
    for axis in range(3):
        d = direction[axis]
        if abs(d) < 1e-15:
            if not (lo[axis] <= origin[axis] <= hi[axis]):
                return None
            continue
        t1 = (lo[axis] - origin[axis]) / d
        t2 = (hi[axis] - origin[axis]) / d
        if t1 > t2:
            t1, t2 = t2, t1
        t_near = max(t_near, t1)
        t_far = min(t_far, t2)
        if t_near > t_far:
            return None
    if t_far <= MIN_RAY_T:
        return None
    return float(t_near), float(t_far)
