"""Shared fixtures/helpers: cameras, scenes, and test-local oracles.

The oracle helpers here recompute geometry from first principles (plain
pinhole + plane algebra) so package code is never validated against
itself.
"""

import math

import numpy as np

from footprints.geometry import Intrinsics, Pose
from footprints.scene import Obstacle, Scene

CAM = Intrinsics(fx=110.0, fy=110.0, cx=63.5, cy=47.5, width=128, height=96)


def tilted_pose(height=1.5, tilt_deg=25.0, x=0.0, z=0.0):
    tilt = math.radians(tilt_deg)
    position = np.array([x, height, z])
    return Pose.look_at(position, position + np.array([0.0, -math.sin(tilt), math.cos(tilt)]))


def make_box(cx, cz, hx, hy, hz, velocity=(0.0, 0.0, 0.0)):
    return Obstacle(np.array([cx, hy, cz]), np.array([hx, hy, hz]), np.array(velocity))


def simple_scene(*boxes):
    return Scene((-4.0, 4.0), (1.0, 11.0), tuple(boxes))


def ground_points(intrinsics, pose):
    """Ray-plane floor point (x, z) and depth for every pixel, NaN where
    the ray misses the plane. Pure test-side pinhole algebra."""
    us = np.arange(intrinsics.width, dtype=np.float64)
    vs = np.arange(intrinsics.height, dtype=np.float64)
    dir_cam = np.empty((intrinsics.height, intrinsics.width, 3))
    dir_cam[..., 0] = (us[None, :] - intrinsics.cx) / intrinsics.fx
    dir_cam[..., 1] = (vs[:, None] - intrinsics.cy) / intrinsics.fy
    dir_cam[..., 2] = 1.0
    dir_world = dir_cam @ np.asarray(pose.rotation).T
    origin = np.asarray(pose.translation)
    d_y = dir_world[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -origin[1] / d_y
    good = np.isfinite(t) & (t > 1e-6)
    t = np.where(good, t, np.nan)
    x = origin[0] + t * dir_world[..., 0]
    z = origin[2] + t * dir_world[..., 2]
    return x, z, t


def oracle_hidden_mask(scene, intrinsics, pose, frame_index=0):
    """Hidden-ground mask recomputed independently of the package."""
    x, z, t = ground_points(intrinsics, pose)
    with np.errstate(invalid="ignore"):
        inside = ((x >= scene.ground_x[0]) & (x <= scene.ground_x[1])
                  & (z >= scene.ground_z[0]) & (z <= scene.ground_z[1]))
    inside &= np.isfinite(t)
    blocked = np.zeros_like(inside)
    for obstacle in scene.obstacles:
        x_lo, x_hi, z_lo, z_hi = obstacle.footprint_at(frame_index)
        with np.errstate(invalid="ignore"):
            blocked |= (x > x_lo) & (x < x_hi) & (z > z_lo) & (z < z_hi)
    return (inside & ~blocked).astype(np.uint8)


def oracle_footprint_mask(scene, intrinsics, pose, frame_index=0):
    """Pixels whose floor point falls strictly inside an obstacle base."""
    x, z, t = ground_points(intrinsics, pose)
    footprint = np.zeros(t.shape, dtype=bool)
    for obstacle in scene.obstacles:
        x_lo, x_hi, z_lo, z_hi = obstacle.footprint_at(frame_index)
        with np.errstate(invalid="ignore"):
            footprint |= (np.isfinite(t) & (x > x_lo) & (x < x_hi)
                          & (z > z_lo) & (z < z_hi))
    return footprint.astype(np.uint8)
