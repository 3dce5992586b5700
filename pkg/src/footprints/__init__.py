"""Visible + hidden traversable-surface world model toolkit.

Submodules:
  geometry    pinhole camera math, poses, planes, ray primitives
  rasters     raster conventions and the four-channel FootprintFrame
  scene       synthetic scenes, exact renders, oracle channels
  labels      training-label generation (warping, aggregation, masking)
  losses      per-pixel training losses with analytic gradients
  predictors  baseline hidden-ground predictors and prediction file IO
  evaluation  freespace/footprint segmentation and hidden-depth metrics
  planning    A* path planning over hidden-traversability maps
  fileio      PFM/PGM rasters, scene and dataset-manifest JSON
  cli         command-line pipeline (synth/labels/baseline/eval/plan/...)
"""

from .geometry import Intrinsics, Plane, Pose
from .rasters import FootprintFrame
from .scene import FrameRender, Obstacle, Scene

__all__ = [
    "Intrinsics",
    "Plane",
    "Pose",
    "FootprintFrame",
    "FrameRender",
    "Obstacle",
    "Scene",
]

__version__ = "0.1.0"
