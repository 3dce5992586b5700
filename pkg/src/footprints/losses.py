"""Per-pixel training losses with analytic gradients.

Four terms, one per output channel, summed over pixels with no
inter-term weights:

  hidden surface   -mu_j log(s*) on traversable pixels,
                   -log(1 - s*) on untraversable pixels,
                   -lambda log(1 - s*) on the unknown remainder
  visible surface  binary cross-entropy against the ground mask
  visible depth    log(|d - d_hat| + 1), on pixels with a depth target
  hidden depth     the same log-L1, restricted to traversable pixels
                   that carry a hidden-depth target

Probabilities are clamped to [clamp_eps, 1 - clamp_eps] before the
logs. Gradients are with respect to the raw prediction, so they are 0
wherever the clamp saturates, and the log-L1 subgradient at an exact
depth match is taken as 0. Natural logarithm throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import TrainingTarget
from .rasters import FootprintFrame, as_binary_mask, as_depth_map, as_prob_map


@dataclass(frozen=True)
class LossConfig:
    prior_weight: float = 0.25   # lambda: pushes unseen pixels toward untraversable
    clamp_eps: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 <= self.prior_weight <= 1.0:
            raise ValueError("prior_weight must lie in [0, 1]")
        if not 0.0 < self.clamp_eps < 0.5:
            raise ValueError("clamp_eps must lie in (0, 0.5)")


@dataclass(frozen=True, eq=False)
class LossTerm:
    per_pixel: np.ndarray
    gradient: np.ndarray
    total: float


@dataclass(frozen=True, eq=False)
class LossBreakdown:
    hidden_surface: LossTerm
    visible_surface: LossTerm
    visible_depth: LossTerm
    hidden_depth: LossTerm
    total: float


def _clamp(pred: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """(clamped values, 1.0 where the clamp is inactive else 0.0)."""
    clamped = np.clip(pred, eps, 1.0 - eps)
    active = ((pred > eps) & (pred < 1.0 - eps)).astype(np.float64)
    return clamped, active


def hidden_surface_loss(pred: np.ndarray, target: TrainingTarget,
                        config: LossConfig = LossConfig()) -> LossTerm:
    """Hidden-ground classification loss over the three pixel sets.

    Moving pixels (moving_mask 0) contribute nothing inside the
    traversable set; the unknown set is weighted by prior_weight.
    """
    pred = as_prob_map(pred)
    if pred.shape != target.traversable.shape:
        raise ValueError(f"prediction shape {pred.shape} != {target.traversable.shape}")
    s, active = _clamp(pred, config.clamp_eps)
    traversable = target.traversable == 1
    untraversable = target.untraversable == 1
    unknown = ~traversable & ~untraversable
    mu = target.moving_mask.astype(np.float64)

    per_pixel = np.zeros_like(s)
    gradient = np.zeros_like(s)
    per_pixel[traversable] = -(mu * np.log(s))[traversable]
    gradient[traversable] = (-mu / s)[traversable]
    per_pixel[untraversable] = -np.log(1.0 - s)[untraversable]
    gradient[untraversable] = (1.0 / (1.0 - s))[untraversable]
    lam = config.prior_weight
    per_pixel[unknown] = (-lam * np.log(1.0 - s))[unknown]
    gradient[unknown] = (lam / (1.0 - s))[unknown]
    gradient *= active
    return LossTerm(per_pixel, gradient, float(per_pixel.sum()))


def visible_surface_loss(pred: np.ndarray, ground_mask: np.ndarray,
                         config: LossConfig = LossConfig()) -> LossTerm:
    """Binary cross-entropy of the visible-ground channel."""
    pred = as_prob_map(pred)
    ground_mask = as_binary_mask(ground_mask)
    if pred.shape != ground_mask.shape:
        raise ValueError(f"prediction shape {pred.shape} != {ground_mask.shape}")
    s, active = _clamp(pred, config.clamp_eps)
    target = ground_mask.astype(np.float64)
    per_pixel = -(target * np.log(s) + (1.0 - target) * np.log(1.0 - s))
    gradient = (-target / s + (1.0 - target) / (1.0 - s)) * active
    return LossTerm(per_pixel, gradient, float(per_pixel.sum()))


def _log_l1(pred: np.ndarray, target: np.ndarray,
            valid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    residual = pred - target
    per_pixel = np.where(valid, np.log(np.abs(residual) + 1.0), 0.0)
    gradient = np.where(valid, np.sign(residual) / (np.abs(residual) + 1.0), 0.0)
    return per_pixel, gradient


def visible_depth_loss(pred: np.ndarray, target_depth: np.ndarray) -> LossTerm:
    """log-L1 depth loss on pixels that carry a target depth."""
    pred = np.asarray(pred, dtype=np.float64)
    target_depth = as_depth_map(target_depth)
    if pred.shape != target_depth.shape:
        raise ValueError(f"prediction shape {pred.shape} != {target_depth.shape}")
    per_pixel, gradient = _log_l1(pred, target_depth, target_depth > 0)
    return LossTerm(per_pixel, gradient, float(per_pixel.sum()))


def hidden_depth_loss(pred: np.ndarray, hidden_depth: np.ndarray,
                      traversable: np.ndarray) -> LossTerm:
    """log-L1 hidden-depth loss restricted to traversable target pixels."""
    pred = np.asarray(pred, dtype=np.float64)
    hidden_depth = as_depth_map(hidden_depth)
    traversable = as_binary_mask(traversable)
    if pred.shape != hidden_depth.shape or pred.shape != traversable.shape:
        raise ValueError("prediction/target shapes differ")
    valid = (traversable == 1) & (hidden_depth > 0)
    per_pixel, gradient = _log_l1(pred, hidden_depth, valid)
    return LossTerm(per_pixel, gradient, float(per_pixel.sum()))


def total_loss(pred: FootprintFrame, target: TrainingTarget,
               config: LossConfig = LossConfig()) -> LossBreakdown:
    """Sum of the four sublosses over all pixels, with their gradients."""
    hidden_surface = hidden_surface_loss(pred.hidden_ground, target, config)
    visible_surface = visible_surface_loss(pred.visible_ground,
                                           target.visible_ground, config)
    visible_depth = visible_depth_loss(pred.visible_depth, target.visible_depth)
    hidden_depth = hidden_depth_loss(pred.hidden_depth, target.hidden_depth,
                                     target.traversable)
    total = (hidden_surface.total + visible_surface.total
             + visible_depth.total + hidden_depth.total)
    return LossBreakdown(hidden_surface, visible_surface,
                         visible_depth, hidden_depth, total)
