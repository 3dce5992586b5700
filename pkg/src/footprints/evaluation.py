"""Segmentation metrics for the two hidden-ground protocols, plus
hidden-depth metrics.

Freespace evaluation scores the thresholded hidden-ground prediction
against the oracle mask over the whole image. Footprint evaluation
restricts to a ground region and scores the complements there, so it
measures how well object bases are carved out of the floor. Depth
evaluation reports the usual accuracy/error statistics over pixels with
a ground-truth depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rasters import as_binary_mask, as_prob_map

RATIO_DEPTH_FLOOR = 1e-3  # meters; predictions are clamped here before ratios


@dataclass(frozen=True)
class SegScores:
    tp: int
    fp: int
    fn: int
    tn: int
    iou: float
    f1: float

    @staticmethod
    def from_counts(tp: int, fp: int, fn: int, tn: int) -> "SegScores":
        denom_iou = tp + fp + fn
        denom_f1 = 2 * tp + fp + fn
        iou = tp / denom_iou if denom_iou else 0.0
        f1 = 2 * tp / denom_f1 if denom_f1 else 0.0
        return SegScores(int(tp), int(fp), int(fn), int(tn), iou, f1)


@dataclass(frozen=True)
class DepthScores:
    a1: float
    rmse: float
    abs_rel: float
    sq_rel: float


def segmentation_eval(pred: np.ndarray, gt: np.ndarray,
                      region: np.ndarray | None = None,
                      threshold: float = 0.5) -> SegScores:
    """Binary detection counts of pred >= threshold against gt, restricted
    to pixels where region is 1 (everywhere when region is None)."""
    pred = as_prob_map(pred)
    gt = as_binary_mask(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction shape {pred.shape} != {gt.shape}")
    if region is None:
        inside = np.ones(pred.shape, dtype=bool)
    else:
        region = as_binary_mask(region)
        if region.shape != pred.shape:
            raise ValueError(f"region shape {region.shape} != {pred.shape}")
        inside = region == 1
    positive = pred >= threshold
    truth = gt == 1
    tp = int(np.count_nonzero(positive & truth & inside))
    fp = int(np.count_nonzero(positive & ~truth & inside))
    fn = int(np.count_nonzero(~positive & truth & inside))
    tn = int(np.count_nonzero(~positive & ~truth & inside))
    return SegScores.from_counts(tp, fp, fn, tn)


def freespace_scores(pred: np.ndarray, gt_hidden: np.ndarray,
                     threshold: float = 0.5) -> SegScores:
    """Hidden-ground detection over the whole image."""
    return segmentation_eval(pred, gt_hidden, None, threshold)


def footprint_scores(pred: np.ndarray, gt_hidden: np.ndarray,
                     region: np.ndarray, threshold: float = 0.5) -> SegScores:
    """Object-footprint detection inside the ground region.

    The footprint class is region AND NOT hidden-ground, on both sides.
    """
    pred = as_prob_map(pred)
    gt_hidden = as_binary_mask(gt_hidden)
    region = as_binary_mask(region)
    pred_footprint = ((region == 1) & (pred < threshold)).astype(np.float64)
    gt_footprint = ((region == 1) & (gt_hidden == 0)).astype(np.uint8)
    return segmentation_eval(pred_footprint, gt_footprint, region, 0.5)


def depth_eval(pred: np.ndarray, gt: np.ndarray) -> DepthScores:
    """a1 / RMSE / abs-rel / sq-rel of predicted vs true depth.

    Valid pixels are those with gt > 0; raises when there are none. The
    prediction is clamped below at RATIO_DEPTH_FLOOR for the three
    ratio-based metrics (a1, abs_rel, sq_rel); RMSE uses it as-is.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction shape {pred.shape} != {gt.shape}")
    valid = gt > 0
    if not np.any(valid):
        raise ValueError("depth evaluation needs at least one valid pixel")
    d = gt[valid]
    d_raw = pred[valid]
    d_hat = np.maximum(d_raw, RATIO_DEPTH_FLOOR)
    ratio = np.maximum(d / d_hat, d_hat / d)
    a1 = float(np.mean(ratio < 1.25))
    rmse = float(np.sqrt(np.mean((d - d_raw) ** 2)))
    abs_rel = float(np.mean(np.abs(d - d_hat) / d))
    sq_rel = float(np.mean((d - d_hat) ** 2 / d))
    return DepthScores(a1, rmse, abs_rel, sq_rel)


def mean_seg_scores(scores: list[SegScores]) -> dict:
    """Macro average (per-image mean) of IoU and F1."""
    if not scores:
        return {"iou": 0.0, "f1": 0.0, "images": 0}
    return {"iou": float(np.mean([s.iou for s in scores])),
            "f1": float(np.mean([s.f1 for s in scores])),
            "images": len(scores)}


def mean_depth_scores(scores: list[DepthScores]) -> dict:
    if not scores:
        return {"a1": 0.0, "rmse": 0.0, "abs_rel": 0.0, "sq_rel": 0.0, "images": 0}
    return {"a1": float(np.mean([s.a1 for s in scores])),
            "rmse": float(np.mean([s.rmse for s in scores])),
            "abs_rel": float(np.mean([s.abs_rel for s in scores])),
            "sq_rel": float(np.mean([s.sq_rel for s in scores])),
            "images": len(scores)}
