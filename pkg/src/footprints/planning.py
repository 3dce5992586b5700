"""A* path planning over a predicted hidden-traversability map.

Entering pixel j costs (1 - s*_j) + eps_floor, scaled by sqrt(2) for
diagonal steps; the start pixel is free (path cost measures movement).
The floor keeps every step strictly positive: the raw 1 - s* cost would
make confidently-traversable regions free, breaking the admissibility
argument and making optimal paths non-unique. Pixels are (row, col)
raster indices.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .rasters import as_binary_mask, as_prob_map

SQRT2 = math.sqrt(2.0)

_NEIGHBORS = ((-1, -1, SQRT2), (-1, 0, 1.0), (-1, 1, SQRT2),
              (0, -1, 1.0), (0, 1, 1.0),
              (1, -1, SQRT2), (1, 0, 1.0), (1, 1, SQRT2))


@dataclass(frozen=True)
class PathResult:
    path: list[tuple[int, int]]
    total_cost: float
    failed: bool
    collision_fraction: float


def traversal_cost(hidden_ground: np.ndarray, eps_floor: float = 1e-3) -> np.ndarray:
    """Per-pixel traversal cost (1 - s*) + eps_floor."""
    if eps_floor <= 0:
        raise ValueError("eps_floor must be positive")
    return (1.0 - as_prob_map(hidden_ground)) + eps_floor


def _octile(dr: int, dc: int) -> float:
    dr, dc = abs(dr), abs(dc)
    return max(dr, dc) + (SQRT2 - 1.0) * min(dr, dc)


def plan_path(hidden_ground: np.ndarray, start: tuple[int, int],
              goal: tuple[int, int], eps_floor: float = 1e-3):
    """8-connected A* from start to goal over the cost map.

    The heuristic eps_floor * octile-distance is admissible and
    consistent because every step entering a pixel costs at least
    eps_floor (sqrt(2) * eps_floor diagonally). Heap ties break on lower
    heuristic, then row-major pixel order, for determinism. Returns
    (path as [(row, col), ...] including both endpoints, total cost).
    """
    cost = traversal_cost(hidden_ground, eps_floor)
    height, width = cost.shape
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    for name, (r, c) in (("start", start), ("goal", goal)):
        if not (0 <= r < height and 0 <= c < width):
            raise ValueError(f"{name} pixel {(r, c)} outside the {height}x{width} grid")
    if start == goal:
        raise ValueError("start and goal must differ")

    start_idx = start[0] * width + start[1]
    goal_idx = goal[0] * width + goal[1]
    g = np.full(height * width, np.inf)
    parent = np.full(height * width, -1, dtype=np.int64)
    closed = np.zeros(height * width, dtype=bool)
    g[start_idx] = 0.0
    h0 = eps_floor * _octile(start[0] - goal[0], start[1] - goal[1])
    heap = [(h0, h0, start_idx)]
    while heap:
        _, _, idx = heapq.heappop(heap)
        if closed[idx]:
            continue
        closed[idx] = True
        if idx == goal_idx:
            break
        row, col = divmod(idx, width)
        for dr, dc, diag in _NEIGHBORS:
            nr, nc = row + dr, col + dc
            if not (0 <= nr < height and 0 <= nc < width):
                continue
            nidx = nr * width + nc
            if closed[nidx]:
                continue
            tentative = g[idx] + diag * cost[nr, nc]
            if tentative < g[nidx]:
                g[nidx] = tentative
                parent[nidx] = idx
                h = eps_floor * _octile(nr - goal[0], nc - goal[1])
                heapq.heappush(heap, (tentative + h, h, nidx))

    if not np.isfinite(g[goal_idx]):
        return None  # unreachable: impossible on a finite grid with positive costs
    path = []
    idx = goal_idx
    while idx != -1:
        path.append(divmod(idx, width))
        idx = parent[idx]
    path.reverse()
    return path, float(g[goal_idx])


def path_metrics(path: list[tuple[int, int]],
                 gt_hidden: np.ndarray) -> tuple[bool, float]:
    """(failed, collision fraction) of a path against the oracle mask.

    The collision fraction is the share of path pixels on gt 0; a path
    fails if it touches any such pixel.
    """
    if not path:
        raise ValueError("path must be non-empty")
    gt_hidden = as_binary_mask(gt_hidden)
    rows = np.array([p[0] for p in path])
    cols = np.array([p[1] for p in path])
    collisions = int(np.count_nonzero(gt_hidden[rows, cols] == 0))
    fraction = collisions / len(path)
    return fraction > 0.0, fraction


def plan_and_score(hidden_ground: np.ndarray, gt_hidden: np.ndarray,
                   start: tuple[int, int], goal: tuple[int, int],
                   eps_floor: float = 1e-3) -> PathResult | None:
    planned = plan_path(hidden_ground, start, goal, eps_floor)
    if planned is None:
        return None
    path, total_cost = planned
    failed, fraction = path_metrics(path, gt_hidden)
    return PathResult(path, total_cost, failed, fraction)


def sample_episode(visible_ground: np.ndarray, hidden_ground: np.ndarray,
                   rng) -> tuple[tuple[int, int], tuple[int, int]] | None:
    """Random (start, goal): start on visible ground, goal on hidden-only
    ground (hidden 1, visible 0). None when either set is empty (e.g. an
    empty scene has no hidden ground), in which case the episode is
    skipped. rng may be a seed or a numpy Generator.
    """
    rng = np.random.default_rng(rng)
    visible_ground = as_binary_mask(visible_ground)
    hidden_ground = as_binary_mask(hidden_ground)
    starts = np.argwhere(visible_ground == 1)
    goals = np.argwhere((hidden_ground == 1) & (visible_ground == 0))
    if starts.shape[0] == 0 or goals.shape[0] == 0:
        return None
    start = starts[int(rng.integers(starts.shape[0]))]
    goal = goals[int(rng.integers(goals.shape[0]))]
    return (int(start[0]), int(start[1])), (int(goal[0]), int(goal[1]))
