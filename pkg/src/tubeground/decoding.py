"""Decode model outputs into a temporal interval and a spatial tube.

The temporal side picks the best-scoring candidate clip and applies its
regressed boundary offsets. The spatial side turns per-frame region scores
into one box per frame, either greedily or by dynamic programming over a
linking score that rewards both high region scores and smooth transitions.

Frame indices are 1-based inclusive everywhere in this module; score and box
grids are indexed ``[frame - 1, region]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import box_iou, pairwise_box_iou


@dataclass
class TubePrediction:
    """Decoded tube: a frame interval plus one region/box per frame inside it."""

    t_start: int
    t_end: int
    region_indices: dict[int, int]
    boxes: dict[int, list[float]]
    energy: float

    def __post_init__(self) -> None:
        if not 1 <= self.t_start <= self.t_end:
            raise ValueError(f"bad tube interval ({self.t_start}, {self.t_end})")
        frames = set(range(self.t_start, self.t_end + 1))
        if set(self.boxes) != frames or set(self.region_indices) != frames:
            raise ValueError("tube must carry exactly one box per frame in its interval")

    def to_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "region_indices": {str(t): i for t, i in self.region_indices.items()},
            "boxes": {str(t): [float(v) for v in b] for t, b in self.boxes.items()},
            "energy": self.energy,
        }


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def temporal_decode(
    scores: np.ndarray,
    offsets: np.ndarray,
    candidates: np.ndarray,
    num_frames: int,
) -> tuple[int, int]:
    """Pick the best candidate clip and refine its boundaries.

    Args:
        scores: [N, P] candidate confidences.
        offsets: [N, P, 2] predicted (start, end) offsets.
        candidates: [N, P, 2] candidate boundaries, possibly out of range.
        num_frames: N.

    Ties on the confidence grid go to the earlier step and then the smaller
    width (widths are ordered ascending along the last axis). The refined
    boundaries are rounded to frames and clamped to [1, N]; an inverted
    interval collapses to its center frame.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n, p = scores.shape
    flat = int(np.argmax(scores))  # first occurrence: earliest t, then smallest width
    ti, pi = divmod(flat, p)
    s, e = float(candidates[ti, pi, 0]), float(candidates[ti, pi, 1])
    ds, de = float(offsets[ti, pi, 0]), float(offsets[ti, pi, 1])
    t_s = min(max(_round_half_up(s - ds), 1), num_frames)
    t_e = min(max(_round_half_up(e - de), 1), num_frames)
    if t_s > t_e:
        center = min(max(_round_half_up((t_s + t_e) / 2.0), 1), num_frames)
        t_s = t_e = center
    return t_s, t_e


def pair_link_score(
    score_a: float,
    score_b: float,
    box_a,
    box_b,
    theta: float = 0.2,
) -> float:
    """Linking score between regions of successive frames: the two matching
    scores plus ``theta`` times the spatial overlap of their boxes."""
    return float(score_a) + float(score_b) + theta * box_iou(box_a, box_b)


def tube_energy(
    scores: np.ndarray,
    boxes: np.ndarray,
    t_start: int,
    t_end: int,
    region_indices: dict[int, int],
    theta: float = 0.2,
) -> float:
    """Energy of a fixed region sequence: mean linking score over successive
    frame pairs. A single-frame tube scores the chosen region's own score."""
    if t_start == t_end:
        return float(scores[t_start - 1, region_indices[t_start]])
    total = 0.0
    for t in range(t_start, t_end):
        i, j = region_indices[t], region_indices[t + 1]
        total += pair_link_score(
            scores[t - 1, i], scores[t, j], boxes[t - 1, i], boxes[t, j], theta
        )
    return total / (t_end - t_start)


def _check_interval(scores: np.ndarray, t_start: int, t_end: int) -> None:
    n = scores.shape[0]
    if not 1 <= t_start <= t_end <= n:
        raise ValueError(f"interval ({t_start}, {t_end}) outside [1, {n}]")


def _masked(scores_row: np.ndarray, valid_row) -> np.ndarray:
    if valid_row is None:
        return scores_row
    out = np.where(np.asarray(valid_row, dtype=bool), scores_row, -np.inf)
    if not np.isfinite(out).any():
        raise ValueError("frame has no valid region to link through")
    return out


def greedy_tube(
    scores: np.ndarray,
    boxes: np.ndarray,
    t_start: int,
    t_end: int,
    theta: float = 0.2,
    valid: np.ndarray | None = None,
) -> TubePrediction:
    """Per-frame argmax of the matching scores (ties to the lowest index)."""
    scores = np.asarray(scores, dtype=np.float64)
    boxes = np.asarray(boxes, dtype=np.float64)
    _check_interval(scores, t_start, t_end)
    indices = {}
    for t in range(t_start, t_end + 1):
        row = _masked(scores[t - 1], None if valid is None else valid[t - 1])
        indices[t] = int(np.argmax(row))
    out_boxes = {t: [float(v) for v in boxes[t - 1, i]] for t, i in indices.items()}
    energy = tube_energy(scores, boxes, t_start, t_end, indices, theta)
    return TubePrediction(t_start, t_end, indices, out_boxes, energy)


def viterbi_tube(
    scores: np.ndarray,
    boxes: np.ndarray,
    t_start: int,
    t_end: int,
    theta: float = 0.2,
    valid: np.ndarray | None = None,
) -> TubePrediction:
    """Maximal-energy region sequence over the interval via dynamic programming.

    Exact over all K^(T_e - T_s + 1) sequences; ties resolve to the
    lexicographically smallest index sequence.
    """
    scores = np.asarray(scores, dtype=np.float64)
    boxes = np.asarray(boxes, dtype=np.float64)
    _check_interval(scores, t_start, t_end)
    length = t_end - t_start + 1
    k = scores.shape[1]

    if length == 1:
        return greedy_tube(scores, boxes, t_start, t_end, theta, valid)

    # pair_cost[l][i, j]: linking score between frame t_start+l region i and
    # frame t_start+l+1 region j, with invalid regions masked to -inf.
    pair_cost = []
    for l in range(length - 1):
        t = t_start + l
        iou = pairwise_box_iou(boxes[t - 1], boxes[t])
        cost = scores[t - 1][:, None] + scores[t][None, :] + theta * iou
        if valid is not None:
            cost = np.where(np.asarray(valid[t - 1], dtype=bool)[:, None], cost, -np.inf)
            cost = np.where(np.asarray(valid[t], dtype=bool)[None, :], cost, -np.inf)
        pair_cost.append(cost)

    # best_to_go[l][i]: max total linking score from (l, i) to the last frame.
    best_to_go = np.zeros((length, k), dtype=np.float64)
    for l in range(length - 2, -1, -1):
        best_to_go[l] = np.max(pair_cost[l] + best_to_go[l + 1][None, :], axis=1)
    if not np.isfinite(best_to_go[0]).any():
        raise ValueError("no valid path through the interval")

    # Forward selection; argmax takes the first (lowest) index, which yields
    # the lexicographically smallest optimal sequence.
    indices = {t_start: int(np.argmax(best_to_go[0]))}
    for l in range(length - 1):
        prev = indices[t_start + l]
        step = pair_cost[l][prev] + best_to_go[l + 1]
        indices[t_start + l + 1] = int(np.argmax(step))

    out_boxes = {t: [float(v) for v in boxes[t - 1, i]] for t, i in indices.items()}
    energy = float(np.max(best_to_go[0])) / (t_end - t_start)
    return TubePrediction(t_start, t_end, indices, out_boxes, energy)
