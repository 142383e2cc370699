"""IoU-based evaluation for temporal clips and spatio-temporal tubes.

Conventions used throughout:

* Boxes are ``[x, y, w, h]`` with normalized center coordinates.
* ``interval_iou`` treats its arguments as continuous intervals
  (length ``end - start``).
* Frame ranges such as ground-truth clips and decoded tubes are 1-based
  *inclusive*; their temporal IoU is computed on the half-open spans
  ``[start, end + 1)`` so that a range of ``n`` frames has length ``n``.
  This keeps ``viou(sample) <= tiou(sample)`` for every sample, since both
  then share the same frame-set normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .datakit.records import AnnotationRecord
    from .decoding import TubePrediction

Box = Sequence[float]


def box_corners(box: Box) -> tuple[float, float, float, float]:
    """Convert a center-format box to (x1, y1, x2, y2)."""
    x, y, w, h = (float(v) for v in box)
    return x - w / 2.0, y - h / 2.0, x + w / 2.0, y + h / 2.0


def box_iou(box_a: Box, box_b: Box) -> float:
    """IoU of two center-format boxes; degenerate (zero-area) boxes give 0."""
    ax1, ay1, ax2, ay2 = box_corners(box_a)
    bx1, by1, bx2, by2 = box_corners(box_b)
    area_a = max(0.0, ax2 - ax1) * max(0.0, ay2 - ay1)
    area_b = max(0.0, bx2 - bx1) * max(0.0, by2 - by1)
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    ix = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    iy = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = ix * iy
    union = area_a + area_b - inter
    return inter / union if union > 0.0 else 0.0


def pairwise_box_iou(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """IoU matrix [len(a), len(b)] for two arrays of center-format boxes."""
    a = np.asarray(boxes_a, dtype=np.float64)
    b = np.asarray(boxes_b, dtype=np.float64)
    ax1, ay1 = a[:, 0] - a[:, 2] / 2, a[:, 1] - a[:, 3] / 2
    ax2, ay2 = a[:, 0] + a[:, 2] / 2, a[:, 1] + a[:, 3] / 2
    bx1, by1 = b[:, 0] - b[:, 2] / 2, b[:, 1] - b[:, 3] / 2
    bx2, by2 = b[:, 0] + b[:, 2] / 2, b[:, 1] + b[:, 3] / 2
    ix = np.maximum(0.0, np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(ax1[:, None], bx1[None, :]))
    iy = np.maximum(0.0, np.minimum(ay2[:, None], by2[None, :]) - np.maximum(ay1[:, None], by1[None, :]))
    inter = ix * iy
    area_a = np.maximum(0.0, ax2 - ax1) * np.maximum(0.0, ay2 - ay1)
    area_b = np.maximum(0.0, bx2 - bx1) * np.maximum(0.0, by2 - by1)
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    ok = (area_a[:, None] > 0) & (area_b[None, :] > 0) & (union > 0)
    out[ok] = inter[ok] / union[ok]
    return out


def interval_iou(interval_a: Sequence[float], interval_b: Sequence[float]) -> float:
    """IoU of two continuous intervals (start, end), end >= start.

    Two identical zero-length intervals count as a perfect match; otherwise a
    zero-length union yields 0.
    """
    s1, e1 = float(interval_a[0]), float(interval_a[1])
    s2, e2 = float(interval_b[0]), float(interval_b[1])
    inter = max(0.0, min(e1, e2) - max(s1, s2))
    union = (e1 - s1) + (e2 - s2) - inter
    if union <= 0.0:
        return 1.0 if (s1, e1) == (s2, e2) else 0.0
    return inter / union


# ``tiou`` is the public name used by evaluation code and tests.
tiou = interval_iou


def frame_range_tiou(range_a: Sequence[int], range_b: Sequence[int]) -> float:
    """Temporal IoU of two 1-based inclusive frame ranges, counted in frames."""
    return interval_iou(
        (float(range_a[0]), float(range_a[1]) + 1.0),
        (float(range_b[0]), float(range_b[1]) + 1.0),
    )


def viou(
    pred: "TubePrediction",
    gt_clip: Sequence[int],
    gt_boxes: Mapping[int, Box],
) -> float:
    """Tube IoU: per-frame box IoU summed over the temporal intersection,
    normalized by the size of the temporal union (both as frame sets)."""
    ps, pe = int(pred.t_start), int(pred.t_end)
    gs, ge = int(gt_clip[0]), int(gt_clip[1])
    union = len(range(min(ps, gs), max(pe, ge) + 1)) if max(ps, gs) <= min(pe, ge) else (
        (pe - ps + 1) + (ge - gs + 1)
    )
    inter_lo, inter_hi = max(ps, gs), min(pe, ge)
    if inter_lo > inter_hi:
        return 0.0
    total = 0.0
    for t in range(inter_lo, inter_hi + 1):
        total += box_iou(pred.boxes[t], gt_boxes[t])
    return total / union


@dataclass
class EvalReport:
    """Aggregate grounding scores over a set of samples.

    Means are ``None`` (flagged undefined) when ``sample_count`` is zero.
    """

    sample_count: int
    m_tiou: float | None
    m_viou: float | None
    viou_at_03: float | None
    viou_at_05: float | None
    by_query_type: dict[str, "EvalReport"] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "sample_count": self.sample_count,
            "m_tiou": self.m_tiou,
            "m_viou": self.m_viou,
            "viou@0.3": self.viou_at_03,
            "viou@0.5": self.viou_at_05,
        }
        if self.by_query_type:
            d["by_query_type"] = {k: v.to_dict() for k, v in self.by_query_type.items()}
        return d


def _aggregate(tious: Sequence[float], vious: Sequence[float]) -> EvalReport:
    n = len(tious)
    if n == 0:
        return EvalReport(0, None, None, None, None)
    t = np.asarray(tious, dtype=np.float64)
    v = np.asarray(vious, dtype=np.float64)
    return EvalReport(
        sample_count=n,
        m_tiou=float(t.mean()),
        m_viou=float(v.mean()),
        viou_at_03=float(np.mean(v > 0.3)),
        viou_at_05=float(np.mean(v > 0.5)),
    )


def evaluate(
    predictions: Iterable["TubePrediction"],
    records: Iterable["AnnotationRecord"],
    split_by_query_type: bool = True,
) -> EvalReport:
    """Score aligned prediction/record lists.

    ``viou@R`` uses the strict inequality ``viou > R``.
    """
    preds = list(predictions)
    recs = list(records)
    if len(preds) != len(recs):
        raise ValueError(f"got {len(preds)} predictions for {len(recs)} records")
    tious: list[float] = []
    vious: list[float] = []
    per_type: dict[str, tuple[list[float], list[float]]] = {}
    for pred, rec in zip(preds, recs):
        t = frame_range_tiou((pred.t_start, pred.t_end), rec.gt_clip)
        v = viou(pred, rec.gt_clip, rec.gt_boxes)
        tious.append(t)
        vious.append(v)
        if split_by_query_type:
            bucket = per_type.setdefault(rec.query_type, ([], []))
            bucket[0].append(t)
            bucket[1].append(v)
    report = _aggregate(tious, vious)
    if split_by_query_type:
        report.by_query_type = {k: _aggregate(ts, vs) for k, (ts, vs) in sorted(per_type.items())}
    return report
