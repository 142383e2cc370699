"""Construction of the spatio-temporal region graph.

Three subgraphs share the same vertex set (one vertex per region per frame):

* implicit spatial: fully connected within each frame, undirected, unlabeled;
* explicit spatial: directed within-frame edges labeled by a relation
  predicate (50 predicate labels plus a dedicated self-loop label);
* temporal dynamic: each region links to its best-matching region in every
  frame at distance 1..M, in both directions, plus a self-loop.

This module is pure numpy and independent of any learned parameters: the
graph is a fixed function of region features, boxes, and (optionally)
annotated relation triplets. Frame rows and region indices are 0-based here;
callers working with 1-based frame numbers convert at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GraphValidationError
from .metrics import box_iou, pairwise_box_iou

NUM_PREDICATES = 50
SELF_LOOP_LABEL = 50
NUM_EDGE_LABELS = 51

# Edge directions as seen from the aggregating vertex.
DIR_OUT = 0   # edge points from the vertex to the neighbor
DIR_IN = 1    # edge points from the neighbor to the vertex
DIR_SELF = 2

# Temporal edge directions.
TDIR_FORWARD = 0   # target frame is later
TDIR_BACKWARD = 1  # target frame is earlier
TDIR_SELF = 2

# Predicate slots used by the geometric relation stub; the remaining slots
# up to NUM_PREDICATES are reachable only through annotated triplets or an
# external classifier.
GEOMETRIC_PREDICATES = {
    "left_of": 0,
    "right_of": 1,
    "above": 2,
    "below": 3,
    "inside": 4,
    "contains": 5,
    "overlap": 6,
    "near": 7,
}

Triplet = tuple[int, int, int]  # (subject region, predicate id, object region)


def default_predicate_names() -> list[str]:
    """Stable names for the 50 predicate slots plus the no-relation class."""
    names = [f"predicate_{i}" for i in range(NUM_PREDICATES)]
    for name, idx in GEOMETRIC_PREDICATES.items():
        names[idx] = name
    return names + ["no_relation"]


@dataclass
class RelationSource:
    """Where explicit-graph triplets come from.

    ``annotated`` consumes triplets carried by the annotation record,
    ``geometric_stub`` derives one spatial predicate per region pair from box
    geometry, and ``external_classifier`` defers to a user-supplied callable
    ``(frame_index, features, boxes, valid) -> list[Triplet]`` (pairs with no
    relation are simply omitted).
    """

    mode: str = "annotated"
    classifier: Callable[..., list[Triplet]] | None = None
    near_threshold: float = 0.05
    predicate_names: list[str] = field(default_factory=default_predicate_names)

    def __post_init__(self) -> None:
        if self.mode not in ("annotated", "geometric_stub", "external_classifier"):
            raise GraphValidationError(f"unknown relation source mode {self.mode!r}")
        if self.mode == "external_classifier" and self.classifier is None:
            raise GraphValidationError("external_classifier mode needs a classifier callable")


def spatial_stub_predicate(box_a, box_b, near_threshold: float = 0.05) -> int:
    """Predicate id for an ordered region pair from box geometry alone.

    Containment beats overlap beats nearness beats directional predicates;
    y grows downward, so a smaller y center means "above". Swapping the two
    boxes maps left_of<->right_of, above<->below, inside<->contains.
    """
    ax, ay, aw, ah = (float(v) for v in box_a)
    bx, by, bw, bh = (float(v) for v in box_b)
    ax1, ay1, ax2, ay2 = ax - aw / 2, ay - ah / 2, ax + aw / 2, ay + ah / 2
    bx1, by1, bx2, by2 = bx - bw / 2, by - bh / 2, bx + bw / 2, by + bh / 2
    a_in_b = ax1 >= bx1 and ay1 >= by1 and ax2 <= bx2 and ay2 <= by2
    b_in_a = bx1 >= ax1 and by1 >= ay1 and bx2 <= ax2 and by2 <= ay2
    if a_in_b and b_in_a:
        return GEOMETRIC_PREDICATES["overlap"]
    if a_in_b:
        return GEOMETRIC_PREDICATES["inside"]
    if b_in_a:
        return GEOMETRIC_PREDICATES["contains"]
    if box_iou(box_a, box_b) > 0.0:
        return GEOMETRIC_PREDICATES["overlap"]
    gap_x = max(bx1 - ax2, ax1 - bx2, 0.0)
    gap_y = max(by1 - ay2, ay1 - by2, 0.0)
    if float(np.hypot(gap_x, gap_y)) < near_threshold:
        return GEOMETRIC_PREDICATES["near"]
    dx, dy = bx - ax, by - ay
    if abs(dx) >= abs(dy):
        return GEOMETRIC_PREDICATES["left_of"] if dx > 0 else GEOMETRIC_PREDICATES["right_of"]
    return GEOMETRIC_PREDICATES["above"] if dy > 0 else GEOMETRIC_PREDICATES["below"]


@dataclass
class ExplicitEdges:
    """Directed labeled edges of one frame, self-loops included."""

    src: np.ndarray
    dst: np.ndarray
    label: np.ndarray

    @property
    def num_edges(self) -> int:
        return int(self.src.shape[0])

    def non_self(self) -> np.ndarray:
        return self.src != self.dst


def build_implicit(num_regions: int) -> np.ndarray:
    """All ordered region pairs of a frame, self-pairs included: [K*K, 2]."""
    if num_regions < 1:
        raise ValueError("need at least one region")
    k = num_regions
    src = np.repeat(np.arange(k), k)
    dst = np.tile(np.arange(k), k)
    return np.stack([src, dst], axis=1)


def _validate_triplets(triplets: Sequence[Triplet], num_regions: int, valid) -> list[Triplet]:
    out = []
    for trip in triplets:
        i, p, j = int(trip[0]), int(trip[1]), int(trip[2])
        if p is None:
            continue
        if not 0 <= p < NUM_PREDICATES:
            raise GraphValidationError(f"predicate id {p} outside [0, {NUM_PREDICATES})")
        for r in (i, j):
            if not 0 <= r < num_regions:
                raise GraphValidationError(f"region reference {r} outside [0, {num_regions})")
            if valid is not None and not valid[r]:
                raise GraphValidationError(f"triplet references padding region {r}")
        out.append((i, p, j))
    return out


def build_explicit(
    boxes: np.ndarray,
    valid: np.ndarray | None,
    source: RelationSource,
    annotated_triplets: Sequence[Triplet] | None = None,
    frame_index: int = 0,
    features: np.ndarray | None = None,
) -> ExplicitEdges:
    """Explicit edges of one frame: one directed labeled edge per relation
    triplet plus a self-loop (label ``SELF_LOOP_LABEL``) on every vertex."""
    k = int(np.asarray(boxes).shape[0])
    if source.mode == "annotated":
        triplets = _validate_triplets(annotated_triplets or [], k, valid)
    elif source.mode == "geometric_stub":
        triplets = []
        for i in range(k):
            if valid is not None and not valid[i]:
                continue
            for j in range(i + 1, k):
                if valid is not None and not valid[j]:
                    continue
                triplets.append((i, spatial_stub_predicate(boxes[i], boxes[j], source.near_threshold), j))
    else:  # external_classifier
        raw = source.classifier(frame_index, features, boxes, valid)
        triplets = _validate_triplets(raw, k, valid)

    src = [i for i, _, _ in triplets] + list(range(k))
    dst = [j for _, _, j in triplets] + list(range(k))
    label = [p for _, p, _ in triplets] + [SELF_LOOP_LABEL] * k
    return ExplicitEdges(
        src=np.asarray(src, dtype=np.int64),
        dst=np.asarray(dst, dtype=np.int64),
        label=np.asarray(label, dtype=np.int64),
    )


def temporal_link_score(feat_a, box_a, feat_b, box_b, dt: int, epsilon: float = 0.8) -> float:
    """Cross-frame linking score: cosine feature similarity plus a box-overlap
    term damped by the frame distance. Zero-norm features contribute cosine 0."""
    if dt < 1:
        raise ValueError("dt must be >= 1")
    a = np.asarray(feat_a, dtype=np.float64)
    b = np.asarray(feat_b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    cos = float(a @ b / (na * nb)) if na > 0 and nb > 0 else 0.0
    return cos + (epsilon / dt) * box_iou(box_a, box_b)


def build_temporal(
    features: np.ndarray,
    boxes: np.ndarray,
    valid: np.ndarray | None,
    window: int,
    epsilon: float = 0.8,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Best-match temporal links for every region.

    For each region of frame t and each frame k with 1 <= |k - t| <= window,
    the single region of frame k with the highest linking score is selected
    (score ties go to the lower region index; padding regions are skipped as
    targets when a frame has any valid region). Every region also gets a
    self-loop, so interior regions carry exactly 2*window + 1 edges.

    Returns neighbor-slot tensors shaped [N, K, 2*window + 1]:
    target frame, target region, direction id, and a validity mask. Slot
    ``window + d`` holds the link to frame ``t + d`` (d in [-window, window]).
    """
    feats = np.asarray(features, dtype=np.float64)
    bxs = np.asarray(boxes, dtype=np.float64)
    n, k = feats.shape[0], feats.shape[1]
    norms = np.linalg.norm(feats, axis=2, keepdims=True)
    unit = np.divide(feats, norms, out=np.zeros_like(feats), where=norms > 0)

    n_slots = 2 * window + 1
    tgt_frame = np.zeros((n, k, n_slots), dtype=np.int64)
    tgt_region = np.zeros((n, k, n_slots), dtype=np.int64)
    dirs = np.full((n, k, n_slots), TDIR_SELF, dtype=np.int64)
    mask = np.zeros((n, k, n_slots), dtype=bool)

    # Self-loop slot (delta 0).
    tgt_frame[:, :, window] = np.arange(n)[:, None]
    tgt_region[:, :, window] = np.arange(k)[None, :]
    mask[:, :, window] = True

    for t in range(n):
        for delta in range(-window, window + 1):
            if delta == 0:
                continue
            kframe = t + delta
            if not 0 <= kframe < n:
                continue
            scores = unit[t] @ unit[kframe].T  # [K, K] cosine
            scores = scores + (epsilon / abs(delta)) * pairwise_box_iou(bxs[t], bxs[kframe])
            if valid is not None and np.asarray(valid[kframe]).any():
                scores = np.where(np.asarray(valid[kframe], dtype=bool)[None, :], scores, -np.inf)
            best = np.argmax(scores, axis=1)  # first max: lowest region index
            slot = window + delta
            tgt_frame[t, :, slot] = kframe
            tgt_region[t, :, slot] = best
            dirs[t, :, slot] = TDIR_FORWARD if delta > 0 else TDIR_BACKWARD
            mask[t, :, slot] = True
    return tgt_frame, tgt_region, dirs, mask


@dataclass
class SpatioTemporalGraph:
    """Vertex set (frame, region) plus the three edge structures."""

    num_frames: int
    regions_per_frame: int
    window: int
    implicit_pairs: np.ndarray            # [K*K, 2], shared by every frame
    explicit: list[ExplicitEdges]         # one entry per frame
    temporal_frame: np.ndarray            # [N, K, 2M+1]
    temporal_region: np.ndarray           # [N, K, 2M+1]
    temporal_dir: np.ndarray              # [N, K, 2M+1]
    temporal_mask: np.ndarray             # [N, K, 2M+1] bool

    def implicit_edge_count(self) -> int:
        """Ordered within-frame pairs per frame, self-pairs included."""
        return int(self.implicit_pairs.shape[0])

    def temporal_edge_count(self, frame: int, region: int) -> int:
        return int(self.temporal_mask[frame, region].sum())

    def validate(self) -> None:
        k = self.regions_per_frame
        if self.implicit_edge_count() != k * k:
            raise GraphValidationError("implicit subgraph must contain all ordered pairs")
        for t, edges in enumerate(self.explicit):
            if np.any(edges.label >= NUM_EDGE_LABELS) or np.any(edges.label < 0):
                raise GraphValidationError(f"explicit label out of range in frame {t}")
            loops = (edges.src == edges.dst) & (edges.label == SELF_LOOP_LABEL)
            if np.unique(edges.src[loops]).size != k:
                raise GraphValidationError(f"frame {t} is missing explicit self-loops")
        span = np.abs(self.temporal_frame - np.arange(self.num_frames)[:, None, None])
        if int(span[self.temporal_mask].max(initial=0)) > self.window:
            raise GraphValidationError("temporal edge spans more than the window")


def build_graph(
    features: np.ndarray,
    boxes: np.ndarray,
    valid: np.ndarray | None,
    source: RelationSource,
    annotated_triplets: dict[int, list[Triplet]] | None = None,
    window: int = 5,
    epsilon: float = 0.8,
) -> SpatioTemporalGraph:
    """Assemble all three subgraphs for one video.

    ``annotated_triplets`` maps 0-based frame rows to triplet lists and is
    only consulted in ``annotated`` mode.
    """
    n, k = np.asarray(features).shape[0], np.asarray(features).shape[1]
    explicit = []
    for t in range(n):
        trips = (annotated_triplets or {}).get(t, []) if source.mode == "annotated" else None
        explicit.append(
            build_explicit(
                boxes[t],
                None if valid is None else valid[t],
                source,
                annotated_triplets=trips,
                frame_index=t,
                features=np.asarray(features)[t],
            )
        )
    tf, tr, td, tm = build_temporal(features, boxes, valid, window, epsilon)
    graph = SpatioTemporalGraph(
        num_frames=n,
        regions_per_frame=k,
        window=window,
        implicit_pairs=build_implicit(k),
        explicit=explicit,
        temporal_frame=tf,
        temporal_region=tr,
        temporal_dir=td,
        temporal_mask=tm,
    )
    graph.validate()
    return graph
