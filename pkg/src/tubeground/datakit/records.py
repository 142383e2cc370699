"""Annotated samples: schema, validation, (de)serialization, statistics.

One annotation document (JSON, ``schema_version`` 1) holds one dataset split.
Frame indices are 1-based inclusive; boxes are normalized center-format
``[x, y, w, h]``. Videos longer than ``MAX_FRAMES`` are uniformly
downsampled at load time, with the surviving original frame numbers kept in
``source_frames`` so feature lookups can follow.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import AnnotationParseError, AnnotationValidationError

SCHEMA_VERSION = 1
MAX_FRAMES = 200

QUERY_TYPES = ("declarative", "interrogative")
WH_TOKENS = ("what", "who")

Triplet = tuple[int, int, int]


@dataclass
class AnnotationRecord:
    """One video / relation / sentence sample."""

    video_id: str
    num_frames: int
    sentence: list[str]
    query_type: str
    gt_clip: tuple[int, int]
    gt_boxes: dict[int, list[float]]
    relation_triplets: dict[int, list[Triplet]] | None = None
    pair_id: str = ""
    source_frames: list[int] | None = None  # original frame numbers if downsampled

    def __post_init__(self) -> None:
        if not self.pair_id:
            self.pair_id = self.video_id

    def validate(self) -> None:
        if self.num_frames < 1:
            raise AnnotationValidationError(f"{self.video_id}: num_frames must be positive")
        if not self.sentence:
            raise AnnotationValidationError(f"{self.video_id}: sentence is empty")
        if self.query_type not in QUERY_TYPES:
            raise AnnotationValidationError(f"{self.video_id}: query_type {self.query_type!r} unknown")
        s, e = self.gt_clip
        if not 1 <= s <= e <= self.num_frames:
            raise AnnotationValidationError(f"{self.video_id}: gt_clip out of range")
        if set(self.gt_boxes) != set(range(s, e + 1)):
            raise AnnotationValidationError(f"{self.video_id}: gt_boxes must cover exactly the gt_clip frames")
        for t, box in self.gt_boxes.items():
            if len(box) != 4:
                raise AnnotationValidationError(f"{self.video_id}: gt_boxes[{t}] must have 4 entries")
            x, y, w, h = box
            if not (0 <= x <= 1 and 0 <= y <= 1 and 0 < w <= 1 and 0 < h <= 1):
                raise AnnotationValidationError(f"{self.video_id}: gt_boxes[{t}] outside the unit square")
        if self.query_type == "interrogative" and not any(tok in WH_TOKENS for tok in self.sentence):
            raise AnnotationValidationError(f"{self.video_id}: interrogative sentence lacks a who/what token")
        if self.relation_triplets is not None:
            for t, triplets in self.relation_triplets.items():
                if not 1 <= t <= self.num_frames:
                    raise AnnotationValidationError(f"{self.video_id}: relation_triplets frame {t} out of range")
                for trip in triplets:
                    if len(trip) != 3:
                        raise AnnotationValidationError(f"{self.video_id}: relation triplet must have 3 entries")
        if self.source_frames is not None and len(self.source_frames) != self.num_frames:
            raise AnnotationValidationError(f"{self.video_id}: source_frames length must equal num_frames")

    def to_dict(self) -> dict:
        d = {
            "video_id": self.video_id,
            "pair_id": self.pair_id,
            "num_frames": self.num_frames,
            "sentence": list(self.sentence),
            "query_type": self.query_type,
            "gt_clip": [int(self.gt_clip[0]), int(self.gt_clip[1])],
            "gt_boxes": {str(t): [float(v) for v in b] for t, b in sorted(self.gt_boxes.items())},
        }
        if self.relation_triplets is not None:
            d["relation_triplets"] = {
                str(t): [[int(a), int(p), int(b)] for a, p, b in trips]
                for t, trips in sorted(self.relation_triplets.items())
            }
        if self.source_frames is not None:
            d["source_frames"] = [int(t) for t in self.source_frames]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationRecord":
        try:
            triplets = d.get("relation_triplets")
            if triplets is not None:
                triplets = {
                    int(t): [(int(a), int(p), int(b)) for a, p, b in trips] for t, trips in triplets.items()
                }
            return cls(
                video_id=d["video_id"],
                num_frames=int(d["num_frames"]),
                sentence=[str(t) for t in d["sentence"]],
                query_type=d["query_type"],
                gt_clip=(int(d["gt_clip"][0]), int(d["gt_clip"][1])),
                gt_boxes={int(t): [float(v) for v in b] for t, b in d["gt_boxes"].items()},
                relation_triplets=triplets,
                pair_id=d.get("pair_id", ""),
                source_frames=[int(t) for t in d["source_frames"]] if d.get("source_frames") else None,
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise AnnotationParseError(f"malformed record {d.get('video_id', '?')!r}: {exc}") from exc


def downsample_record(record: AnnotationRecord, max_frames: int = MAX_FRAMES) -> AnnotationRecord:
    """Uniformly subsample an overlong record down to ``max_frames`` frames,
    remapping the clip, boxes, and triplets onto the surviving frames."""
    n = record.num_frames
    if n <= max_frames:
        return record
    sampled = [int(np.floor(x + 0.5)) for x in np.linspace(1, n, max_frames)]
    s, e = record.gt_clip
    inside = [i for i, src in enumerate(sampled) if s <= src <= e]
    if inside:
        new_s, new_e = inside[0] + 1, inside[-1] + 1
    else:
        center = (s + e) / 2.0
        nearest = int(np.argmin([abs(src - center) for src in sampled]))
        new_s = new_e = nearest + 1
    gt_boxes = {}
    for new_t in range(new_s, new_e + 1):
        src = min(max(sampled[new_t - 1], s), e)
        gt_boxes[new_t] = list(record.gt_boxes[src])
    triplets = None
    if record.relation_triplets is not None:
        triplets = {}
        for new_t, src in enumerate(sampled, start=1):
            if src in record.relation_triplets:
                triplets[new_t] = list(record.relation_triplets[src])
    return replace(
        record,
        num_frames=max_frames,
        gt_clip=(new_s, new_e),
        gt_boxes=gt_boxes,
        relation_triplets=triplets,
        source_frames=sampled,
    )


def save_annotations(records: Sequence[AnnotationRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": SCHEMA_VERSION, "records": [r.to_dict() for r in records]}
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return path


def load_annotations(path: str | Path, max_frames: int = MAX_FRAMES) -> list[AnnotationRecord]:
    """Load, downsample, and validate one annotation document.

    Parse failures name the record index; invariant violations name the field.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise AnnotationParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise AnnotationParseError(f"{path}: expected schema_version {SCHEMA_VERSION}")
    records = []
    for idx, raw in enumerate(doc.get("records", [])):
        try:
            rec = AnnotationRecord.from_dict(raw)
        except AnnotationParseError as exc:
            raise AnnotationParseError(f"{path}: record {idx}: {exc}") from exc
        rec = downsample_record(rec, max_frames)
        try:
            rec.validate()
        except AnnotationValidationError as exc:
            raise AnnotationValidationError(f"{path}: record {idx}: {exc}") from exc
        records.append(rec)
    return records


@dataclass
class StatsReport:
    """Counts and means over one annotation collection.

    Durations are in sampled frames (the time unit of the whole package).
    An empty collection yields the all-zero report.
    """

    declarative_sentences: int = 0
    interrogative_sentences: int = 0
    total_sentences: int = 0
    video_triplet_pairs: int = 0
    mean_video_frames: float = 0.0
    mean_tube_frames: float = 0.0

    def to_dict(self) -> dict:
        return {
            "declarative_sentences": self.declarative_sentences,
            "interrogative_sentences": self.interrogative_sentences,
            "total_sentences": self.total_sentences,
            "video_triplet_pairs": self.video_triplet_pairs,
            "mean_video_frames": self.mean_video_frames,
            "mean_tube_frames": self.mean_tube_frames,
        }


def dataset_stats(records: Iterable[AnnotationRecord]) -> StatsReport:
    records = list(records)
    if not records:
        return StatsReport()
    decl = sum(1 for r in records if r.query_type == "declarative")
    inter = sum(1 for r in records if r.query_type == "interrogative")
    pairs = len({r.pair_id for r in records})
    mean_frames = float(np.mean([r.num_frames for r in records]))
    mean_tube = float(np.mean([r.gt_clip[1] - r.gt_clip[0] + 1 for r in records]))
    return StatsReport(
        declarative_sentences=decl,
        interrogative_sentences=inter,
        total_sentences=len(records),
        video_triplet_pairs=pairs,
        mean_video_frames=mean_frames,
        mean_tube_frames=mean_tube,
    )
