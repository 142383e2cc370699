"""Seeded synthetic scenes: moving objects, one timed relation, and template
sentences over a closed vocabulary.

Each sample simulates a handful of objects drifting (and bouncing) inside the
unit square. Two of them interact through an action predicate over a
sub-interval of the video; that interval is the ground-truth clip and the
queried participant's boxes form the ground-truth tube. Region features
carry object identity, participation, role, and position channels so the
grounding task is learnable from the features alone; frame features carry
the interval signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SceneConfigError
from ..featstore import FeatureStore, StoreDims, VideoFeatures
from .records import AnnotationRecord

IDENTITY_NOUNS = (
    "dog", "cat", "boy", "girl", "man", "woman", "baby", "bird",
    "horse", "car", "ball", "kite", "truck", "bike", "sheep", "duck",
)
PERSON_NOUNS = frozenset({"boy", "girl", "man", "woman", "baby"})
ACTION_PREDICATES = (
    "chases", "holds", "watches", "follows", "touches",
    "pushes", "pulls", "carries", "feeds", "rides",
)
FUNCTION_TOKENS = ("the", "is", "by", "what", "who")

DEFAULT_VOCAB = IDENTITY_NOUNS + ACTION_PREDICATES + FUNCTION_TOKENS

# Predicate-id slots 0..7 belong to the geometric stub; action predicates
# occupy the next slots of the 50-way vocabulary.
ACTION_PREDICATE_BASE = 8
ACTION_PREDICATE_IDS = {tok: ACTION_PREDICATE_BASE + i for i, tok in enumerate(ACTION_PREDICATES)}


@dataclass
class SyntheticSceneConfig:
    """Knobs for the synthetic world. ``feature_dim`` must leave room for the
    identity one-hot plus the four signal channels (active, role, x, y)."""

    num_samples: int = 20
    num_objects: int = 2
    num_regions: int = 4
    num_frames: int = 24
    feature_dim: int = 16
    frame_feature_dim: int = 8
    vocab: tuple[str, ...] = DEFAULT_VOCAB
    speed_range: tuple[float, float] = (0.005, 0.03)
    box_size_range: tuple[float, float] = (0.12, 0.28)
    relation_fraction_range: tuple[float, float] = (0.3, 0.6)
    interrogative_fraction: float = 0.5
    noise_std: float = 0.01
    distractor_noise: float = 0.25

    def validate(self) -> None:
        if self.num_objects < 2:
            raise SceneConfigError("num_objects must be >= 2 (a relation needs two participants)")
        if self.num_frames < 4:
            raise SceneConfigError("num_frames must be >= 4")
        if self.num_regions < self.num_objects:
            raise SceneConfigError("num_regions must cover every object")
        if self.feature_dim < self.num_objects + 4:
            raise SceneConfigError(
                f"feature_dim {self.feature_dim} too small to embed {self.num_objects} identities "
                f"(need >= {self.num_objects + 4})"
            )
        if self.frame_feature_dim < 4:
            raise SceneConfigError("frame_feature_dim must be >= 4")
        if self.num_samples < 1:
            raise SceneConfigError("num_samples must be >= 1")
        lo, hi = self.relation_fraction_range
        if not 0.0 < lo <= hi <= 1.0:
            raise SceneConfigError("relation_fraction_range must satisfy 0 < lo <= hi <= 1")
        if not 0.0 <= self.interrogative_fraction <= 1.0:
            raise SceneConfigError("interrogative_fraction must be in [0, 1]")
        nouns = [t for t in self.vocab if t in IDENTITY_NOUNS]
        if len(nouns) < self.num_objects:
            raise SceneConfigError("vocab holds fewer identity nouns than num_objects")
        for tok in ("the", "is", "by", "what", "who"):
            if tok not in self.vocab:
                raise SceneConfigError(f"vocab is missing the template token {tok!r}")
        if not any(t in ACTION_PREDICATES for t in self.vocab):
            raise SceneConfigError("vocab holds no action predicate")


@dataclass
class _Track:
    """One box drifting inside the unit square with wall bounces."""

    size: np.ndarray     # (w, h)
    centers: np.ndarray  # [N, 2]

    @classmethod
    def simulate(cls, rng: np.random.Generator, cfg: SyntheticSceneConfig) -> "_Track":
        w = rng.uniform(*cfg.box_size_range)
        h = rng.uniform(*cfg.box_size_range)
        lo = np.array([w / 2, h / 2])
        hi = np.array([1 - w / 2, 1 - h / 2])
        pos = rng.uniform(lo, hi)
        speed = rng.uniform(*cfg.speed_range, size=2)
        vel = speed * rng.choice([-1.0, 1.0], size=2)
        centers = np.zeros((cfg.num_frames, 2))
        for t in range(cfg.num_frames):
            centers[t] = pos
            pos = pos + vel
            for axis in range(2):
                if pos[axis] < lo[axis]:
                    pos[axis] = 2 * lo[axis] - pos[axis]
                    vel[axis] = -vel[axis]
                elif pos[axis] > hi[axis]:
                    pos[axis] = 2 * hi[axis] - pos[axis]
                    vel[axis] = -vel[axis]
        return cls(size=np.array([w, h]), centers=centers)

    def box(self, t: int) -> np.ndarray:
        return np.array([self.centers[t, 0], self.centers[t, 1], self.size[0], self.size[1]])


def _build_sentence(
    identities: list[str], subj: int, obj: int, predicate: str, target_role: str, interrogative: bool
) -> list[str]:
    wh = "who" if identities[subj if target_role == "subject" else obj] in PERSON_NOUNS else "what"
    if target_role == "subject":
        if interrogative:
            return [wh, predicate, "the", identities[obj]]
        return ["the", identities[subj], predicate, "the", identities[obj]]
    if interrogative:
        return [wh, "is", predicate, "by", "the", identities[subj]]
    return ["the", identities[obj], "is", predicate, "by", "the", identities[subj]]


def _generate_sample(
    cfg: SyntheticSceneConfig, seed: int, index: int
) -> tuple[AnnotationRecord, VideoFeatures]:
    rng = np.random.default_rng([seed, index])
    n, k, d = cfg.num_frames, cfg.num_regions, cfg.feature_dim
    m = cfg.num_objects

    noun_pool = [t for t in cfg.vocab if t in IDENTITY_NOUNS]
    identities = [str(t) for t in rng.choice(noun_pool, size=m, replace=False)]
    tracks = [_Track.simulate(rng, cfg) for _ in range(k)]  # objects first, then distractors

    # Relation between two distinct objects over a sub-interval; the interval
    # length is the configured fraction of N rounded to whole frames.
    subj, obj = (int(v) for v in rng.choice(m, size=2, replace=False))
    pred_pool = [t for t in cfg.vocab if t in ACTION_PREDICATES]
    predicate = str(rng.choice(pred_pool))
    frac = rng.uniform(*cfg.relation_fraction_range)
    length = int(np.clip(round(frac * n), 1, n))
    start = int(rng.integers(1, n - length + 2))
    clip = (start, start + length - 1)

    target_role = str(rng.choice(["subject", "object"]))
    target = subj if target_role == "subject" else obj
    interrogative = bool(rng.random() < cfg.interrogative_fraction)
    sentence = _build_sentence(identities, subj, obj, predicate, target_role, interrogative)

    # Object/distractor assignment to region slots varies per sample so slot
    # position carries no information about the target.
    perm = rng.permutation(k)
    slot_of = {entity: int(perm[entity]) for entity in range(k)}

    feats = rng.normal(0.0, cfg.noise_std, size=(n, k, d))
    boxes = np.zeros((n, k, 4))
    distractor_dirs = rng.normal(0.0, cfg.distractor_noise, size=(k - m, d))
    active_ch, role_ch, x_ch, y_ch = m, m + 1, m + 2, m + 3

    for entity in range(k):
        slot = slot_of[entity]
        track = tracks[entity]
        for t in range(n):
            boxes[t, slot] = track.box(t)
            feats[t, slot, x_ch] += track.centers[t, 0]
            feats[t, slot, y_ch] += track.centers[t, 1]
        if entity < m:
            feats[:, slot, entity] += 1.0
            if entity in (subj, obj):
                rows = slice(clip[0] - 1, clip[1])
                feats[rows, slot, active_ch] += 1.0
                feats[rows, slot, role_ch] += 1.0 if entity == subj else -1.0
        else:
            feats[:, slot, :] += distractor_dirs[entity - m]

    frame_feats = rng.normal(0.0, cfg.noise_std, size=(n, cfg.frame_feature_dim))
    frame_feats[:, 1] += np.arange(1, n + 1) / n
    frame_feats[:, 2] += 1.0
    frame_feats[clip[0] - 1 : clip[1], 0] += 1.0

    video_id = f"synth-{index:04d}"
    gt_boxes = {t: [float(v) for v in tracks[target].box(t - 1)] for t in range(clip[0], clip[1] + 1)}
    triplets = {
        t: [(slot_of[subj], ACTION_PREDICATE_IDS[predicate], slot_of[obj])]
        for t in range(clip[0], clip[1] + 1)
    }
    record = AnnotationRecord(
        video_id=video_id,
        pair_id=f"{video_id}/0",
        num_frames=n,
        sentence=sentence,
        query_type="interrogative" if interrogative else "declarative",
        gt_clip=clip,
        gt_boxes=gt_boxes,
        relation_triplets=triplets,
    )
    video = VideoFeatures(
        video_id=video_id,
        region_features=feats.astype(np.float32),
        boxes=boxes.astype(np.float32),
        valid=np.ones((n, k), dtype=bool),
        frame_features=frame_feats.astype(np.float32),
    )
    return record, video


def generate_synthetic(
    cfg: SyntheticSceneConfig, seed: int
) -> tuple[list[AnnotationRecord], FeatureStore]:
    """Generate ``cfg.num_samples`` records plus their feature store.

    Pure function of (cfg, seed): repeated calls yield bit-identical arrays
    and equal records.
    """
    cfg.validate()
    records: list[AnnotationRecord] = []
    videos: dict[str, VideoFeatures] = {}
    for index in range(cfg.num_samples):
        record, video = _generate_sample(cfg, seed, index)
        record.validate()
        records.append(record)
        videos[video.video_id] = video
    dims = StoreDims(
        region_feature_dim=cfg.feature_dim,
        frame_feature_dim=cfg.frame_feature_dim,
        regions_per_frame=cfg.num_regions,
    )
    return records, FeatureStore(dims, videos)
