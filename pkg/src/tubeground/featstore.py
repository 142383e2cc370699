"""Uniform access to per-frame region features, boxes, frame features, and
word embeddings.

Real detector backbones are out of scope; features come either from the
synthetic generator (in memory) or from a manifest + raw payload pair on
disk. The payload is a flat little-endian float32 array; the manifest is a
JSON document declaring dims and per-video offsets so reads are random
access and integrity-checkable. Word vectors come from a seeded embedding
table standing in for pretrained vectors.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MissingFrameError, StoreFormatError, StoreIntegrityError

MANIFEST_SCHEMA_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f4")

# Channel used by the synthetic union-pair feature to mark i != j pairs.
UNION_PAIR_MARKER = 1.0

FEATURE_ROOT_ENV = "TUBEGROUND_FEATURE_ROOT"


def union_box(box_a, box_b) -> np.ndarray:
    """Tightest center-format box containing both inputs; (i, i) is box i."""
    ax, ay, aw, ah = (float(v) for v in box_a)
    bx, by, bw, bh = (float(v) for v in box_b)
    x1 = min(ax - aw / 2, bx - bw / 2)
    y1 = min(ay - ah / 2, by - bh / 2)
    x2 = max(ax + aw / 2, bx + bw / 2)
    y2 = max(ay + ah / 2, by + bh / 2)
    return np.array([(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1], dtype=np.float32)


def union_feature(feat_a: np.ndarray, feat_b: np.ndarray, same: bool = False) -> np.ndarray:
    """Pair feature for a union region: element-wise mean of the two region
    features with the last channel overwritten by a fixed pair marker.
    The (i, i) pair returns region i's feature unchanged."""
    if same:
        return np.asarray(feat_a, dtype=np.float32).copy()
    out = (np.asarray(feat_a, dtype=np.float64) + np.asarray(feat_b, dtype=np.float64)) / 2.0
    out = out.astype(np.float32)
    out[-1] = UNION_PAIR_MARKER
    return out


@dataclass
class RegionSet:
    """Fixed-size set of region proposals for one frame.

    Always holds exactly K rows; providers yielding fewer are padded with
    zero-area regions flagged invalid, which downstream attention masks out.
    """

    frame_index: int                 # 1-based
    features: np.ndarray             # [K, d_r] float32
    boxes: np.ndarray                # [K, 4] center-format, normalized
    valid: np.ndarray                # [K] bool
    frame_feature: np.ndarray        # [d_f] float32

    @property
    def num_regions(self) -> int:
        return int(self.features.shape[0])

    def union_box(self, i: int, j: int) -> np.ndarray:
        if i == j:
            return np.asarray(self.boxes[i], dtype=np.float32).copy()
        return union_box(self.boxes[i], self.boxes[j])

    def union_feature(self, i: int, j: int) -> np.ndarray:
        return union_feature(self.features[i], self.features[j], same=i == j)

    def validate(self) -> None:
        k = self.num_regions
        if self.boxes.shape != (k, 4) or self.valid.shape != (k,):
            raise StoreFormatError("region arrays disagree on K")
        if not self.valid.any():
            raise StoreIntegrityError(f"frame {self.frame_index} has no valid region")
        vb = self.boxes[self.valid]
        if vb.size and (vb.min() < -1e-6 or vb.max() > 1 + 1e-6):
            raise StoreIntegrityError(f"frame {self.frame_index} has box coords outside [0, 1]")


DEFAULT_REGIONS_PER_FRAME = 20


def pad_regions(
    features: np.ndarray, boxes: np.ndarray, num_regions: int = DEFAULT_REGIONS_PER_FRAME
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pad a provider's regions up to K (20 by default) with invalid
    zero-area dummies."""
    got = int(features.shape[0])
    if got > num_regions:
        raise StoreFormatError(f"provider yielded {got} regions for K={num_regions}")
    dim = features.shape[1]
    out_f = np.zeros((num_regions, dim), dtype=np.float32)
    out_b = np.zeros((num_regions, 4), dtype=np.float32)
    out_v = np.zeros(num_regions, dtype=bool)
    out_f[:got] = features
    out_b[:got] = boxes
    out_v[:got] = True
    return out_f, out_b, out_v


@dataclass
class VideoFeatures:
    """All stored arrays of one video."""

    video_id: str
    region_features: np.ndarray      # [N, K, d_r] float32
    boxes: np.ndarray                # [N, K, 4] float32
    valid: np.ndarray                # [N, K] bool
    frame_features: np.ndarray       # [N, d_f] float32

    @property
    def num_frames(self) -> int:
        return int(self.region_features.shape[0])


@dataclass
class StoreDims:
    region_feature_dim: int
    frame_feature_dim: int
    regions_per_frame: int
    word_dim: int = 300


class FeatureStore:
    """Read-only random access by (video_id, frame). Safe for concurrent
    readers once constructed."""

    def __init__(self, dims: StoreDims, videos: dict[str, VideoFeatures]):
        self.dims = dims
        self._videos = dict(videos)

    @property
    def video_ids(self) -> list[str]:
        return list(self._videos)

    def num_frames(self, video_id: str) -> int:
        return self.video(video_id).num_frames

    def video(self, video_id: str) -> VideoFeatures:
        if video_id not in self._videos:
            raise MissingFrameError(f"video {video_id!r} not in store")
        return self._videos[video_id]

    def frame(self, video_id: str, frame_index: int) -> RegionSet:
        """Region bundle for a 1-based frame index."""
        vid = self.video(video_id)
        if not 1 <= frame_index <= vid.num_frames:
            raise MissingFrameError(f"frame {frame_index} outside [1, {vid.num_frames}] for {video_id!r}")
        t = frame_index - 1
        return RegionSet(
            frame_index=frame_index,
            features=vid.region_features[t],
            boxes=vid.boxes[t],
            valid=vid.valid[t],
            frame_feature=vid.frame_features[t],
        )


def get_frame_bundle(store: FeatureStore, video_id: str, frame_index: int) -> RegionSet:
    return store.frame(video_id, frame_index)


def _frame_elements(dims: StoreDims) -> int:
    k = dims.regions_per_frame
    return k * dims.region_feature_dim + k * 4 + k + dims.frame_feature_dim


def resolve_manifest_path(path: str | Path) -> Path:
    """Resolve a manifest path, trying the feature-root env var for relative
    paths that do not exist as given."""
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    root = os.environ.get(FEATURE_ROOT_ENV)
    if root and (Path(root) / p).exists():
        return Path(root) / p
    return p


def write_store(store: FeatureStore, out_dir: str | Path, basename: str = "features") -> Path:
    """Serialize a store to ``<basename>.json`` + ``<basename>.bin``.

    Byte-identical output for identical content: videos are written in sorted
    id order as little-endian float32.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload_path = out / f"{basename}.bin"
    manifest_path = out / f"{basename}.json"

    dims = store.dims
    entries = []
    offset = 0
    chunks: list[bytes] = []
    for video_id in sorted(store.video_ids):
        vid = store.video(video_id)
        n = vid.num_frames
        block = np.concatenate(
            [
                vid.region_features.reshape(n, -1),
                vid.boxes.reshape(n, -1),
                vid.valid.astype(np.float32),
                vid.frame_features.reshape(n, -1),
            ],
            axis=1,
        ).astype(PAYLOAD_DTYPE)
        chunks.append(block.tobytes())
        entries.append({"video_id": video_id, "num_frames": n, "offset": offset})
        offset += block.size
    payload_path.write_bytes(b"".join(chunks))

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "dtype": "float32",
        "endianness": "little",
        "payload_file": payload_path.name,
        "payload_elements": offset,
        "region_feature_dim": dims.region_feature_dim,
        "frame_feature_dim": dims.frame_feature_dim,
        "regions_per_frame": dims.regions_per_frame,
        "word_dim": dims.word_dim,
        "videos": entries,
    }
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest_path


def open_store(manifest_path: str | Path) -> FeatureStore:
    """Open a manifest + payload pair, verifying sizes before any access."""
    path = resolve_manifest_path(manifest_path)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise StoreFormatError(f"cannot read manifest {path}: {exc}") from exc
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise StoreFormatError(f"unsupported manifest schema_version {manifest.get('schema_version')!r}")
    if manifest.get("dtype") != "float32" or manifest.get("endianness") != "little":
        raise StoreFormatError(
            f"unsupported payload format {manifest.get('dtype')!r}/{manifest.get('endianness')!r}"
        )
    dims = StoreDims(
        region_feature_dim=int(manifest["region_feature_dim"]),
        frame_feature_dim=int(manifest["frame_feature_dim"]),
        regions_per_frame=int(manifest["regions_per_frame"]),
        word_dim=int(manifest.get("word_dim", 300)),
    )
    payload_path = path.parent / manifest["payload_file"]
    if not payload_path.exists():
        raise StoreIntegrityError(f"payload file {payload_path} missing")
    raw = np.fromfile(payload_path, dtype=PAYLOAD_DTYPE)

    per_frame = _frame_elements(dims)
    expected = sum(int(v["num_frames"]) * per_frame for v in manifest["videos"])
    if int(manifest["payload_elements"]) != expected:
        raise StoreIntegrityError("manifest payload_elements disagrees with per-video sizes")
    if raw.size != expected:
        raise StoreIntegrityError(f"payload holds {raw.size} elements, manifest declares {expected}")

    k, dr, df = dims.regions_per_frame, dims.region_feature_dim, dims.frame_feature_dim
    videos: dict[str, VideoFeatures] = {}
    last_offset = -1
    for entry in manifest["videos"]:
        offset, n = int(entry["offset"]), int(entry["num_frames"])
        if offset <= last_offset:
            raise StoreIntegrityError("manifest offsets are not monotone")
        last_offset = offset
        block = raw[offset : offset + n * per_frame].reshape(n, per_frame)
        cuts = np.cumsum([k * dr, k * 4, k])
        feats, boxes, valid, frame_feats = np.split(block, cuts, axis=1)
        videos[entry["video_id"]] = VideoFeatures(
            video_id=entry["video_id"],
            region_features=np.ascontiguousarray(feats.reshape(n, k, dr)),
            boxes=np.ascontiguousarray(boxes.reshape(n, k, 4)),
            valid=valid.reshape(n, k) > 0.5,
            frame_features=np.ascontiguousarray(frame_feats),
        )
    return FeatureStore(dims, videos)


OOV_TOKEN = "<unk>"


@dataclass
class EmbeddingTable:
    """Seeded stand-in for pretrained word vectors.

    Rows are a pure function of (vocab, dim, seed); unknown tokens map to a
    dedicated out-of-vocabulary row, so lookup never fails.
    """

    vocab: tuple[str, ...]
    dim: int = 300
    seed: int = 1234
    vectors: np.ndarray = field(init=False, repr=False)
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        rng = np.random.default_rng([self.seed, len(self.vocab), self.dim])
        self.vectors = rng.normal(0.0, 1.0 / np.sqrt(self.dim), size=(len(self.vocab) + 1, self.dim)).astype(
            np.float32
        )
        self._index = {tok: i for i, tok in enumerate(self.vocab)}

    @property
    def oov_index(self) -> int:
        return len(self.vocab)

    def token_ids(self, tokens: list[str]) -> np.ndarray:
        return np.array([self._index.get(t, self.oov_index) for t in tokens], dtype=np.int64)

    def embed(self, tokens: list[str]) -> np.ndarray:
        """One vector per token, [L, dim]; empty input gives an empty array."""
        if not tokens:
            return np.zeros((0, self.dim), dtype=np.float32)
        return self.vectors[self.token_ids(tokens)]


def embed_words(tokens: list[str], table: EmbeddingTable) -> np.ndarray:
    return table.embed(tokens)
