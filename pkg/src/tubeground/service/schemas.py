"""Pydantic request/response models for the grounding service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..config import RunConfig


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class StatsModel(BaseModel):
    declarative_sentences: int
    interrogative_sentences: int
    total_sentences: int
    video_triplet_pairs: int
    mean_video_frames: float
    mean_tube_frames: float


class GenerateRequest(BaseModel):
    """Synthesize a dataset on disk (annotations + feature store)."""

    out_dir: str
    seed: int = 0
    num_samples: int = 20
    num_objects: int = 2
    num_regions: int = 4
    num_frames: int = 24
    feature_dim: int = 16
    frame_feature_dim: int = 8
    relation_fraction_min: float = 0.3
    relation_fraction_max: float = 0.6
    interrogative_fraction: float = 0.5


class GenerateResponse(BaseModel):
    annotations_path: str
    manifest_path: str
    num_records: int
    stats: StatsModel


class TrainRequest(BaseModel):
    annotations: str
    features: str
    out_dir: str
    config: RunConfig = Field(default_factory=RunConfig)


class TrainResponse(BaseModel):
    checkpoint_path: str
    metrics_path: str
    epochs_run: int
    stopped_early: bool
    checkpoint_hash: str
    final_losses: dict[str, float]


class EvalReportModel(BaseModel):
    sample_count: int
    m_tiou: float | None
    m_viou: float | None
    viou_at_03: float | None
    viou_at_05: float | None
    by_query_type: dict[str, "EvalReportModel"] = Field(default_factory=dict)


class EvalRequest(BaseModel):
    checkpoint: str
    annotations: str
    features: str
    decode: str | None = None  # "greedy" | "dynamic"; None uses the checkpoint's config
    split_by_query_type: bool = True


class EvalResponse(BaseModel):
    report: EvalReportModel


class TubeModel(BaseModel):
    video_id: str
    t_start: int
    t_end: int
    region_indices: dict[int, int]
    boxes: dict[int, list[float]]
    energy: float


class DecodeRequest(BaseModel):
    checkpoint: str
    annotations: str
    features: str
    decode: str | None = None
    out_path: str | None = None


class DecodeResponse(BaseModel):
    predictions: list[TubeModel]
    out_path: str | None = None


class StatsRequest(BaseModel):
    annotations: str


class StatsResponse(BaseModel):
    stats: StatsModel
