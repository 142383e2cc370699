"""Glue between records/features and the model: sample preparation, loss
computation, decoding, and dataset evaluation."""

from __future__ import annotations

import numpy as np
import torch

from .config import RunConfig
from .datakit.records import AnnotationRecord
from .decoding import TubePrediction, greedy_tube, temporal_decode, viterbi_tube
from .featstore import FeatureStore
from .localizer import LossBreakdown, candidate_clips, compute_losses, compute_targets
from .metrics import EvalReport, evaluate
from .modeling import GroundingModel, ModelOutput, SampleTensors
from .reasoner import GraphTensors
from .region_graph import RelationSource, build_graph


def prepare_sample(
    record: AnnotationRecord,
    store: FeatureStore,
    run: RunConfig,
    with_targets: bool = True,
) -> SampleTensors:
    """Slice the store, build the graph, and cache candidate/target arrays."""
    video = store.video(record.video_id)
    if record.source_frames is not None:
        rows = np.asarray([f - 1 for f in record.source_frames], dtype=np.int64)
    else:
        rows = np.arange(record.num_frames, dtype=np.int64)
        if video.num_frames != record.num_frames:
            raise ValueError(
                f"{record.video_id}: record has {record.num_frames} frames, store has {video.num_frames}"
            )
    feats = video.region_features[rows]
    boxes = video.boxes[rows]
    valid = video.valid[rows]
    frame_feats = video.frame_features[rows]
    if not valid.any(axis=1).all():
        raise ValueError(f"{record.video_id}: a frame has no valid region")

    source = RelationSource(mode=run.relation_mode)
    annotated = None
    if run.relation_mode == "annotated" and record.relation_triplets:
        annotated = {t - 1: list(trips) for t, trips in record.relation_triplets.items()}
    graph = build_graph(
        feats, boxes, valid, source,
        annotated_triplets=annotated, window=run.window, epsilon=run.epsilon,
    )

    n = record.num_frames
    cands = candidate_clips(n, run.widths)
    targets = None
    if with_targets:
        targets = compute_targets(
            cands, record.gt_clip, boxes, record.gt_boxes, np.zeros(cands.shape[:2])
        )
    return SampleTensors(
        video_id=record.video_id,
        tokens=list(record.sentence),
        query_type=record.query_type,
        region_features=torch.from_numpy(np.ascontiguousarray(feats)),
        boxes=torch.from_numpy(np.ascontiguousarray(boxes)),
        valid=torch.from_numpy(np.ascontiguousarray(valid)),
        frame_features=torch.from_numpy(np.ascontiguousarray(frame_feats)),
        graph=GraphTensors.from_graph(graph),
        candidates=cands,
        targets=targets,
    )


def prepare_dataset(
    records: list[AnnotationRecord], store: FeatureStore, run: RunConfig, with_targets: bool = True
) -> list[SampleTensors]:
    return [prepare_sample(r, store, run, with_targets) for r in records]


def sample_loss(model: GroundingModel, sample: SampleTensors, run: RunConfig) -> tuple[LossBreakdown, ModelOutput]:
    if sample.targets is None:
        raise ValueError("sample was prepared without targets")
    output = model(sample)
    losses = compute_losses(
        output.clip_scores,
        output.clip_offsets,
        output.spatial_scores,
        sample.targets,
        sample.candidates,
        weights=run.loss_weights,
    )
    return losses, output


def decode_output(
    output: ModelOutput, sample: SampleTensors, run: RunConfig, mode: str | None = None
) -> TubePrediction:
    """Turn one forward pass into a tube: best candidate + offsets for the
    interval, then greedy or dynamic region selection inside it."""
    mode = mode or run.decode
    scores = output.clip_scores.detach().cpu().double().numpy()
    offsets = output.clip_offsets.detach().cpu().double().numpy()
    spatial = output.spatial_scores.detach().cpu().double().numpy()
    n = sample.num_frames
    t_s, t_e = temporal_decode(scores, offsets, sample.candidates, n)
    boxes = sample.boxes.cpu().double().numpy()
    valid = sample.valid.cpu().numpy()
    if mode == "dynamic":
        return viterbi_tube(spatial, boxes, t_s, t_e, theta=run.theta, valid=valid)
    if mode == "greedy":
        return greedy_tube(spatial, boxes, t_s, t_e, theta=run.theta, valid=valid)
    raise ValueError(f"unknown decode mode {mode!r}")


def decode_sample(
    model: GroundingModel, sample: SampleTensors, run: RunConfig, mode: str | None = None
) -> TubePrediction:
    with torch.no_grad():
        output = model(sample)
    return decode_output(output, sample, run, mode)


def predict_dataset(
    model: GroundingModel, samples: list[SampleTensors], run: RunConfig, mode: str | None = None
) -> list[TubePrediction]:
    model.eval()
    try:
        return [decode_sample(model, s, run, mode) for s in samples]
    finally:
        model.train()


def evaluate_dataset(
    model: GroundingModel,
    samples: list[SampleTensors],
    records: list[AnnotationRecord],
    run: RunConfig,
    mode: str | None = None,
    split_by_query_type: bool = True,
) -> tuple[EvalReport, list[TubePrediction]]:
    predictions = predict_dataset(model, samples, run, mode)
    return evaluate(predictions, records, split_by_query_type=split_by_query_type), predictions
