"""File-level orchestration used by both the service and the CLI: generate
synthetic datasets, train, evaluate, decode, and report statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .config import RunConfig
from .datakit import (
    SyntheticSceneConfig,
    dataset_stats,
    generate_synthetic,
    load_annotations,
    save_annotations,
)
from .datakit.records import StatsReport
from .decoding import TubePrediction
from .featstore import open_store, resolve_manifest_path, write_store
from .metrics import EvalReport
from .pipeline import predict_dataset, prepare_dataset
from .training import TrainResult, load_checkpoint, train


@dataclass
class GeneratedDataset:
    annotations_path: Path
    manifest_path: Path
    num_records: int
    stats: StatsReport


def generate_run(scene: SyntheticSceneConfig, seed: int, out_dir: str | Path) -> GeneratedDataset:
    """Generate a synthetic dataset and write it in the documented formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records, store = generate_synthetic(scene, seed)
    annotations_path = save_annotations(records, out / "annotations.json")
    manifest_path = write_store(store, out, basename="features")
    return GeneratedDataset(
        annotations_path=annotations_path,
        manifest_path=manifest_path,
        num_records=len(records),
        stats=dataset_stats(records),
    )


def train_run(
    run: RunConfig, annotations: str | Path, features: str | Path, out_dir: str | Path
) -> TrainResult:
    records = load_annotations(annotations)
    store = open_store(resolve_manifest_path(features))
    return train(run, records, store, out_dir=out_dir)


def _load_for_inference(checkpoint: str | Path, annotations: str | Path, features: str | Path):
    model, payload = load_checkpoint(checkpoint)
    run = RunConfig(**payload["config"])
    records = load_annotations(annotations)
    store = open_store(resolve_manifest_path(features))
    samples = prepare_dataset(records, store, run, with_targets=False)
    return model, run, records, samples


def evaluate_run(
    checkpoint: str | Path,
    annotations: str | Path,
    features: str | Path,
    decode: str | None = None,
    split_by_query_type: bool = True,
) -> EvalReport:
    from .metrics import evaluate

    model, run, records, samples = _load_for_inference(checkpoint, annotations, features)
    predictions = predict_dataset(model, samples, run, decode)
    return evaluate(predictions, records, split_by_query_type=split_by_query_type)


def decode_run(
    checkpoint: str | Path,
    annotations: str | Path,
    features: str | Path,
    decode: str | None = None,
    out_path: str | Path | None = None,
) -> list[TubePrediction]:
    model, run, records, samples = _load_for_inference(checkpoint, annotations, features)
    predictions = predict_dataset(model, samples, run, decode)
    if out_path is not None:
        doc = {
            "predictions": [
                {"video_id": r.video_id, **p.to_dict()} for r, p in zip(records, predictions)
            ]
        }
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(doc, indent=1) + "\n")
    return predictions


def stats_run(annotations: str | Path) -> StatsReport:
    return dataset_stats(load_annotations(annotations))
