"""Training loop, checkpointing, and determinism helpers.

Single-worker, single-thread training: parameters update by Adam (bias-
corrected first/second moment estimates) on the mean per-sample loss of each
batch, with global-norm gradient clipping. Runs are reproducible bit-for-bit
under a fixed seed; checkpoints round-trip exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig
from .datakit.records import AnnotationRecord
from .errors import CheckpointError, TrainingDivergedError
from .featstore import FeatureStore, StoreDims
from .modeling import GroundingModel, SampleTensors
from .pipeline import evaluate_dataset, prepare_dataset, sample_loss

CHECKPOINT_VERSION = 1


def checkpoint_hash(model: GroundingModel) -> str:
    """SHA-256 over every parameter's name, shape, dtype, and raw bytes."""
    digest = hashlib.sha256()
    for name, param in sorted(model.state_dict().items()):
        digest.update(name.encode())
        digest.update(str(tuple(param.shape)).encode())
        digest.update(str(param.dtype).encode())
        digest.update(param.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def config_hash(run: RunConfig) -> str:
    return hashlib.sha256(json.dumps(run.model_dump(), sort_keys=True).encode()).hexdigest()


def save_checkpoint(
    model: GroundingModel,
    path: str | Path,
    optimizer: torch.optim.Optimizer | None = None,
    step: int = 0,
    epoch: int = 0,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": model.run.model_dump(),
        "config_hash": config_hash(model.run),
        "dims": {
            "region_feature_dim": model.dims.region_feature_dim,
            "frame_feature_dim": model.dims.frame_feature_dim,
            "regions_per_frame": model.dims.regions_per_frame,
            "word_dim": model.dims.word_dim,
        },
        "vocab": list(model.vocab),
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "step": step,
        "epoch": epoch,
        "precision": model.run.precision,
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: str | Path) -> tuple[GroundingModel, dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:  # torch raises a mix of types here
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')!r}")
    run = RunConfig(**payload["config"])
    dims = StoreDims(**payload["dims"])
    model = GroundingModel(run, dims, tuple(payload["vocab"]))
    if run.precision == "float64":
        model.double()
    try:
        model.load_state_dict(payload["model_state"])
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint/config shape mismatch: {exc}") from exc
    model.eval()
    return model, payload


def _first_non_finite(model: GroundingModel, losses) -> str:
    for name, value in losses.detach_floats().items():
        if not np.isfinite(value):
            return name
    for name, param in model.named_parameters():
        if param.grad is not None and not torch.isfinite(param.grad).all():
            return f"grad/{name}"
        if not torch.isfinite(param).all():
            return f"param/{name}"
    return "loss_total"


@dataclass
class TrainResult:
    model: GroundingModel
    history: list[dict] = field(default_factory=list)
    epochs_run: int = 0
    final_hash: str = ""
    checkpoint_path: Path | None = None
    metrics_path: Path | None = None
    stopped_early: bool = False


def train(
    run: RunConfig,
    records: list[AnnotationRecord],
    store: FeatureStore,
    out_dir: str | Path | None = None,
) -> TrainResult:
    """Fit a fresh model on the given records.

    Logs one record per epoch (plus periodic training-set grounding metrics
    when ``eval_every`` is set); stops early once both ``stop_m_tiou`` and
    ``stop_m_viou`` are reached. Deterministic for a fixed config.
    """
    torch.manual_seed(run.seed)
    torch.set_num_threads(1)

    model = GroundingModel(run, store.dims, _vocab_for(records, store))
    if run.precision == "float64":
        model.double()
    samples = prepare_dataset(records, store, run, with_targets=True)
    optimizer = torch.optim.Adam(model.parameters(), lr=run.learning_rate)
    shuffle_rng = np.random.default_rng(run.seed)

    result = TrainResult(model=model)
    step = 0
    for epoch in range(1, run.epochs + 1):
        order = shuffle_rng.permutation(len(samples))
        epoch_sums = {"loss_align": 0.0, "loss_reg": 0.0, "loss_exp": 0.0, "loss_total": 0.0}
        for start in range(0, len(order), run.batch_size):
            batch = [samples[i] for i in order[start : start + run.batch_size]]
            optimizer.zero_grad()
            batch_losses = []
            for sample in batch:
                losses, _ = sample_loss(model, sample, run)
                batch_losses.append(losses)
            total = torch.stack([l.total for l in batch_losses]).mean()
            if not torch.isfinite(total):
                bad = _first_non_finite(model, batch_losses[0])
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch} step {step}: first bad tensor {bad}")
            total.backward()
            if run.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), run.grad_clip)
            optimizer.step()
            step += 1
            for l in batch_losses:
                for key, value in l.detach_floats().items():
                    epoch_sums[key] += value / len(samples)
        entry = {"epoch": epoch, "step": step, **{k: round(v, 6) for k, v in epoch_sums.items()}}

        if run.eval_every and (epoch % run.eval_every == 0 or epoch == run.epochs):
            report, _ = evaluate_dataset(model, samples, records, run, split_by_query_type=False)
            entry["train_m_tiou"] = round(report.m_tiou, 4)
            entry["train_m_viou"] = round(report.m_viou, 4)
            result.history.append(entry)
            if (
                run.stop_m_tiou is not None
                and run.stop_m_viou is not None
                and report.m_tiou >= run.stop_m_tiou
                and report.m_viou >= run.stop_m_viou
            ):
                result.stopped_early = True
                result.epochs_run = epoch
                break
        else:
            result.history.append(entry)
        result.epochs_run = epoch

    result.final_hash = checkpoint_hash(model)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.checkpoint_path = save_checkpoint(
            model, out / "checkpoint.pt", optimizer=optimizer, step=step, epoch=result.epochs_run
        )
        result.metrics_path = out / "metrics.jsonl"
        with result.metrics_path.open("w") as fh:
            for entry in result.history:
                fh.write(json.dumps(entry) + "\n")
    model.eval()
    return result


def _vocab_for(records: list[AnnotationRecord], store: FeatureStore) -> tuple[str, ...]:
    """Model vocabulary: the closed synthetic vocabulary plus anything the
    records actually use, in deterministic order."""
    from .datakit.synthetic import DEFAULT_VOCAB

    seen = set(DEFAULT_VOCAB)
    extra = sorted({tok for r in records for tok in r.sentence} - seen)
    return tuple(DEFAULT_VOCAB) + tuple(extra)
