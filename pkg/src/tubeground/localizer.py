"""Frame-level aggregation, candidate clip scoring, and the training losses.

Region features are attended into one vector per frame, concatenated with
the global frame feature, and contextualized by a bidirectional GRU. At
every step a fixed set of window widths defines candidate clips whose
confidence and boundary offsets are predicted by linear heads; a third head
scores every region against the query for the spatial side.

Losses: a soft-label cross entropy over the candidate grid (targets are the
candidates' temporal IoU with the ground-truth clip), a smooth-L1 boundary
regression on the single best-scoring candidate, and a soft-label cross
entropy over regions restricted to frames inside the ground-truth clip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .metrics import interval_iou, pairwise_box_iou

PROB_EPS = 1e-7

DEFAULT_WIDTHS = (8, 16, 32, 64, 96, 128, 164, 196)


def candidate_clips(num_frames: int, widths) -> np.ndarray:
    """Candidate boundaries [N, P, 2]: at every step t in [1, N] one clip per
    width w spanning (t - w/2, t + w/2). Boundaries are left unclamped here;
    clamping happens where intervals are compared or decoded."""
    widths = np.asarray(widths, dtype=np.float64)
    if widths.size == 0:
        raise ValueError("need at least one candidate width")
    centers = np.arange(1, num_frames + 1, dtype=np.float64)
    start = centers[:, None] - widths[None, :] / 2.0
    end = centers[:, None] + widths[None, :] / 2.0
    return np.stack([start, end], axis=2)


def clip_iou_targets(candidates: np.ndarray, gt_clip, num_frames: int) -> np.ndarray:
    """Temporal IoU of every candidate (clamped to [1, N]) with the clip."""
    n, p, _ = candidates.shape
    out = np.zeros((n, p), dtype=np.float64)
    gs, ge = float(gt_clip[0]), float(gt_clip[1])
    for t in range(n):
        for i in range(p):
            s = min(max(candidates[t, i, 0], 1.0), float(num_frames))
            e = min(max(candidates[t, i, 1], 1.0), float(num_frames))
            out[t, i] = interval_iou((s, e), (gs, ge))
    return out


def best_candidate_index(scores: np.ndarray) -> tuple[int, int]:
    """Flat argmax over the confidence grid; ties go to the earlier step and
    then the smaller width (widths run ascending along the last axis)."""
    flat = int(np.argmax(np.asarray(scores, dtype=np.float64)))
    return divmod(flat, scores.shape[1])


@dataclass
class Targets:
    """Training targets for one sample."""

    clip_iou: np.ndarray          # [N, P] soft alignment labels
    best_step: int                # argmax of the predicted confidences
    best_width: int
    delta: tuple[float, float]    # boundary offsets of the best candidate
    clip_frames: list[int]        # 1-based frames of the ground-truth clip
    spatial_iou: np.ndarray       # [len(clip_frames), K] region-vs-gt box IoU
    gt_clip: tuple[int, int]


def compute_targets(
    candidates: np.ndarray,
    gt_clip,
    region_boxes: np.ndarray,
    gt_boxes,
    predicted_scores: np.ndarray,
) -> Targets:
    """Alignment, regression, and spatial targets.

    The regressed candidate is the one the model currently scores highest;
    its offset targets are (s - gt_s, e - gt_e) on the unclamped boundaries.
    Spatial targets exist only for frames inside the ground-truth clip.
    """
    gs, ge = int(gt_clip[0]), int(gt_clip[1])
    if gs > ge:
        raise ValueError("ground-truth clip is empty")
    n = candidates.shape[0]
    ti, pi = best_candidate_index(predicted_scores)
    s, e = candidates[ti, pi]
    frames = list(range(gs, ge + 1))
    gt_arr = np.asarray([gt_boxes[t] for t in frames], dtype=np.float64)
    rows = [pairwise_box_iou(region_boxes[t - 1], gt_arr[i : i + 1])[:, 0] for i, t in enumerate(frames)]
    return Targets(
        clip_iou=clip_iou_targets(candidates, (gs, ge), n),
        best_step=ti,
        best_width=pi,
        delta=(float(s - gs), float(e - ge)),
        clip_frames=frames,
        spatial_iou=np.stack(rows, axis=0),
        gt_clip=(gs, ge),
    )


class FrameAggregator(nn.Module):
    """Query-conditioned attention over regions followed by a BiGRU over
    frames."""

    def __init__(self, region_dim: int, query_dim: int, frame_feature_dim: int, hidden_dim: int = 128):
        super().__init__()
        self.region_key = nn.Linear(region_dim, region_dim, bias=False)
        self.query_key = nn.Linear(query_dim, region_dim)  # carries the attention bias
        self.score = nn.Linear(region_dim, 1, bias=False)
        self.gru = nn.GRU(region_dim + frame_feature_dim, hidden_dim, batch_first=True, bidirectional=True)
        self.out_dim = 2 * hidden_dim

    def attend(self, regions: torch.Tensor, query: torch.Tensor, valid: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """regions [N, K, d] -> per-frame vector [N, d] and weights [N, K]."""
        joint = torch.tanh(self.region_key(regions) + self.query_key(query))
        logits = self.score(joint).squeeze(-1).masked_fill(~valid, float("-inf"))
        beta = torch.softmax(logits, dim=1)
        return torch.einsum("nk,nkd->nd", beta, regions), beta

    def forward(
        self, regions: torch.Tensor, frame_features: torch.Tensor, query: torch.Tensor, valid: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        pooled, beta = self.attend(regions, query, valid)
        seq = torch.cat([pooled, frame_features.to(pooled.dtype)], dim=1)
        out, _ = self.gru(seq.unsqueeze(0))
        return out[0], beta


class TemporalHead(nn.Module):
    """Candidate confidences (sigmoid) and boundary offsets from [h; query]."""

    def __init__(self, frame_dim: int, query_dim: int, num_widths: int):
        super().__init__()
        self.confidence = nn.Linear(frame_dim + query_dim, num_widths)
        self.offset = nn.Linear(frame_dim + query_dim, 2 * num_widths)
        self.num_widths = num_widths

    def forward(self, frames: torch.Tensor, query: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        x = torch.cat([frames, query.unsqueeze(0).expand(frames.shape[0], -1)], dim=1)
        scores = torch.sigmoid(self.confidence(x))
        offsets = self.offset(x).reshape(-1, self.num_widths, 2)
        return scores, offsets


class SpatialHead(nn.Module):
    """Per-region matching score (sigmoid) from [region; query; frame]."""

    def __init__(self, region_dim: int, query_dim: int, frame_dim: int):
        super().__init__()
        self.matcher = nn.Linear(region_dim + query_dim + frame_dim, 1)

    def forward(self, regions: torch.Tensor, query: torch.Tensor, frames: torch.Tensor) -> torch.Tensor:
        n, k, _ = regions.shape
        x = torch.cat(
            [
                regions,
                query.unsqueeze(0).unsqueeze(0).expand(n, k, -1),
                frames.unsqueeze(1).expand(n, k, -1),
            ],
            dim=2,
        )
        return torch.sigmoid(self.matcher(x)).squeeze(-1)


def smooth_l1(x: torch.Tensor) -> torch.Tensor:
    """0.5 x^2 for |x| < 1, |x| - 0.5 otherwise."""
    ax = torch.abs(x)
    return torch.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def _soft_cross_entropy(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    p = pred.clamp(PROB_EPS, 1.0 - PROB_EPS)
    return -((1.0 - target) * torch.log(1.0 - p) + target * torch.log(p))


@dataclass
class LossBreakdown:
    alignment: torch.Tensor
    regression: torch.Tensor
    spatial: torch.Tensor
    total: torch.Tensor

    def detach_floats(self) -> dict[str, float]:
        return {
            "loss_align": float(self.alignment.detach()),
            "loss_reg": float(self.regression.detach()),
            "loss_exp": float(self.spatial.detach()),
            "loss_total": float(self.total.detach()),
        }


def compute_losses(
    clip_scores: torch.Tensor,
    clip_offsets: torch.Tensor,
    spatial_scores: torch.Tensor,
    targets: Targets,
    candidates: np.ndarray,
    weights: tuple[float, float, float] = (1.0, 0.001, 1.0),
) -> LossBreakdown:
    """Alignment + regression + spatial losses and their weighted total.

    The best candidate is re-selected from the *current* confidences so the
    regression always follows the clip the model would decode; its offset
    targets are recomputed against the ground-truth boundaries.
    """
    dtype = clip_scores.dtype
    clip_target = torch.as_tensor(targets.clip_iou, dtype=dtype)
    alignment = _soft_cross_entropy(clip_scores, clip_target).mean()

    ti, pi = best_candidate_index(clip_scores.detach().cpu().numpy())
    s, e = candidates[ti, pi]
    gs, ge = targets.gt_clip
    delta_target = torch.as_tensor((float(s - gs), float(e - ge)), dtype=dtype)
    regression = smooth_l1(clip_offsets[ti, pi] - delta_target).sum()

    rows = torch.as_tensor([t - 1 for t in targets.clip_frames], dtype=torch.long)
    spatial_target = torch.as_tensor(targets.spatial_iou, dtype=dtype)
    spatial = _soft_cross_entropy(spatial_scores[rows], spatial_target).mean()

    l1, l2, l3 = weights
    total = l1 * alignment + l2 * regression + l3 * spatial
    return LossBreakdown(alignment, regression, spatial, total)
