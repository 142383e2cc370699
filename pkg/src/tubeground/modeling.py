"""End-to-end grounding model: text encoding, cross-modal graph reasoning,
and the spatio-temporal localization heads, wired per the run configuration.

The forward pass handles a single sample (one video + one sentence); batching
is a loop over samples with a shared parameter set, which keeps variable
sentence lengths and graph sizes trivial at this scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .config import RunConfig
from .featstore import EmbeddingTable, StoreDims
from .localizer import FrameAggregator, SpatialHead, TemporalHead, Targets
from .reasoner import CrossModalFusion, GraphTensors, ReasonerStack
from .text_encoder import SentenceEncoding, TextEncoder


@dataclass
class SampleTensors:
    """Everything the model needs for one sample, precomputed once."""

    video_id: str
    tokens: list[str]
    query_type: str
    region_features: torch.Tensor   # [N, K, d_r] float32
    boxes: torch.Tensor             # [N, K, 4] float32
    valid: torch.Tensor             # [N, K] bool
    frame_features: torch.Tensor    # [N, d_f] float32
    graph: GraphTensors
    candidates: np.ndarray          # [N, P, 2] float64 (numpy; loss/decode side)
    targets: Targets | None = None

    @property
    def num_frames(self) -> int:
        return int(self.region_features.shape[0])


@dataclass
class ModelOutput:
    """Forward-pass tensors for one sample."""

    encoding: SentenceEncoding
    fused: torch.Tensor                  # [N, K, 2d]
    fusion_attention: torch.Tensor       # [N, K, L]
    layer_outputs: list[torch.Tensor]    # each [N, K, d]
    relation_coeff: torch.Tensor | None  # [51]
    frame_states: torch.Tensor           # [N, 2*frame_hidden]
    frame_attention: torch.Tensor        # [N, K]
    clip_scores: torch.Tensor            # [N, P]
    clip_offsets: torch.Tensor           # [N, P, 2]
    spatial_scores: torch.Tensor         # [N, K]

    @property
    def regions(self) -> torch.Tensor:
        """Final relation-aware region features [N, K, d]."""
        return self.layer_outputs[-1]


class GroundingModel(nn.Module):
    """Full grounding network for one feature-store geometry."""

    def __init__(self, run: RunConfig, dims: StoreDims, vocab: tuple[str, ...]):
        super().__init__()
        self.run = run
        self.dims = dims
        self.vocab = tuple(vocab)
        table = EmbeddingTable(self.vocab, dim=run.word_dim, seed=run.word_embed_seed)
        self.text = TextEncoder(table, hidden_dim=run.lang_hidden, query_mode=run.query_mode)
        d = run.model_dim
        self.region_proj = nn.Linear(dims.region_feature_dim, d)
        self.fusion = CrossModalFusion(d, self.text.feature_dim)
        self.reasoner = ReasonerStack(
            fused_dim=self.fusion.out_dim,
            dim=d,
            num_layers=run.layers,
            query_dim=self.text.query_dim,
            use_implicit=run.use_implicit,
            use_explicit=run.use_explicit,
            use_temporal=run.use_temporal,
        )
        self.aggregator = FrameAggregator(
            region_dim=d,
            query_dim=self.text.query_dim,
            frame_feature_dim=dims.frame_feature_dim,
            hidden_dim=run.frame_hidden,
        )
        self.temporal_head = TemporalHead(self.aggregator.out_dim, self.text.query_dim, len(run.widths))
        self.spatial_head = SpatialHead(d, self.text.query_dim, self.aggregator.out_dim)

    @property
    def dtype(self) -> torch.dtype:
        return self.region_proj.weight.dtype

    def forward(self, sample: SampleTensors) -> ModelOutput:
        dtype = self.dtype
        encoding = self.text(sample.tokens, sample.query_type)
        regions = self.region_proj(sample.region_features.to(dtype))
        valid = sample.valid

        fused, fusion_attn = self.fusion(regions, encoding.word_features, valid)
        m, layer_outputs, coeff = self.reasoner(
            fused, sample.boxes.to(dtype), valid, sample.graph, encoding.query
        )
        frame_states, beta = self.aggregator(
            m, sample.frame_features.to(dtype), encoding.query, valid
        )
        clip_scores, clip_offsets = self.temporal_head(frame_states, encoding.query)
        spatial_scores = self.spatial_head(m, encoding.query, frame_states)
        return ModelOutput(
            encoding=encoding,
            fused=fused,
            fusion_attention=fusion_attn,
            layer_outputs=layer_outputs,
            relation_coeff=coeff,
            frame_states=frame_states,
            frame_attention=beta,
            clip_scores=clip_scores,
            clip_offsets=clip_offsets,
            spatial_scores=spatial_scores,
        )

    def parameter_groups(self) -> dict[str, list[tuple[str, nn.Parameter]]]:
        """Named parameters bucketed by functional block (used by the
        gradient-check suite and diagnostics)."""
        groups: dict[str, list[tuple[str, nn.Parameter]]] = {}
        for name, param in self.named_parameters():
            top = name.split(".")[0]
            if top == "reasoner":
                parts = name.split(".")
                if parts[1] == "layers":
                    top = f"reasoner.layer{parts[2]}.{parts[3]}"
                else:
                    top = "reasoner.relation_head"
            groups.setdefault(top, []).append((name, param))
        return groups
