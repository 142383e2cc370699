"""Cross-modal fusion and stacked spatio-temporal graph convolutions.

Each reasoning layer runs three convolutions over the region graph — an
attention-style convolution on the fully connected implicit subgraph, a
direction/label-conditioned convolution on the explicit subgraph, and a
direction-conditioned attention over each region's temporal links — then
combines them with a projected residual and a single ReLU. Layers are
stacked with unshared parameters for multi-order relation modeling.

Shapes: N frames, K regions, L words, S temporal neighbor slots. Vertices
flatten to ``frame * K + region``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .region_graph import (
    DIR_IN,
    DIR_OUT,
    DIR_SELF,
    NUM_EDGE_LABELS,
    SpatioTemporalGraph,
)

NEG_INF = float("-inf")


@dataclass
class GraphTensors:
    """Graph structure flattened into index tensors for vectorized gathers."""

    num_frames: int
    regions_per_frame: int
    # Explicit-subgraph messages: one per edge endpoint plus self-loops.
    msg_dst: torch.Tensor     # [E] flat vertex receiving the message
    msg_src: torch.Tensor     # [E] flat vertex whose feature is sent
    msg_dir: torch.Tensor     # [E] DIR_OUT / DIR_IN / DIR_SELF
    msg_label: torch.Tensor   # [E] edge label in [0, 51)
    # Temporal neighbor slots per vertex.
    temporal_target: torch.Tensor  # [N, K, S] flat vertex ids
    temporal_dir: torch.Tensor     # [N, K, S]
    temporal_mask: torch.Tensor    # [N, K, S] bool
    implicit_pairs: torch.Tensor   # [K*K, 2]

    @classmethod
    def from_graph(cls, graph: SpatioTemporalGraph) -> "GraphTensors":
        k = graph.regions_per_frame
        dst_parts, src_parts, dir_parts, label_parts = [], [], [], []
        for t, edges in enumerate(graph.explicit):
            base = t * k
            src = edges.src + base
            dst = edges.dst + base
            loops = edges.src == edges.dst
            # Self edges produce one message; proper edges one per endpoint.
            dst_parts.append(np.concatenate([src[loops], src[~loops], dst[~loops]]))
            src_parts.append(np.concatenate([dst[loops], dst[~loops], src[~loops]]))
            dir_parts.append(
                np.concatenate(
                    [
                        np.full(int(loops.sum()), DIR_SELF),
                        np.full(int((~loops).sum()), DIR_OUT),
                        np.full(int((~loops).sum()), DIR_IN),
                    ]
                )
            )
            label_parts.append(np.concatenate([edges.label[loops], edges.label[~loops], edges.label[~loops]]))
        flat_target = graph.temporal_frame * k + graph.temporal_region
        return cls(
            num_frames=graph.num_frames,
            regions_per_frame=k,
            msg_dst=torch.from_numpy(np.concatenate(dst_parts)).long(),
            msg_src=torch.from_numpy(np.concatenate(src_parts)).long(),
            msg_dir=torch.from_numpy(np.concatenate(dir_parts)).long(),
            msg_label=torch.from_numpy(np.concatenate(label_parts)).long(),
            temporal_target=torch.from_numpy(flat_target).long(),
            temporal_dir=torch.from_numpy(graph.temporal_dir).long(),
            temporal_mask=torch.from_numpy(graph.temporal_mask.copy()),
            implicit_pairs=torch.from_numpy(graph.implicit_pairs.copy()).long(),
        )


def _directional(num_dirs: int, out_dim: int, in_dim: int) -> nn.Parameter:
    weight = torch.empty(num_dirs, out_dim, in_dim)
    bound = 1.0 / math.sqrt(in_dim)
    nn.init.uniform_(weight, -bound, bound)
    return nn.Parameter(weight)


class CrossModalFusion(nn.Module):
    """Inject sentence evidence into every region.

    Additive attention over words gives each region a textual summary q; a
    sigmoid gate derived from q damps text-irrelevant region channels; the
    fused feature concatenates the gated visual feature with a projection
    of q.
    """

    def __init__(self, region_dim: int, text_dim: int):
        super().__init__()
        self.region_key = nn.Linear(region_dim, region_dim, bias=False)
        self.word_key = nn.Linear(text_dim, region_dim)  # carries the additive-attention bias
        self.score = nn.Linear(region_dim, 1, bias=False)
        self.gate = nn.Linear(text_dim, region_dim)
        self.text_proj = nn.Linear(text_dim, region_dim)
        self.out_dim = 2 * region_dim

    def forward(
        self, regions: torch.Tensor, words: torch.Tensor, valid: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """regions [N, K, d], words [L, d_s] -> fused [N, K, 2d], attention [N, K, L]."""
        joint = torch.tanh(self.region_key(regions).unsqueeze(2) + self.word_key(words))  # [N, K, L, d]
        attn = torch.softmax(self.score(joint).squeeze(-1), dim=-1)                       # [N, K, L]
        q = attn @ words                                                                  # [N, K, d_s]
        gate = torch.sigmoid(self.gate(q))
        fused = torch.cat([regions * gate, self.text_proj(q)], dim=-1)
        return fused * valid.unsqueeze(-1), attn


class ImplicitConv(nn.Module):
    """Self-attention style convolution over the fully connected frame graph;
    coefficients come from dot products of a shared projection of [feature; box]."""

    def __init__(self, in_dim: int, out_dim: int):
        super().__init__()
        self.pair_proj = nn.Linear(in_dim + 4, out_dim, bias=False)
        self.value = nn.Linear(in_dim, out_dim, bias=False)

    def forward(
        self,
        v: torch.Tensor,
        boxes: torch.Tensor,
        valid: torch.Tensor,
        pairs: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        n, k, _ = v.shape
        if pairs is not None and pairs.shape[0] != k * k:
            raise ValueError("implicit subgraph must contain every ordered pair")
        z = self.pair_proj(torch.cat([v, boxes.to(v.dtype)], dim=-1))   # [N, K, out]
        logits = torch.einsum("nid,njd->nij", z, z)
        logits = logits.masked_fill(~valid.unsqueeze(1), NEG_INF)
        alpha = torch.softmax(logits, dim=2)                            # [N, K, K]
        out = torch.einsum("nij,njd->nid", alpha, self.value(v))
        return out * valid.unsqueeze(-1), alpha


class ExplicitConv(nn.Module):
    """Directed labeled convolution: each incoming message is projected by a
    per-direction matrix, shifted by a per-label bias, and scaled by the
    sentence-conditioned coefficient of its label."""

    def __init__(self, in_dim: int, out_dim: int, num_labels: int = NUM_EDGE_LABELS):
        super().__init__()
        self.direction_weight = _directional(3, out_dim, in_dim)
        bound = 1.0 / math.sqrt(in_dim)
        self.label_bias = nn.Parameter(torch.empty(num_labels, out_dim).uniform_(-bound, bound))
        self.out_dim = out_dim

    def forward(
        self, v: torch.Tensor, g: GraphTensors, label_coeff: torch.Tensor, valid: torch.Tensor
    ) -> torch.Tensor:
        n, k, _ = v.shape
        flat = v.reshape(n * k, -1)
        out = v.new_zeros(n * k, self.out_dim)
        for d in (DIR_OUT, DIR_IN, DIR_SELF):
            sel = g.msg_dir == d
            if not bool(sel.any()):
                continue
            src, dst, lab = g.msg_src[sel], g.msg_dst[sel], g.msg_label[sel]
            msg = flat[src] @ self.direction_weight[d].T + self.label_bias[lab]
            out = out.index_add(0, dst, label_coeff[lab].unsqueeze(1) * msg)
        return out.reshape(n, k, -1) * valid.unsqueeze(-1)


class TemporalConv(nn.Module):
    """Attention over each region's temporal links with direction-conditioned
    key and value projections (forward / backward / self)."""

    def __init__(self, in_dim: int, out_dim: int):
        super().__init__()
        self.center = nn.Linear(in_dim, out_dim, bias=False)
        self.dir_key = _directional(3, out_dim, in_dim)
        self.dir_value = _directional(3, out_dim, in_dim)

    def forward(self, v: torch.Tensor, g: GraphTensors, valid: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        n, k, _ = v.shape
        nk = n * k
        s = g.temporal_target.shape[-1]
        flat = v.reshape(nk, -1)
        keys = torch.einsum("doi,ni->ndo", self.dir_key, flat)     # [NK, 3, out]
        vals = torch.einsum("doi,ni->ndo", self.dir_value, flat)
        tgt = g.temporal_target.reshape(nk, s)
        dirs = g.temporal_dir.reshape(nk, s)
        mask = g.temporal_mask.reshape(nk, s)
        nbr_keys = keys[tgt, dirs]                                  # [NK, S, out]
        nbr_vals = vals[tgt, dirs]
        logits = (self.center(flat).unsqueeze(1) * nbr_keys).sum(-1)
        logits = logits.masked_fill(~mask, NEG_INF)
        alpha = torch.softmax(logits, dim=1)                        # [NK, S]
        out = (alpha.unsqueeze(-1) * nbr_vals).sum(1).reshape(n, k, -1)
        return out * valid.unsqueeze(-1), alpha.reshape(n, k, s)


class ReasoningLayer(nn.Module):
    """One spatio-temporal convolution layer: the enabled subgraph outputs
    plus a projected residual, rectified once."""

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        use_implicit: bool = True,
        use_explicit: bool = True,
        use_temporal: bool = True,
        num_labels: int = NUM_EDGE_LABELS,
    ):
        super().__init__()
        self.implicit = ImplicitConv(in_dim, out_dim) if use_implicit else None
        self.explicit = ExplicitConv(in_dim, out_dim, num_labels) if use_explicit else None
        self.temporal = TemporalConv(in_dim, out_dim) if use_temporal else None
        self.residual = nn.Linear(in_dim, out_dim, bias=False)

    def forward(
        self,
        v: torch.Tensor,
        boxes: torch.Tensor,
        valid: torch.Tensor,
        g: GraphTensors,
        label_coeff: torch.Tensor | None,
    ) -> torch.Tensor:
        total = self.residual(v)
        if self.implicit is not None:
            total = total + self.implicit(v, boxes, valid, g.implicit_pairs)[0]
        if self.explicit is not None:
            total = total + self.explicit(v, g, label_coeff, valid)
        if self.temporal is not None:
            total = total + self.temporal(v, g, valid)[0]
        return torch.relu(total) * valid.unsqueeze(-1)


class ReasonerStack(nn.Module):
    """T stacked layers with unshared parameters.

    The 51-way label coefficients are a softmax over a linear map of the
    query vector, computed once per sentence and shared by every layer.
    """

    def __init__(
        self,
        fused_dim: int,
        dim: int,
        num_layers: int,
        query_dim: int,
        use_implicit: bool = True,
        use_explicit: bool = True,
        use_temporal: bool = True,
        num_labels: int = NUM_EDGE_LABELS,
    ):
        super().__init__()
        if num_layers < 1:
            raise ValueError("need at least one reasoning layer")
        self.relation_head = nn.Linear(query_dim, num_labels)
        self.use_explicit = use_explicit
        self.layers = nn.ModuleList(
            [
                ReasoningLayer(
                    fused_dim if i == 0 else dim,
                    dim,
                    use_implicit=use_implicit,
                    use_explicit=use_explicit,
                    use_temporal=use_temporal,
                    num_labels=num_labels,
                )
                for i in range(num_layers)
            ]
        )

    def label_coefficients(self, query: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.relation_head(query), dim=-1)

    def forward(
        self,
        fused: torch.Tensor,
        boxes: torch.Tensor,
        valid: torch.Tensor,
        g: GraphTensors,
        query: torch.Tensor,
    ) -> tuple[torch.Tensor, list[torch.Tensor], torch.Tensor | None]:
        coeff = self.label_coefficients(query) if self.use_explicit else None
        outputs = []
        v = fused
        for layer in self.layers:
            v = layer(v, boxes, valid, g, coeff)
            outputs.append(v)
        return v, outputs, coeff
