"""Shared builders for model-level tests (double precision throughout)."""

import numpy as np
import torch

from tubeground.reasoner import GraphTensors
from tubeground.region_graph import RelationSource, build_graph


def toy_scene(rng, n=3, k=3, d=5):
    feats = rng.normal(size=(n, k, d))
    boxes = np.stack(
        [
            rng.uniform(0.25, 0.75, (n, k)),
            rng.uniform(0.25, 0.75, (n, k)),
            rng.uniform(0.1, 0.3, (n, k)),
            rng.uniform(0.1, 0.3, (n, k)),
        ],
        axis=2,
    )
    return feats, boxes


def toy_graph_tensors(feats, boxes, valid=None, window=1, triplets=None, mode="annotated"):
    graph = build_graph(
        feats, boxes, valid, RelationSource(mode), annotated_triplets=triplets, window=window
    )
    return GraphTensors.from_graph(graph)


def as_double(*tensors):
    return tuple(torch.as_tensor(t, dtype=torch.float64) for t in tensors)


def softmax_np(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)
