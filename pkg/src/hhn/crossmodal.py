"""Cross-modal weighted graph: temporal-overlap edges with exponential decay weights.

Edges connect sequence and video segments whose half-open time intervals
intersect; an optional top-k cosine-similarity rule can add semantic edges.
Each directed edge (u, v) carries the weight
``exp(-(t_max - t_u + 1) / (t_max - t_min + 1))`` of its source node's start
timestamp over the union timestamp range, so later sources decay less.  The
weight deliberately ignores the neighbor's timestamp; the ``interval`` mode
replaces the numerator with ``|t_u - t_v| + 1`` for experiments where the
pairwise gap should matter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataio import SegmentNode
from .errors import ValidationError


@dataclass
class CrossGraph:
    """Bipartite adjacency over sequence block then video block, plus weights.

    ``edges`` lists directed pairs (src, dst, combined weight) in combined
    index space for every nonzero adjacency entry.
    """

    n_seq: int
    n_video: int
    adjacency: np.ndarray
    weights: np.ndarray
    edges: list[tuple[int, int, float]]

    @property
    def seq_video_mask(self) -> np.ndarray:
        return self.adjacency[: self.n_seq, self.n_seq :] > 0

    @property
    def seq_video_weights(self) -> np.ndarray:
        return self.weights[: self.n_seq, self.n_seq :]


def hawkes_weight(t_i: int, t_max: int, t_min: int) -> float:
    """Exponential-decay temporal weight of a timestamp inside [t_min, t_max]."""
    if not t_min <= t_i <= t_max:
        raise ValidationError(f"timestamp {t_i} outside range [{t_min}, {t_max}]")
    return math.exp(-(t_max - t_i + 1) / (t_max - t_min + 1))


def _intervals_overlap(a: SegmentNode, b: SegmentNode) -> bool:
    return a.t_start < b.t_end and b.t_start < a.t_end


def _cosine_prefix(a: np.ndarray, b: np.ndarray) -> float:
    # dims can differ across modalities; compare on the shared prefix
    d = min(a.shape[0], b.shape[0])
    u, v = a[:d], b[:d]
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v / (nu * nv))


def build_cross_graph(
    seq_nodes: Sequence[SegmentNode],
    video_nodes: Sequence[SegmentNode],
    semantic_topk: int | None = None,
    hawkes_mode: str = "source_timestamp",
) -> CrossGraph:
    """Connect overlapping cross-modal segment pairs and weight them temporally."""
    if not seq_nodes or not video_nodes:
        raise ValidationError("build_cross_graph needs at least one node per modality")
    n_s, n_v = len(seq_nodes), len(video_nodes)
    n = n_s + n_v
    starts = [node.t_start for node in seq_nodes] + [node.t_start for node in video_nodes]
    t_min, t_max = min(starts), max(starts)

    adjacency = np.zeros((n, n), dtype=np.float64)
    for i, s in enumerate(seq_nodes):
        for j, v in enumerate(video_nodes):
            if _intervals_overlap(s, v):
                adjacency[i, n_s + j] = 1.0
                adjacency[n_s + j, i] = 1.0

    if semantic_topk is not None:
        if semantic_topk < 1:
            raise ValidationError(f"semantic_topk must be >= 1, got {semantic_topk}")
        sims = np.array(
            [[_cosine_prefix(s.features, v.features) for v in video_nodes] for s in seq_nodes]
        )
        k_s = min(semantic_topk, n_v)
        k_v = min(semantic_topk, n_s)
        for i in range(n_s):
            top = sorted(range(n_v), key=lambda j: (-sims[i, j], j))[:k_s]
            for j in top:
                adjacency[i, n_s + j] = 1.0
                adjacency[n_s + j, i] = 1.0
        for j in range(n_v):
            top = sorted(range(n_s), key=lambda i: (-sims[i, j], i))[:k_v]
            for i in top:
                adjacency[i, n_s + j] = 1.0
                adjacency[n_s + j, i] = 1.0

    weights = np.zeros((n, n), dtype=np.float64)
    span = t_max - t_min + 1
    for u in range(n):
        for v in np.flatnonzero(adjacency[u]):
            if hawkes_mode == "source_timestamp":
                weights[u, v] = hawkes_weight(starts[u], t_max, t_min)
            elif hawkes_mode == "interval":
                weights[u, v] = math.exp(-(abs(starts[u] - starts[int(v)]) + 1) / span)
            else:
                raise ValidationError(f"unknown hawkes_mode {hawkes_mode!r}")

    edges = [
        (u, int(v), float(adjacency[u, v] * weights[u, v]))
        for u in range(n)
        for v in np.flatnonzero(adjacency[u])
    ]
    return CrossGraph(n_seq=n_s, n_video=n_v, adjacency=adjacency, weights=weights, edges=edges)
