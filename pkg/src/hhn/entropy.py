"""Node entropy, the global mean, and the entropy-adaptive window radius.

A node's entropy is the Shannon entropy (in nats) of the softmax distribution
over its feature vector.  Softmax keeps the measure well-defined for negative
feature values and makes it invariant under adding a constant to the whole
vector.  The per-node window radius grows with the node's entropy relative to
the modality mean, so high-uncertainty nodes reach farther for hyperedge
candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataio import SegmentNode
from .errors import ValidationError
from .linalg import rowwise_softmax

PROB_FLOOR = 1e-15
MEAN_FLOOR = 1e-12


@dataclass
class EntropyProfile:
    """Per-node entropies (nats), their mean, and per-node window radii."""

    entropies: np.ndarray
    mean_entropy: float
    windows: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.entropies.shape[0])


def node_entropy(features) -> float:
    """Shannon entropy in nats of the softmax distribution over a feature vector."""
    v = np.asarray(features, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError(f"node_entropy needs a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("node_entropy: features must be finite")
    p = rowwise_softmax(v[None, :])[0]
    keep = p >= PROB_FLOOR
    return float(-(p[keep] * np.log(p[keep])).sum())


def entropy_profile(nodes: Sequence[SegmentNode], r_min: int, alpha: float) -> EntropyProfile:
    """Compute entropies, their mean, and radii floor(r_min + alpha*H/H_mean).

    When the mean entropy is numerically zero every radius falls back to
    ``r_min``.
    """
    if not nodes:
        raise ValidationError("entropy_profile needs at least one node")
    if r_min < 1:
        raise ValidationError(f"r_min must be >= 1, got {r_min}")
    if alpha < 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    entropies = np.array([node_entropy(n.features) for n in nodes], dtype=np.float64)
    mean = float(entropies.mean())
    if mean < MEAN_FLOOR:
        windows = np.full(len(nodes), r_min, dtype=np.int64)
    else:
        windows = np.array(
            [int(math.floor(r_min + alpha * h / mean)) for h in entropies], dtype=np.int64
        )
    return EntropyProfile(entropies=entropies, mean_entropy=mean, windows=windows)


def adaptive_window(profile: EntropyProfile, i: int, n_nodes: int, hop: int = 2) -> list[int]:
    """Candidate indices around node ``i``: distances hop, 2*hop, ... up to its radius.

    The window is symmetric in time, clipped to [0, n_nodes), and never
    contains the center itself.
    """
    if not 0 <= i < n_nodes:
        raise ValidationError(f"node index {i} out of range [0, {n_nodes})")
    if hop < 1:
        raise ValidationError(f"hop must be >= 1, got {hop}")
    radius = int(profile.windows[i])
    out: list[int] = []
    for dist in range(hop, radius + 1, hop):
        if i - dist >= 0:
            out.append(i - dist)
        if i + dist < n_nodes:
            out.append(i + dist)
    out.sort()
    return out
