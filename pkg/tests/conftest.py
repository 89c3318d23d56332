"""Shared fixtures and oracle helpers for the test suite."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from hhn.config import HHNConfig, SynthSpec, TrainConfig
from hhn.dataio import Modality, Sample, SegmentNode
from hhn.entropy import EntropyProfile


def make_nodes(features: np.ndarray, kind=Modality.SEQUENCE, t_starts=None, span=100) -> list[SegmentNode]:
    """Wrap a feature matrix into nodes with strictly increasing timings."""
    n = features.shape[0]
    if t_starts is None:
        t_starts = [i * span for i in range(n)]
    return [
        SegmentNode(kind, i, int(t_starts[i]), int(t_starts[i]) + span, np.asarray(features[i], dtype=np.float64))
        for i in range(n)
    ]


def profile_from_entropies(entropies, r_min=2, windows=None) -> EntropyProfile:
    """Build a profile directly from entropy values (selection tests only need these)."""
    entropies = np.asarray(entropies, dtype=np.float64)
    if windows is None:
        windows = np.full(len(entropies), r_min, dtype=np.int64)
    return EntropyProfile(entropies=entropies, mean_entropy=float(entropies.mean()), windows=np.asarray(windows))


def brute_force_select(entropies, center: int, candidates, size: int) -> tuple[int, ...]:
    """Exhaustive subset maximization of the summed absolute entropy difference.

    Ties resolve to the lexicographically smallest sorted index tuple, which
    itertools.combinations over sorted candidates yields first.
    """
    entropies = np.asarray(entropies, dtype=np.float64)
    k = size - 1
    best_combo = None
    best_sum = -1.0
    for combo in itertools.combinations(sorted(candidates), k):
        total = sum(abs(entropies[center] - entropies[j]) for j in combo)
        if total > best_sum:
            best_sum = total
            best_combo = combo
    return tuple(sorted(set(best_combo) | {center}))


def operator_oracle(incidence: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Entrywise definitional construction of the normalized diffusion operator."""
    n, m = incidence.shape
    dv = [sum(incidence[i][e] for e in range(m)) for i in range(n)]
    de = [sum(incidence[i][e] for i in range(n)) for e in range(m)]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for e in range(m):
                acc += (
                    incidence[i][e]
                    * weights[e]
                    / de[e]
                    * incidence[j][e]
                    / (np.sqrt(dv[i]) * np.sqrt(dv[j]))
                )
            out[i, j] = acc
    return out


def ap_oracle(scores, labels) -> float:
    """Quadratic-time average precision: ranks by pairwise counting."""
    n = len(scores)
    ranks = []
    for i in range(n):
        r = 1
        for j in range(n):
            if scores[j] > scores[i] or (scores[j] == scores[i] and j < i):
                r += 1
        ranks.append(r)
    n_pos = sum(1 for y in labels if y == 1)
    total = 0.0
    for k in range(1, n + 1):
        idx = ranks.index(k)
        if labels[idx] == 1:
            hits = sum(1 for i in range(n) if labels[i] == 1 and ranks[i] <= k)
            total += hits / k
    return total / n_pos


def auc_oracle(scores, labels) -> float:
    """Quadratic-time AUC: counts positive-over-negative pairs, ties half."""
    pos = [scores[i] for i in range(len(scores)) if labels[i] == 1]
    neg = [scores[i] for i in range(len(scores)) if labels[i] == 0]
    u = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                u += 1.0
            elif sp == sn:
                u += 0.5
    return u / (len(pos) * len(neg))


@pytest.fixture
def toy_graph_setup():
    """A 6-sequence-node / 4-video-node sample with overlapping timings."""
    rng = np.random.default_rng(99)
    seq = make_nodes(rng.normal(size=(6, 5)), Modality.SEQUENCE, t_starts=[0, 100, 200, 300, 400, 500], span=150)
    video = make_nodes(rng.normal(size=(4, 7)), Modality.VIDEO, t_starts=[0, 150, 300, 450], span=150)
    labels = np.array([0.0, 1.0, 0.0])
    sample = Sample("toy", seq, video, labels)
    cfg = HHNConfig(
        n_layers=2,
        hidden_dim=6,
        hyperedge_size=3,
        hop=1,
        r_min=2,
        alpha=1.5,
        head="singlelabel_softmax",
        n_classes=3,
    ).validate()
    return sample, cfg
