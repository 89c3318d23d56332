"""Intra-modal hypergraph construction.

One hyperedge is grown per center node by picking, inside the center's
adaptive window, the companions with the largest absolute entropy difference
to the center (the selection objective is separable, so the greedy top pick
equals exhaustive subset maximization).  Edge weights grow with the mean
entropy difference, and the assembled incidence structure is normalized into
the symmetric propagation operator used by the convolution layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .entropy import EntropyProfile, adaptive_window
from .errors import ConfigError
from .linalg import check_finite


@dataclass
class Hyperedge:
    """A center node plus its selected companions; members include the center."""

    center: int
    members: tuple[int, ...]
    weight: float


@dataclass
class Hypergraph:
    n_nodes: int
    hyperedges: list[Hyperedge]
    incidence: np.ndarray
    edge_weights: np.ndarray
    operator: np.ndarray
    n_degenerate: int = 0


def hyperedge_weight(profile: EntropyProfile, center: int, members) -> float:
    """1 + mean absolute entropy difference between the center and its companions.

    A degenerate edge with no companions weighs exactly 1.
    """
    h_center = float(profile.entropies[center])
    diffs = [abs(h_center - float(profile.entropies[j])) for j in members if j != center]
    if not diffs:
        return 1.0
    return 1.0 + float(sum(diffs) / len(diffs))


def select_hyperedge(
    profile: EntropyProfile,
    center: int,
    candidates,
    size: int,
    strategy: str = "max_diff",
    rng: np.random.Generator | None = None,
) -> Hyperedge:
    """Pick ``size - 1`` companions for ``center`` out of ``candidates``.

    ``max_diff`` keeps the candidates with the largest |H(center) - H(j)|,
    ``min_diff`` the smallest; ties break toward the smaller node index.
    ``random`` draws uniformly from the seeded generator.  When fewer than
    ``size - 1`` candidates exist the edge degrades to all of them plus the
    center rather than failing.
    """
    candidates = sorted(int(j) for j in candidates)
    k = size - 1
    if len(candidates) <= k:
        picks = candidates
    elif strategy == "max_diff":
        h_center = float(profile.entropies[center])
        picks = sorted(candidates, key=lambda j: (-abs(h_center - float(profile.entropies[j])), j))[:k]
    elif strategy == "min_diff":
        h_center = float(profile.entropies[center])
        picks = sorted(candidates, key=lambda j: (abs(h_center - float(profile.entropies[j])), j))[:k]
    elif strategy == "random":
        if rng is None:
            raise ConfigError("strategy 'random' requires a seeded random generator")
        picks = [int(j) for j in rng.choice(candidates, size=k, replace=False)]
    else:
        raise ConfigError(f"unknown hyperedge strategy {strategy!r}")
    members = tuple(sorted(set(picks) | {center}))
    return Hyperedge(center=center, members=members, weight=hyperedge_weight(profile, center, members))


def propagation_operator(incidence: np.ndarray, edge_weights: np.ndarray) -> np.ndarray:
    """Symmetrically normalized diffusion operator of a weighted hypergraph.

    Built as Dv^-1/2 H W De^-1 H^T Dv^-1/2 with unweighted vertex degrees,
    which keeps the operator linear in the edge weights.
    """
    incidence = np.asarray(incidence, dtype=np.float64)
    edge_weights = np.asarray(edge_weights, dtype=np.float64)
    dv = incidence.sum(axis=1)
    de = incidence.sum(axis=0)
    assert np.all(dv > 0), "isolated node: every node must belong to at least one hyperedge"
    assert np.all(de > 0), "empty hyperedge in incidence matrix"
    inv_sqrt_dv = 1.0 / np.sqrt(dv)
    scaled = incidence * (edge_weights / de)[None, :]
    op = (inv_sqrt_dv[:, None] * scaled) @ (incidence.T * inv_sqrt_dv[None, :])
    check_finite(op, "propagation operator")
    return op


def build_intra_hypergraph(
    profile: EntropyProfile,
    size: int,
    strategy: str = "max_diff",
    hop: int = 2,
    rng: np.random.Generator | None = None,
) -> Hypergraph:
    """Sweep every node as a center and assemble the incidence structure."""
    n = profile.n_nodes
    edges = [
        select_hyperedge(profile, c, adaptive_window(profile, c, n, hop), size, strategy, rng)
        for c in range(n)
    ]
    incidence = np.zeros((n, len(edges)), dtype=np.float64)
    weights = np.empty(len(edges), dtype=np.float64)
    n_degenerate = 0
    for e_idx, edge in enumerate(edges):
        incidence[list(edge.members), e_idx] = 1.0
        weights[e_idx] = edge.weight
        if len(edge.members) < size:
            n_degenerate += 1
    return Hypergraph(
        n_nodes=n,
        hyperedges=edges,
        incidence=incidence,
        edge_weights=weights,
        operator=propagation_operator(incidence, weights),
        n_degenerate=n_degenerate,
    )
