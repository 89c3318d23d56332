"""Per-sample hybrid graph: intra-modal hypergraphs plus the cross-modal graph."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import HHNConfig
from .crossmodal import CrossGraph, build_cross_graph
from .dataio import Sample, SegmentNode
from .entropy import EntropyProfile, entropy_profile
from .hypergraph import Hypergraph, build_intra_hypergraph

THREADS_ENV = "HHN_THREADS"


@dataclass
class HybridGraph:
    """Everything the model consumes for one sample.

    ``cross_mask`` / ``cross_log_weights`` are the sequence-rows x video-cols
    views of the cross graph, precomputed because the attention layer reads
    them every forward pass.
    """

    sample_id: str
    seq_nodes: list[SegmentNode]
    video_nodes: list[SegmentNode]
    seq_features: np.ndarray | None
    video_features: np.ndarray | None
    seq_profile: EntropyProfile | None
    video_profile: EntropyProfile | None
    seq_hypergraph: Hypergraph | None
    video_hypergraph: Hypergraph | None
    cross: CrossGraph | None
    cross_mask: np.ndarray | None
    cross_log_weights: np.ndarray | None


def _stack_features(nodes: list[SegmentNode]) -> np.ndarray:
    return np.stack([n.features for n in nodes]).astype(np.float64)


def build_hybrid_graph(sample: Sample, cfg: HHNConfig, rng: np.random.Generator | None = None) -> HybridGraph:
    """Construct hypergraphs and the cross graph for one sample per the config."""
    use_seq = cfg.modality in ("combined", "seq_only")
    use_video = cfg.modality in ("combined", "video_only")

    seq_features = video_features = None
    seq_profile = video_profile = None
    seq_hg = video_hg = None
    cross = cross_mask = cross_logw = None

    if use_seq:
        seq_features = _stack_features(sample.seq_nodes)
        seq_profile = entropy_profile(sample.seq_nodes, cfg.r_min, cfg.alpha)
        seq_hg = build_intra_hypergraph(seq_profile, cfg.hyperedge_size, cfg.strategy, cfg.hop, rng)
    if use_video:
        video_features = _stack_features(sample.video_nodes)
        video_profile = entropy_profile(sample.video_nodes, cfg.r_min, cfg.alpha)
        video_hg = build_intra_hypergraph(video_profile, cfg.hyperedge_size, cfg.strategy, cfg.hop, rng)
    if cfg.modality == "combined" and cfg.cross_modal:
        cross = build_cross_graph(
            sample.seq_nodes, sample.video_nodes, cfg.semantic_topk, cfg.hawkes_mode
        )
        cross_mask = cross.seq_video_mask
        w = cross.seq_video_weights
        cross_logw = np.where(cross_mask, np.log(np.where(cross_mask, w, 1.0)), 0.0)

    return HybridGraph(
        sample_id=sample.sample_id,
        seq_nodes=sample.seq_nodes,
        video_nodes=sample.video_nodes,
        seq_features=seq_features,
        video_features=video_features,
        seq_profile=seq_profile,
        video_profile=video_profile,
        seq_hypergraph=seq_hg,
        video_hypergraph=video_hg,
        cross=cross,
        cross_mask=cross_mask,
        cross_log_weights=cross_logw,
    )


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks, os.cpu_count() or 1))


def build_dataset_graphs(
    samples: list[Sample], cfg: HHNConfig, seed: int = 0
) -> list[HybridGraph]:
    """Build every sample's graph once; parallel across samples, deterministic.

    The random-selection strategy draws from a per-sample generator derived
    from (seed, sample index), so results do not depend on scheduling.
    """

    def build_one(idx: int) -> HybridGraph:
        rng = None
        if cfg.strategy == "random":
            rng = np.random.default_rng(np.random.SeedSequence([seed, idx]))
        return build_hybrid_graph(samples[idx], cfg, rng)

    workers = worker_count(len(samples))
    if workers <= 1 or len(samples) <= 1:
        return [build_one(i) for i in range(len(samples))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(build_one, range(len(samples))))


def _hypergraph_doc(hg: Hypergraph | None) -> dict | None:
    if hg is None:
        return None
    return {
        "n_nodes": hg.n_nodes,
        "n_degenerate_edges": hg.n_degenerate,
        "hyperedges": [
            {"center": e.center, "members": list(e.members), "weight": e.weight}
            for e in hg.hyperedges
        ],
    }


def graph_to_json(g: HybridGraph) -> dict:
    """JSON-serializable document of the graph structure (operators omitted)."""
    doc: dict = {
        "schema_version": 1,
        "sample_id": g.sample_id,
        "modalities": {
            "sequence": _hypergraph_doc(g.seq_hypergraph),
            "video": _hypergraph_doc(g.video_hypergraph),
        },
        "cross_edges": [],
    }
    if g.cross is not None:
        n_s = g.cross.n_seq
        for u, v, w in g.cross.edges:
            doc["cross_edges"].append(
                {
                    "src_modality": "sequence" if u < n_s else "video",
                    "src_index": u if u < n_s else u - n_s,
                    "dst_modality": "sequence" if v < n_s else "video",
                    "dst_index": v if v < n_s else v - n_s,
                    "weight": w,
                }
            )
    return doc


def graph_to_dot(g: HybridGraph) -> str:
    """DOT rendering of the clique expansion, for eyeballing structure."""
    lines = ["graph hybrid {"]
    for prefix, hg in (("s", g.seq_hypergraph), ("v", g.video_hypergraph)):
        if hg is None:
            continue
        for i in range(hg.n_nodes):
            lines.append(f'  {prefix}{i} [label="{prefix}{i}"];')
        seen: set[tuple[str, str]] = set()
        for e in hg.hyperedges:
            for a_idx, a in enumerate(e.members):
                for b in e.members[a_idx + 1 :]:
                    key = (f"{prefix}{a}", f"{prefix}{b}")
                    if key not in seen:
                        seen.add(key)
                        lines.append(f"  {key[0]} -- {key[1]};")
    if g.cross is not None:
        n_s = g.cross.n_seq
        emitted: set[tuple[int, int]] = set()
        for u, v, w in g.cross.edges:
            a, b = min(u, v), max(u, v)
            if (a, b) in emitted:
                continue
            emitted.add((a, b))
            na = f"s{a}" if a < n_s else f"v{a - n_s}"
            nb = f"s{b}" if b < n_s else f"v{b - n_s}"
            lines.append(f'  {na} -- {nb} [style=dashed, label="{w:.3f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
