import json

import numpy as np

from hhn.config import HHNConfig
from hhn.hybrid import build_dataset_graphs, build_hybrid_graph, graph_to_dot, graph_to_json
from hhn.synth import generate_samples
from hhn.config import SynthSpec


def _samples(n=3, mode="xor_crossmodal"):
    return generate_samples(
        SynthSpec(n_samples=n, n_classes=2, seq_nodes=10, video_nodes=5, seq_dim=6,
                  video_dim=7, mode=mode, noise_sigma=0.5, seed=2)
    )


def _cfg(**kw):
    base = dict(n_layers=2, hidden_dim=8, hyperedge_size=3, hop=1, r_min=2, alpha=1.0, n_classes=2)
    base.update(kw)
    return HHNConfig(**base).validate()


class TestBuildHybridGraph:
    def test_combined_builds_everything(self):
        g = build_hybrid_graph(_samples()[0], _cfg())
        assert g.seq_hypergraph is not None and g.video_hypergraph is not None
        assert g.cross is not None
        assert g.cross_mask.shape == (10, 5)
        assert g.cross_log_weights[g.cross_mask].max() <= 0.0  # log of (0,1] weights

    def test_seq_only_skips_video(self):
        g = build_hybrid_graph(_samples()[0], _cfg(modality="seq_only"))
        assert g.video_hypergraph is None and g.cross is None
        assert g.seq_features.shape == (10, 6)

    def test_cross_modal_off(self):
        g = build_hybrid_graph(_samples()[0], _cfg(cross_modal=False))
        assert g.cross is None and g.cross_mask is None
        assert g.seq_hypergraph is not None and g.video_hypergraph is not None

    def test_dataset_graphs_deterministic_with_random_strategy(self):
        samples = _samples(4)
        cfg = _cfg(strategy="random")
        a = build_dataset_graphs(samples, cfg, seed=3)
        b = build_dataset_graphs(samples, cfg, seed=3)
        for ga, gb in zip(a, b):
            assert [e.members for e in ga.seq_hypergraph.hyperedges] == [
                e.members for e in gb.seq_hypergraph.hyperedges
            ]
        c = build_dataset_graphs(samples, cfg, seed=4)
        assert any(
            [e.members for e in ga.seq_hypergraph.hyperedges]
            != [e.members for e in gc.seq_hypergraph.hyperedges]
            for ga, gc in zip(a, c)
        )


class TestExports:
    def test_json_document_shape(self):
        g = build_hybrid_graph(_samples()[0], _cfg())
        doc = graph_to_json(g)
        assert doc["schema_version"] == 1
        assert json.loads(json.dumps(doc)) == doc  # strictly serializable
        seq = doc["modalities"]["sequence"]
        assert seq["n_nodes"] == 10
        assert len(seq["hyperedges"]) == 10
        for edge in seq["hyperedges"]:
            assert edge["center"] in edge["members"]
            assert edge["weight"] > 0
        assert doc["cross_edges"], "overlapping timings must produce cross edges"
        for e in doc["cross_edges"]:
            assert {e["src_modality"], e["dst_modality"]} == {"sequence", "video"}

    def test_dot_output_mentions_all_nodes(self):
        g = build_hybrid_graph(_samples()[0], _cfg())
        dot = graph_to_dot(g)
        assert dot.startswith("graph hybrid {")
        for i in range(10):
            assert f"s{i} " in dot or f"s{i} --" in dot
        for j in range(5):
            assert f"v{j}" in dot
        assert dot.rstrip().endswith("}")
