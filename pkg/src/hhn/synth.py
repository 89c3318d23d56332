"""Deterministic synthetic two-modality datasets with planted class signals.

Four signal modes cover the experiment directions:

* ``seq_only`` / ``video_only``: the class pattern rides on every segment of
  one modality; the other modality is pure noise.
* ``xor_crossmodal``: each modality carries an independent latent digit and
  the label is their sum modulo the class count, so neither modality alone
  says anything about the label (for 2 classes this is exactly XOR).
* ``entropy_burst``: a minority of high-entropy "burst" segments carry one
  latent digit, the remaining spiky low-entropy segments carry another, and
  the label is their sum modulo the class count.  No single segment and no
  additive pooling of segments can decide the label; a node only becomes
  informative once its neighborhood mixes the two entropy strata, which is
  precisely what entropy-difference-maximizing hyperedges do.

Sample features derive from (seed, absolute sample index); class-pattern
directions derive from ``pattern_seed`` only, so splits generated with
different seeds or offsets stay mutually consistent.  Features are rounded
through float32 so in-memory samples match what a reader gets back from disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SynthSpec
from .dataio import Modality, Sample, SegmentNode, write_feature_blob

SEQ_WINDOW_MS = 960
SEQ_HOP_MS = 196
VIDEO_SEGMENT_MS = 250


@dataclass
class SampleInfo:
    """Ground truth of one generated sample, for generator qualification."""

    class_index: int
    seq_digit: int | None = None
    video_digit: int | None = None
    burst_digit: int | None = None
    base_digit: int | None = None
    burst_indices: tuple[int, ...] = ()


def _unit_patterns(rng: np.random.Generator, n: int, dim: int, scale: float) -> np.ndarray:
    pats = rng.normal(size=(n, dim))
    pats /= np.linalg.norm(pats, axis=1, keepdims=True)
    return pats * scale


@dataclass
class _Patterns:
    seq: np.ndarray
    video: np.ndarray
    burst: np.ndarray
    base: np.ndarray


def _patterns(spec: SynthSpec) -> _Patterns:
    c = spec.n_classes

    def bank(key: int, dim: int, scale: float) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([spec.pattern_seed, key]))
        return _unit_patterns(rng, c, dim, scale)

    return _Patterns(
        seq=bank(0, spec.seq_dim, spec.signal_scale),
        video=bank(1, spec.video_dim, spec.signal_scale),
        burst=bank(2, spec.seq_dim, spec.burst_signal_scale),
        base=bank(3, spec.seq_dim, spec.burst_signal_scale),
    )


def _sample_features(
    spec: SynthSpec, rng: np.random.Generator, pats: _Patterns
) -> tuple[np.ndarray, np.ndarray, SampleInfo]:
    seq = rng.normal(0.0, spec.noise_sigma, size=(spec.seq_nodes, spec.seq_dim))
    video = rng.normal(0.0, spec.noise_sigma, size=(spec.video_nodes, spec.video_dim))

    if spec.mode == "seq_only":
        c = int(rng.integers(spec.n_classes))
        seq += pats.seq[c]
        return seq, video, SampleInfo(class_index=c)
    if spec.mode == "video_only":
        c = int(rng.integers(spec.n_classes))
        video += pats.video[c]
        return seq, video, SampleInfo(class_index=c)
    if spec.mode == "xor_crossmodal":
        ds = int(rng.integers(spec.n_classes))
        dv = int(rng.integers(spec.n_classes))
        c = (ds + dv) % spec.n_classes
        seq += pats.seq[ds]
        video += pats.video[dv]
        return seq, video, SampleInfo(class_index=c, seq_digit=ds, video_digit=dv)
    # entropy_burst: label = (burst digit + base digit) mod C, strata disjoint
    da = int(rng.integers(spec.n_classes))
    db = int(rng.integers(spec.n_classes))
    c = (da + db) % spec.n_classes
    n_burst = max(1, int(round(spec.burst_fraction * spec.seq_nodes)))
    burst = np.sort(rng.choice(spec.seq_nodes, size=n_burst, replace=False))
    is_burst = np.zeros(spec.seq_nodes, dtype=bool)
    is_burst[burst] = True
    spike_dims = rng.integers(0, spec.seq_dim, size=spec.seq_nodes)
    for row in range(spec.seq_nodes):
        if is_burst[row]:
            seq[row] += pats.burst[da]
        else:
            seq[row, spike_dims[row]] += spec.spike_scale
            seq[row] += pats.base[db]
    return seq, video, SampleInfo(
        class_index=c,
        burst_digit=da,
        base_digit=db,
        burst_indices=tuple(int(b) for b in burst),
    )


def _timing(spec: SynthSpec) -> tuple[list[int], list[int], list[int], list[int]]:
    seq_t0 = [k * SEQ_HOP_MS for k in range(spec.seq_nodes)]
    seq_t1 = [t + SEQ_WINDOW_MS for t in seq_t0]
    vid_t0 = [k * VIDEO_SEGMENT_MS for k in range(spec.video_nodes)]
    vid_t1 = [t + VIDEO_SEGMENT_MS for t in vid_t0]
    return seq_t0, seq_t1, vid_t0, vid_t1


def _nodes(kind: Modality, feats: np.ndarray, t0: list[int], t1: list[int]) -> list[SegmentNode]:
    return [SegmentNode(kind, i, t0[i], t1[i], feats[i]) for i in range(feats.shape[0])]


def generate_samples(spec: SynthSpec, return_info: bool = False):
    """Generate samples in memory; identical to what a written dataset loads back."""
    spec.validate()
    pats = _patterns(spec)
    seq_t0, seq_t1, vid_t0, vid_t1 = _timing(spec)
    samples: list[Sample] = []
    infos: list[SampleInfo] = []
    for i in range(spec.n_samples):
        absolute = spec.sample_offset + i
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, absolute]))
        seq, video, info = _sample_features(spec, rng, pats)
        seq = seq.astype(np.float32).astype(np.float64)
        video = video.astype(np.float32).astype(np.float64)
        labels = np.zeros(spec.n_classes, dtype=np.float64)
        labels[info.class_index] = 1.0
        samples.append(
            Sample(
                sample_id=f"s{absolute:06d}",
                seq_nodes=_nodes(Modality.SEQUENCE, seq, seq_t0, seq_t1),
                video_nodes=_nodes(Modality.VIDEO, video, vid_t0, vid_t1),
                labels=labels,
            )
        )
        infos.append(info)
    if return_info:
        return samples, infos
    return samples


def generate_dataset(spec: SynthSpec, out_dir, manifest_name: str = "manifest.ndjson") -> Path:
    """Write blobs plus an NDJSON manifest under ``out_dir``; returns the manifest path."""
    out = Path(out_dir)
    blob_dir = out / "blobs"
    blob_dir.mkdir(parents=True, exist_ok=True)
    samples = generate_samples(spec)
    manifest_path = out / manifest_name
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for sample in samples:
            seq_rel = f"blobs/{sample.sample_id}.seq.hhnf"
            vid_rel = f"blobs/{sample.sample_id}.video.hhnf"
            write_feature_blob(np.stack([n.features for n in sample.seq_nodes]), out / seq_rel)
            write_feature_blob(np.stack([n.features for n in sample.video_nodes]), out / vid_rel)
            doc = {
                "sample_id": sample.sample_id,
                "labels": [int(v) for v in sample.labels],
                "modalities": {
                    "sequence": {
                        "blob": seq_rel,
                        "t_start": [n.t_start for n in sample.seq_nodes],
                        "t_end": [n.t_end for n in sample.seq_nodes],
                    },
                    "video": {
                        "blob": vid_rel,
                        "t_start": [n.t_start for n in sample.video_nodes],
                        "t_end": [n.t_end for n in sample.video_nodes],
                    },
                },
            }
            fh.write(json.dumps(doc, separators=(",", ":")) + "\n")
    return manifest_path
