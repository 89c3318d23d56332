"""Forward and backward passes of the two-stream fusion network.

Per layer, each modality's node embeddings are diffused through its
hypergraph operator, and the video stream is additionally fused into the
sequence stream: a single-head attention layer aggregates video embeddings
per sequence node (edge logits biased by the log temporal weights), the
aggregate is concatenated onto the sequence embeddings, and the joint matrix
goes through the sequence-side convolution.  A learnable per-modality readout
pools node embeddings into one graph embedding, which a linear head maps to
class probabilities.

All gradients are hand-derived per layer and validated against central
finite differences; there is no autodiff tape.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import HHNConfig
from .errors import DimensionError, FormatError
from .hybrid import HybridGraph
from .linalg import (
    ParamTensor,
    activation_grad,
    apply_activation,
    concat_cols,
    matmul,
    rowwise_softmax,
    sigmoid,
)

CHECKPOINT_MAGIC = b"HHNM"
CHECKPOINT_VERSION = 1
_SHAPE = struct.Struct("<II")


@dataclass
class ModelState:
    """All learnable parameters in declaration (= checkpoint) order."""

    config: HHNConfig
    seq_dim: int
    video_dim: int
    params: dict[str, ParamTensor]

    def param_list(self) -> list[ParamTensor]:
        return list(self.params.values())

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def copy_values(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            p.value[...] = values[name]


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def init_state(cfg: HHNConfig, seq_dim: int, video_dim: int, seed: int = 0) -> ModelState:
    """Allocate and initialize all parameters for the configured variant."""
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11]))
    h = cfg.hidden_dim
    use_seq = cfg.modality in ("combined", "seq_only")
    use_video = cfg.modality in ("combined", "video_only")
    combined = cfg.modality == "combined"

    params: dict[str, ParamTensor] = {}

    def add(name: str, value: np.ndarray) -> None:
        params[name] = ParamTensor(name, value)

    if use_seq:
        add("input_proj_seq", _glorot(rng, seq_dim, h))
    if use_video:
        add("input_proj_video", _glorot(rng, video_dim, h))
    for l in range(1, cfg.n_layers + 1):
        if combined:
            add(f"layer{l}.gat_proj", _glorot(rng, h, h))
            add(f"layer{l}.gat_attn", _glorot(rng, 2 * h, 1))
            add(f"layer{l}.theta_seq", _glorot(rng, 2 * h, h))
            add(f"layer{l}.theta_video", _glorot(rng, h, h))
        elif use_seq:
            add(f"layer{l}.theta_seq", _glorot(rng, h, h))
        else:
            add(f"layer{l}.theta_video", _glorot(rng, h, h))
    if use_seq:
        add("readout_seq", np.ones((1, h)))
    if use_video:
        add("readout_video", np.ones((1, h)))
    add("classifier_weight", _glorot(rng, h, cfg.n_classes))
    add("classifier_bias", np.zeros((1, cfg.n_classes)))
    return ModelState(config=cfg, seq_dim=seq_dim, video_dim=video_dim, params=params)


# ---------------------------------------------------------------------------
# layer primitives


def hgnn_layer(operator: np.ndarray, feats: np.ndarray, theta: np.ndarray, activation: str = "elu") -> np.ndarray:
    """One hypergraph convolution: activation(operator @ feats @ theta)."""
    out, _ = _hgnn_forward(operator, feats, theta, activation)
    return out


def _hgnn_forward(operator, feats, theta, activation):
    pre = matmul(matmul(operator, feats), theta)
    return apply_activation(pre, activation), pre


def _hgnn_backward(d_out, pre, operator, feats, theta, activation):
    """Returns (d_feats, d_theta) for out = activation(operator @ feats @ theta)."""
    d_pre = d_out * activation_grad(pre, activation)
    d_theta = (operator @ feats).T @ d_pre
    d_feats = operator.T @ d_pre @ theta.T
    return d_feats, d_theta


@dataclass
class GatCache:
    src: np.ndarray
    dst: np.ndarray
    proj_src: np.ndarray  # U: projected source embeddings
    proj_dst: np.ndarray  # Q: projected destination embeddings
    pre: np.ndarray  # raw attention logits before the leaky rectifier
    alpha: np.ndarray  # attention coefficients, zero rows for isolated dsts
    mask: np.ndarray


def gat_layer(
    mask: np.ndarray,
    log_weights: np.ndarray,
    src_feats: np.ndarray,
    dst_feats: np.ndarray,
    proj: np.ndarray,
    attn: np.ndarray,
    slope: float = 0.2,
) -> tuple[np.ndarray, GatCache]:
    """Attention-weighted aggregation of source embeddings per destination node.

    Edge logits are ``leaky(a^T [proj z_dst || proj z_src])`` plus the edge's
    log temporal weight; attention normalizes over each destination's
    neighborhood.  Destinations with no neighbors receive the zero vector.
    Returns the (n_dst, h) messages and the cache for the backward pass.
    """
    h = proj.shape[1]
    if attn.shape != (2 * h, 1):
        raise DimensionError(f"attention vector shape {attn.shape} != ({2 * h}, 1)")
    u = matmul(src_feats, proj)
    q = matmul(dst_feats, proj)
    a_dst = attn[:h, 0]
    a_src = attn[h:, 0]
    pre = (q @ a_dst)[:, None] + (u @ a_src)[None, :]
    logits = apply_activation(pre, "leaky_relu", slope) + log_weights
    screened = np.where(mask, logits, -np.inf)
    row_max = screened.max(axis=1, keepdims=True)
    safe_max = np.where(np.isfinite(row_max), row_max, 0.0)
    e = np.exp(screened - safe_max)
    denom = e.sum(axis=1, keepdims=True)
    alpha = e / np.where(denom > 0.0, denom, 1.0)
    out = alpha @ u
    return out, GatCache(src_feats, dst_feats, u, q, pre, alpha, mask)


def _gat_backward(cache: GatCache, d_out: np.ndarray, proj: np.ndarray, attn: np.ndarray, slope: float):
    """Returns (d_src, d_dst, d_proj, d_attn) for the layer above."""
    h = proj.shape[1]
    u, q, alpha = cache.proj_src, cache.proj_dst, cache.alpha
    d_alpha = d_out @ u.T
    d_u = alpha.T @ d_out
    d_s = alpha * (d_alpha - (alpha * d_alpha).sum(axis=1, keepdims=True))
    d_pre = d_s * activation_grad(cache.pre, "leaky_relu", slope) * cache.mask
    d_p = d_pre.sum(axis=1)
    d_r = d_pre.sum(axis=0)
    a_dst = attn[:h, 0]
    a_src = attn[h:, 0]
    d_q = np.outer(d_p, a_dst)
    d_u = d_u + np.outer(d_r, a_src)
    d_attn = np.concatenate([q.T @ d_p, u.T @ d_r])[:, None]
    d_proj = cache.dst.T @ d_q + cache.src.T @ d_u
    d_src = d_u @ proj.T
    d_dst = d_q @ proj.T
    return d_src, d_dst, d_proj, d_attn


def readout(z_seq: np.ndarray | None, z_video: np.ndarray | None, p_seq: np.ndarray | None, p_video: np.ndarray | None) -> np.ndarray:
    """Mean-pool each modality's node embeddings, weight elementwise, and sum."""
    parts = []
    for z, p in ((z_video, p_video), (z_seq, p_seq)):
        if z is not None:
            parts.append(z.mean(axis=0, keepdims=True) * p)
    if not parts:
        raise DimensionError("readout needs at least one modality stream")
    return sum(parts[1:], start=parts[0])


def classify(z_graph: np.ndarray, weight: np.ndarray, bias: np.ndarray, head: str) -> np.ndarray:
    """Affine map of graph embeddings to per-class probabilities."""
    logits = matmul(z_graph, weight) + bias
    if head == "multilabel_sigmoid":
        return sigmoid(logits)
    if head == "singlelabel_softmax":
        return rowwise_softmax(logits)
    raise DimensionError(f"unknown head kind {head!r}")


# ---------------------------------------------------------------------------
# whole-network forward / backward


@dataclass
class LayerCache:
    z_seq_in: np.ndarray | None
    z_video_in: np.ndarray | None
    messages: np.ndarray | None
    joint: np.ndarray | None
    pre_seq: np.ndarray | None
    pre_video: np.ndarray | None
    gat: GatCache | None


@dataclass
class SampleCache:
    graph: HybridGraph
    layers: list[LayerCache] = field(default_factory=list)
    z_seq: np.ndarray | None = None
    z_video: np.ndarray | None = None
    z_graph: np.ndarray | None = None


def forward_sample(graph: HybridGraph, state: ModelState, cfg: HHNConfig) -> SampleCache:
    """Run the full per-sample forward pass, keeping layer caches for backward."""
    cache = SampleCache(graph=graph)
    act = cfg.hgnn_activation
    p = state.params
    h = cfg.hidden_dim

    z_s = matmul(graph.seq_features, p["input_proj_seq"].value) if graph.seq_features is not None else None
    z_v = matmul(graph.video_features, p["input_proj_video"].value) if graph.video_features is not None else None

    for l in range(1, cfg.n_layers + 1):
        if cfg.modality == "combined":
            if graph.cross_mask is not None and graph.cross_mask.any():
                messages, gat_cache = gat_layer(
                    graph.cross_mask,
                    graph.cross_log_weights,
                    z_v,
                    z_s,
                    p[f"layer{l}.gat_proj"].value,
                    p[f"layer{l}.gat_attn"].value,
                    cfg.leaky_slope,
                )
            else:
                messages, gat_cache = np.zeros((z_s.shape[0], h)), None
            joint = concat_cols(z_s, messages)
            z_s_new, pre_s = _hgnn_forward(graph.seq_hypergraph.operator, joint, p[f"layer{l}.theta_seq"].value, act)
            z_v_new, pre_v = _hgnn_forward(graph.video_hypergraph.operator, z_v, p[f"layer{l}.theta_video"].value, act)
            cache.layers.append(LayerCache(z_s, z_v, messages, joint, pre_s, pre_v, gat_cache))
            z_s, z_v = z_s_new, z_v_new
        elif cfg.modality == "seq_only":
            z_s_new, pre_s = _hgnn_forward(graph.seq_hypergraph.operator, z_s, p[f"layer{l}.theta_seq"].value, act)
            cache.layers.append(LayerCache(z_s, None, None, None, pre_s, None, None))
            z_s = z_s_new
        else:
            z_v_new, pre_v = _hgnn_forward(graph.video_hypergraph.operator, z_v, p[f"layer{l}.theta_video"].value, act)
            cache.layers.append(LayerCache(None, z_v, None, None, None, pre_v, None))
            z_v = z_v_new

    cache.z_seq, cache.z_video = z_s, z_v
    cache.z_graph = readout(
        z_s,
        z_v,
        p["readout_seq"].value if "readout_seq" in p else None,
        p["readout_video"].value if "readout_video" in p else None,
    )
    return cache


def forward_pass(graph: HybridGraph, state: ModelState, cfg: HHNConfig) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Final per-modality node embeddings (convenience wrapper)."""
    cache = forward_sample(graph, state, cfg)
    return cache.z_seq, cache.z_video


def backward_sample(cache: SampleCache, d_z_graph: np.ndarray, state: ModelState, cfg: HHNConfig) -> None:
    """Accumulate gradients for one sample given d(loss)/d(graph embedding)."""
    p = state.params
    act = cfg.hgnn_activation
    graph = cache.graph

    d_z_s = d_z_v = None
    if cache.z_seq is not None:
        n_s = cache.z_seq.shape[0]
        m_s = cache.z_seq.mean(axis=0, keepdims=True)
        p["readout_seq"].grad += m_s * d_z_graph
        d_z_s = np.repeat(p["readout_seq"].value * d_z_graph, n_s, axis=0) / n_s
    if cache.z_video is not None:
        n_v = cache.z_video.shape[0]
        m_v = cache.z_video.mean(axis=0, keepdims=True)
        p["readout_video"].grad += m_v * d_z_graph
        d_z_v = np.repeat(p["readout_video"].value * d_z_graph, n_v, axis=0) / n_v

    h = cfg.hidden_dim
    for l in range(cfg.n_layers, 0, -1):
        lc = cache.layers[l - 1]
        if cfg.modality == "combined":
            theta_s = p[f"layer{l}.theta_seq"]
            theta_v = p[f"layer{l}.theta_video"]
            d_joint, d_theta_s = _hgnn_backward(
                d_z_s, lc.pre_seq, graph.seq_hypergraph.operator, lc.joint, theta_s.value, act
            )
            theta_s.grad += d_theta_s
            d_z_v_next, d_theta_v = _hgnn_backward(
                d_z_v, lc.pre_video, graph.video_hypergraph.operator, lc.z_video_in, theta_v.value, act
            )
            theta_v.grad += d_theta_v
            d_z_s = d_joint[:, :h]
            d_messages = d_joint[:, h:]
            d_z_v = d_z_v_next
            if lc.gat is not None:
                proj = p[f"layer{l}.gat_proj"]
                attn = p[f"layer{l}.gat_attn"]
                d_src, d_dst, d_proj, d_attn = _gat_backward(
                    lc.gat, d_messages, proj.value, attn.value, cfg.leaky_slope
                )
                proj.grad += d_proj
                attn.grad += d_attn
                d_z_v = d_z_v + d_src
                d_z_s = d_z_s + d_dst
        elif cfg.modality == "seq_only":
            theta_s = p[f"layer{l}.theta_seq"]
            d_z_s, d_theta_s = _hgnn_backward(
                d_z_s, lc.pre_seq, graph.seq_hypergraph.operator, lc.z_seq_in, theta_s.value, act
            )
            theta_s.grad += d_theta_s
        else:
            theta_v = p[f"layer{l}.theta_video"]
            d_z_v, d_theta_v = _hgnn_backward(
                d_z_v, lc.pre_video, graph.video_hypergraph.operator, lc.z_video_in, theta_v.value, act
            )
            theta_v.grad += d_theta_v

    if d_z_s is not None:
        p["input_proj_seq"].grad += graph.seq_features.T @ d_z_s
    if d_z_v is not None:
        p["input_proj_video"].grad += graph.video_features.T @ d_z_v


def forward_batch(graphs: list[HybridGraph], state: ModelState, cfg: HHNConfig) -> tuple[np.ndarray, list[SampleCache]]:
    """Forward every sample, then the shared classifier head; returns probabilities."""
    caches = [forward_sample(g, state, cfg) for g in graphs]
    z = np.vstack([c.z_graph for c in caches])
    probs = classify(z, state.params["classifier_weight"].value, state.params["classifier_bias"].value, cfg.head)
    return probs, caches


def backward_batch(caches: list[SampleCache], d_logits: np.ndarray, state: ModelState, cfg: HHNConfig) -> None:
    """Accumulate gradients for a batch given d(loss)/d(logits)."""
    w = state.params["classifier_weight"]
    b = state.params["classifier_bias"]
    z = np.vstack([c.z_graph for c in caches])
    w.grad += z.T @ d_logits
    b.grad += d_logits.sum(axis=0, keepdims=True)
    d_z = d_logits @ w.value.T
    for i, cache in enumerate(caches):
        backward_sample(cache, d_z[i : i + 1], state, cfg)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(state: ModelState, path) -> None:
    """Write parameter values: magic, u32 version, then per tensor u32 rows,
    u32 cols and the float64 little-endian payload, in declaration order."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        for p in state.params.values():
            rows, cols = p.value.shape
            fh.write(_SHAPE.pack(rows, cols))
            fh.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())


def load_checkpoint(path, state: ModelState) -> ModelState:
    """Fill ``state`` values from a checkpoint; shapes must match in order."""
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {CHECKPOINT_MAGIC!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    offset = 8
    for name, p in state.params.items():
        if offset + 8 > len(data):
            raise FormatError(f"{path}: truncated before parameter {name!r}")
        rows, cols = _SHAPE.unpack_from(data, offset)
        offset += 8
        if (rows, cols) != p.value.shape:
            raise FormatError(
                f"{path}: parameter {name!r} has shape ({rows}, {cols}), expected {p.value.shape}"
            )
        nbytes = rows * cols * 8
        if offset + nbytes > len(data):
            raise FormatError(f"{path}: truncated payload for parameter {name!r}")
        p.value[...] = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=offset).reshape(rows, cols)
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes after last parameter")
    return state


def scan_checkpoint(path) -> list[tuple[int, int]]:
    """List the tensor shapes in a checkpoint without needing a model config."""
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {CHECKPOINT_MAGIC!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    shapes: list[tuple[int, int]] = []
    offset = 8
    while offset < len(data):
        if offset + 8 > len(data):
            raise FormatError(f"{path}: truncated shape header at byte {offset}")
        rows, cols = _SHAPE.unpack_from(data, offset)
        offset += 8 + rows * cols * 8
        if offset > len(data):
            raise FormatError(f"{path}: truncated payload at byte {offset}")
        shapes.append((rows, cols))
    return shapes
