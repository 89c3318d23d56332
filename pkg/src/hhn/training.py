"""Training loop: focal loss, Adam, the warmup/step-decay schedule, evaluation.

The loss is the focal form with a squared down-weighting factor over the
predicted probabilities of the true classes: for every positive
(sample, class) pair, ``-(1 - p)^2 log p``, averaged over the batch.
Probabilities are clamped to [1e-7, 1 - 1e-7] before the log; the clamp
also zeroes the gradient where it is active.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .config import HHNConfig, TrainConfig
from .dataio import Sample
from .errors import DimensionError, NumericError, ValidationError
from .hybrid import HybridGraph, build_dataset_graphs
from .linalg import rowwise_softmax
from .metrics import MetricsReport, compute_metrics
from .model import ModelState, backward_batch, forward_batch, init_state

PROB_CLAMP_LO = 1e-7
PROB_CLAMP_HI = 1.0 - 1e-7
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


def focal_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean over the batch of -(1-p)^2 log p summed over positive pairs."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise DimensionError(f"probs shape {probs.shape} != labels shape {labels.shape}")
    p = np.clip(probs, PROB_CLAMP_LO, PROB_CLAMP_HI)
    terms = -labels * (1.0 - p) ** 2 * np.log(p)
    return float(terms.sum() / probs.shape[0])


def focal_loss_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(focal loss)/d(probs); zero where the clamp is active or the label is 0."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise DimensionError(f"probs shape {probs.shape} != labels shape {labels.shape}")
    p = np.clip(probs, PROB_CLAMP_LO, PROB_CLAMP_HI)
    inside = (probs > PROB_CLAMP_LO) & (probs < PROB_CLAMP_HI)
    grad = labels * (2.0 * (1.0 - p) * np.log(p) - (1.0 - p) ** 2 / p) / probs.shape[0]
    return grad * inside


def head_backward(probs: np.ndarray, d_probs: np.ndarray, head: str) -> np.ndarray:
    """Map d(loss)/d(probs) back through the classifier nonlinearity to logits."""
    if head == "multilabel_sigmoid":
        return d_probs * probs * (1.0 - probs)
    if head == "singlelabel_softmax":
        inner = (probs * d_probs).sum(axis=1, keepdims=True)
        return probs * (d_probs - inner)
    raise DimensionError(f"unknown head kind {head!r}")


def adam_step(state: ModelState, lr: float, t: int, betas=ADAM_BETAS, eps: float = ADAM_EPS) -> None:
    """Bias-corrected Adam update applied in place; gradients are zeroed after."""
    if t < 1:
        raise ValidationError(f"Adam step index must be >= 1, got {t}")
    b1, b2 = betas
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p in state.params.values():
        if not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient in parameter {p.name!r}")
        p.moment1[...] = b1 * p.moment1 + (1.0 - b1) * p.grad
        p.moment2[...] = b2 * p.moment2 + (1.0 - b2) * p.grad**2
        m_hat = p.moment1 / c1
        v_hat = p.moment2 / c2
        p.value[...] = p.value - lr * m_hat / (np.sqrt(v_hat) + eps)
        p.zero_grad()


def learning_rate(t: int, cfg: TrainConfig) -> float:
    """Linear warmup to the base rate, then step decay every ``decay_every``."""
    if t < cfg.warmup:
        return cfg.learning_rate * (t + 1) / cfg.warmup
    steps = (t - cfg.warmup) // cfg.decay_every
    return cfg.learning_rate * cfg.decay_factor**steps


def evaluate(graphs: list[HybridGraph], labels: np.ndarray, state: ModelState, cfg: HHNConfig) -> np.ndarray:
    """Class probabilities for a list of prebuilt graphs."""
    probs, _ = forward_batch(graphs, state, cfg)
    return probs


@dataclass
class TrainResult:
    state: ModelState
    report: MetricsReport
    best_iteration: int


def train_loop(
    train_samples: list[Sample],
    val_samples: list[Sample],
    tcfg: TrainConfig,
    mcfg: HHNConfig,
    train_graphs: list[HybridGraph] | None = None,
    val_graphs: list[HybridGraph] | None = None,
) -> tuple[ModelState, MetricsReport]:
    """Run the optimization loop and return the best-validation state and report.

    Graphs are built once per sample and cached (prebuilt ones can be passed
    in when sweeping configurations that share construction settings).
    Validation metrics run every ``eval_every`` iterations; the returned state
    is the checkpoint with the best validation mean AP.  A non-finite loss
    aborts with the iteration index.
    """
    tcfg.validate()
    mcfg.validate()
    if not train_samples:
        raise ValidationError("train_loop needs a non-empty training set")
    if train_graphs is None:
        train_graphs = build_dataset_graphs(train_samples, mcfg, tcfg.seed)
    if val_graphs is None:
        val_graphs = build_dataset_graphs(val_samples, mcfg, tcfg.seed)
    train_labels = np.vstack([s.labels for s in train_samples])
    val_labels = np.vstack([s.labels for s in val_samples]) if val_samples else None

    seq_dim = train_samples[0].seq_nodes[0].features.shape[0]
    video_dim = train_samples[0].video_nodes[0].features.shape[0]
    state = init_state(mcfg, seq_dim, video_dim, seed=tcfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence([tcfg.seed, 0xBA7C4]))

    n = len(train_samples)
    order = rng.permutation(n)
    cursor = 0
    loss_curve: list[float] = []
    best_values = state.copy_values()
    best_map = -1.0
    best_iteration = 0

    def validation_map() -> float:
        if val_labels is None:
            probs = evaluate(train_graphs, train_labels, state, mcfg)
            return compute_metrics(probs, train_labels).mean_ap
        probs = evaluate(val_graphs, val_labels, state, mcfg)
        return compute_metrics(probs, val_labels).mean_ap

    for t in range(tcfg.iterations):
        take = min(tcfg.batch_size, n)
        if cursor + take > n:
            order = rng.permutation(n)
            cursor = 0
        batch_idx = order[cursor : cursor + take]
        cursor += take

        graphs = [train_graphs[i] for i in batch_idx]
        labels = train_labels[batch_idx]
        probs, caches = forward_batch(graphs, state, mcfg)
        loss = focal_loss(probs, labels)
        if not np.isfinite(loss):
            raise NumericError(f"training diverged: non-finite loss at iteration {t}")
        loss_curve.append(loss)

        d_probs = focal_loss_grad(probs, labels)
        d_logits = head_backward(probs, d_probs, mcfg.head)
        backward_batch(caches, d_logits, state, mcfg)
        adam_step(state, learning_rate(t, tcfg), t + 1)

        if (t + 1) % tcfg.eval_every == 0 or t + 1 == tcfg.iterations:
            current = validation_map()
            if current > best_map:
                best_map = current
                best_values = state.copy_values()
                best_iteration = t + 1

    state.load_values(best_values)
    if val_labels is None:
        probs = evaluate(train_graphs, train_labels, state, mcfg)
        report = compute_metrics(probs, train_labels, loss_curve[-1], loss_curve)
    else:
        probs = evaluate(val_graphs, val_labels, state, mcfg)
        report = compute_metrics(probs, val_labels, loss_curve[-1], loss_curve)
    return state, report
