"""Ranking metrics: per-class average precision and ROC AUC, plus the report.

Ties in average precision break by stable original order; AUC counts tied
score pairs as one half via midrank averaging, which equals the pairwise
definition exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def average_precision(scores, labels) -> float:
    """AP over the descending-score ranking; needs at least one positive."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError(f"scores shape {scores.shape} != labels shape {labels.shape}")
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise ValidationError("average_precision needs at least one positive label")
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits = 0
    total = 0.0
    for rank, idx in enumerate(order, start=1):
        if labels[idx] == 1:
            hits += 1
            total += hits / rank
    return total / n_pos


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with tied scores assigned the mean of their positions."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """AUC via the rank-sum statistic; tied pairs count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError(f"scores shape {scores.shape} != labels shape {labels.shape}")
    n_pos = int((labels == 1).sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("roc_auc needs at least one positive and one negative label")
    ranks = _midranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass
class MetricsReport:
    """Per-class and aggregate ranking metrics plus the training loss trace."""

    per_class_ap: list[float | None]
    mean_ap: float
    per_class_auc: list[float | None]
    macro_auc: float
    final_loss: float
    loss_curve: list[float] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "per_class_ap": self.per_class_ap,
            "mean_ap": self.mean_ap,
            "per_class_auc": self.per_class_auc,
            "macro_auc": self.macro_auc,
            "final_loss": self.final_loss,
            "loss_curve": self.loss_curve,
            "diagnostics": self.diagnostics,
        }


def compute_metrics(
    probs: np.ndarray,
    labels: np.ndarray,
    final_loss: float = float("nan"),
    loss_curve: list[float] | None = None,
) -> MetricsReport:
    """Column-wise AP/AUC over a score matrix; degenerate classes are skipped
    with a diagnostic rather than contributing a made-up value."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape != labels.shape or probs.ndim != 2:
        raise ValidationError(f"probs shape {probs.shape} != labels shape {labels.shape}")
    aps: list[float | None] = []
    aucs: list[float | None] = []
    diagnostics: list[str] = []
    for c in range(probs.shape[1]):
        col_scores, col_labels = probs[:, c], labels[:, c]
        try:
            aps.append(average_precision(col_scores, col_labels))
        except ValidationError:
            aps.append(None)
            diagnostics.append(f"class {c}: no positives, skipped in mean AP")
        try:
            aucs.append(roc_auc(col_scores, col_labels))
        except ValidationError:
            aucs.append(None)
            diagnostics.append(f"class {c}: single-class labels, skipped in macro AUC")
    valid_aps = [v for v in aps if v is not None]
    valid_aucs = [v for v in aucs if v is not None]
    return MetricsReport(
        per_class_ap=aps,
        mean_ap=float(np.mean(valid_aps)) if valid_aps else float("nan"),
        per_class_auc=aucs,
        macro_auc=float(np.mean(valid_aucs)) if valid_aucs else float("nan"),
        final_loss=final_loss,
        loss_curve=list(loss_curve) if loss_curve is not None else [],
        diagnostics=diagnostics,
    )
