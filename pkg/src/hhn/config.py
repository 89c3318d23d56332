"""Dataclass configs for graph construction, the model, training, and synthesis."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import ConfigError

STRATEGIES = ("max_diff", "min_diff", "random")
HEAD_KINDS = ("multilabel_sigmoid", "singlelabel_softmax")
MODALITY_MODES = ("combined", "seq_only", "video_only")
HAWKES_MODES = ("source_timestamp", "interval")
SIGNAL_MODES = ("seq_only", "video_only", "xor_crossmodal", "entropy_burst")


@dataclass
class HHNConfig:
    """Model plus graph-construction settings.

    ``hidden_dim`` is the shared embedding width both modalities are projected
    to ahead of the first layer, which keeps the cross-modal attention and the
    concatenation shapes uniform across layers.
    """

    n_layers: int = 2
    hidden_dim: int = 64
    hyperedge_size: int = 4
    hop: int = 2
    r_min: int = 6
    alpha: float = 2.0
    head: str = "multilabel_sigmoid"
    n_classes: int = 2
    strategy: str = "max_diff"
    semantic_topk: int | None = None
    cross_modal: bool = True
    modality: str = "combined"
    hawkes_mode: str = "source_timestamp"
    leaky_slope: float = 0.2
    hgnn_activation: str = "elu"

    def validate(self) -> "HHNConfig":
        if self.n_layers < 1:
            raise ConfigError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.hyperedge_size < 1:
            raise ConfigError(f"hyperedge_size must be >= 1, got {self.hyperedge_size}")
        if self.hop < 1:
            raise ConfigError(f"hop must be >= 1, got {self.hop}")
        if self.r_min < 1:
            raise ConfigError(f"r_min must be >= 1, got {self.r_min}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.n_classes < 1:
            raise ConfigError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.head not in HEAD_KINDS:
            raise ConfigError(f"head must be one of {HEAD_KINDS}, got {self.head!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.semantic_topk is not None and self.semantic_topk < 1:
            raise ConfigError(f"semantic_topk must be >= 1 when set, got {self.semantic_topk}")
        if self.modality not in MODALITY_MODES:
            raise ConfigError(f"modality must be one of {MODALITY_MODES}, got {self.modality!r}")
        if self.hawkes_mode not in HAWKES_MODES:
            raise ConfigError(f"hawkes_mode must be one of {HAWKES_MODES}, got {self.hawkes_mode!r}")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ConfigError(f"leaky_slope must lie in (0, 1), got {self.leaky_slope}")
        return self


@dataclass
class TrainConfig:
    """Optimization schedule.  The canonical learning rates are 0.005, 0.001, 0.01."""

    iterations: int = 10_000
    warmup: int = 1_000
    batch_size: int = 128
    learning_rate: float = 0.001
    decay_factor: float = 0.1
    decay_every: int = 250
    eval_every: int = 100
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.warmup < 0 or self.warmup > self.iterations:
            raise ConfigError(
                f"warmup must lie in [0, iterations={self.iterations}], got {self.warmup}"
            )
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ConfigError(f"decay_factor must lie in (0, 1], got {self.decay_factor}")
        if self.decay_every < 1:
            raise ConfigError(f"decay_every must be >= 1, got {self.decay_every}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        return self


@dataclass
class SynthSpec:
    """Settings of the synthetic two-modality dataset generator.

    ``pattern_seed`` drives the class-signal directions and is deliberately
    separate from ``seed`` so that train/val/test splits generated with
    different sample seeds still share the same planted patterns.
    ``sample_offset`` shifts the per-sample seed stream, letting splits draw
    disjoint samples from one logical dataset.
    """

    n_samples: int = 100
    n_classes: int = 2
    seq_nodes: int = 101
    video_nodes: int = 40
    seq_dim: int = 128
    video_dim: int = 1024
    mode: str = "xor_crossmodal"
    noise_sigma: float = 0.5
    seed: int = 0
    signal_scale: float = 3.0
    burst_fraction: float = 0.25
    burst_signal_scale: float = 1.2
    spike_scale: float = 6.0
    pattern_seed: int = 1234
    sample_offset: int = 0

    def validate(self) -> "SynthSpec":
        if self.n_samples < 0:
            raise ConfigError(f"n_samples must be >= 0, got {self.n_samples}")
        for name in ("n_classes", "seq_nodes", "video_nodes", "seq_dim", "video_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.mode not in SIGNAL_MODES:
            raise ConfigError(f"mode must be one of {SIGNAL_MODES}, got {self.mode!r}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 < self.burst_fraction <= 1.0:
            raise ConfigError(f"burst_fraction must lie in (0, 1], got {self.burst_fraction}")
        if self.sample_offset < 0:
            raise ConfigError(f"sample_offset must be >= 0, got {self.sample_offset}")
        return self


def dataclass_field_names(cls) -> tuple[str, ...]:
    return tuple(f.name for f in fields(cls))
