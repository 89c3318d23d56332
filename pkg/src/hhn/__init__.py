"""Temporal hybrid hypergraph network for two-modality segment classification."""

from .config import HHNConfig, SynthSpec, TrainConfig
from .crossmodal import CrossGraph, build_cross_graph, hawkes_weight
from .dataio import (
    Modality,
    Sample,
    SampleManifest,
    SegmentNode,
    assemble_sample,
    load_dataset,
    load_manifest,
    read_feature_blob,
    write_feature_blob,
)
from .entropy import EntropyProfile, adaptive_window, entropy_profile, node_entropy
from .errors import (
    ConfigError,
    DimensionError,
    FormatError,
    HHNError,
    NumericError,
    ValidationError,
)
from .hybrid import HybridGraph, build_dataset_graphs, build_hybrid_graph, graph_to_dot, graph_to_json
from .hypergraph import (
    Hyperedge,
    Hypergraph,
    build_intra_hypergraph,
    hyperedge_weight,
    propagation_operator,
    select_hyperedge,
)
from .linalg import (
    GradCheckReport,
    ParamTensor,
    apply_activation,
    concat_cols,
    finite_diff_grad_check,
    matmul,
    rowwise_softmax,
)
from .metrics import MetricsReport, average_precision, compute_metrics, roc_auc
from .model import (
    ModelState,
    classify,
    forward_batch,
    forward_pass,
    forward_sample,
    gat_layer,
    hgnn_layer,
    init_state,
    load_checkpoint,
    readout,
    save_checkpoint,
)
from .synth import generate_dataset, generate_samples
from .training import adam_step, focal_loss, learning_rate, train_loop

__version__ = "0.1.0"
