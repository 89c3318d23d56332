"""Command-line interface: synth, build-graph, train, eval, inspect.

Settings merge with precedence: explicit flags > JSON config file > preset >
built-in defaults.  Config files are flat JSON objects whose keys are the
dataclass field names; unknown keys are rejected.  Logs go to stderr, data to
stdout or files.  Exit codes: 0 success, 1 validation/usage error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import (
    HHNConfig,
    SynthSpec,
    TrainConfig,
    dataclass_field_names,
)
from .dataio import load_dataset, load_manifest, read_feature_blob
from .errors import ConfigError, DimensionError, FormatError, HHNError, ValidationError
from .hybrid import build_dataset_graphs, graph_to_dot, graph_to_json
from .metrics import compute_metrics
from .model import init_state, load_checkpoint, save_checkpoint, scan_checkpoint
from .synth import generate_dataset
from .training import evaluate, train_loop

LOG = logging.getLogger("hhn")

_MODEL_FIELDS = set(dataclass_field_names(HHNConfig))
_TRAIN_FIELDS = set(dataclass_field_names(TrainConfig))
_SYNTH_FIELDS = set(dataclass_field_names(SynthSpec))
_EXTRA_FILE_KEYS = {"val_samples", "test_samples"}
_ALLOWED_FILE_KEYS = _MODEL_FIELDS | _TRAIN_FIELDS | _SYNTH_FIELDS | _EXTRA_FILE_KEYS

SYNTH_PRESETS: dict[str, dict] = {
    "xor": {
        "mode": "xor_crossmodal",
        "seq_nodes": 24,
        "video_nodes": 10,
        "seq_dim": 32,
        "video_dim": 48,
        "noise_sigma": 0.5,
        "signal_scale": 3.0,
        "n_samples": 600,
        "val_samples": 150,
        "test_samples": 300,
    },
    "entropy-burst": {
        "mode": "entropy_burst",
        "seq_nodes": 40,
        "video_nodes": 12,
        "seq_dim": 32,
        "video_dim": 32,
        "noise_sigma": 0.5,
        "burst_fraction": 0.25,
        "burst_signal_scale": 1.2,
        "n_samples": 600,
        "val_samples": 150,
        "test_samples": 300,
    },
    "seq-only": {
        "mode": "seq_only",
        "seq_nodes": 24,
        "video_nodes": 10,
        "seq_dim": 32,
        "video_dim": 48,
        "n_samples": 300,
        "val_samples": 80,
        "test_samples": 150,
    },
    "video-only": {
        "mode": "video_only",
        "seq_nodes": 24,
        "video_nodes": 10,
        "seq_dim": 32,
        "video_dim": 48,
        "n_samples": 300,
        "val_samples": 80,
        "test_samples": 150,
    },
}

TRAIN_PRESETS: dict[str, dict] = {
    "desk": {
        "iterations": 300,
        "warmup": 30,
        "batch_size": 32,
        "learning_rate": 0.005,
        "eval_every": 50,
        "hidden_dim": 32,
        "head": "singlelabel_softmax",
    },
}


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message: str):  # noqa: D102 - argparse hook
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_graph_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r-min", type=int, dest="r_min")
    p.add_argument("--alpha", type=float, dest="alpha")
    p.add_argument("--hyperedge-size", type=int, dest="hyperedge_size")
    p.add_argument("--hop", type=int, dest="hop")
    p.add_argument("--strategy", choices=["max-diff", "min-diff", "random"], dest="strategy")
    p.add_argument("--semantic-topk", type=int, dest="semantic_topk")
    p.add_argument("--hawkes-mode", choices=["source-timestamp", "interval"], dest="hawkes_mode")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layers", type=int, dest="n_layers")
    p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    p.add_argument("--head", choices=["multilabel_sigmoid", "singlelabel_softmax"], dest="head")
    p.add_argument("--modality", choices=["combined", "seq-only", "video-only"], dest="modality")
    p.add_argument(
        "--no-cross-modal",
        action="store_true",
        default=None,
        dest="no_cross_modal",
        help="disable cross-modal edges (fusion ablation)",
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--iterations", type=int, dest="iterations")
    p.add_argument("--warmup", type=int, dest="warmup")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--eval-every", type=int, dest="eval_every")


def build_parser() -> _Parser:
    parser = _Parser(prog="hhn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", parents=[], help="generate a synthetic dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--preset", choices=sorted(SYNTH_PRESETS))
    p_synth.add_argument("--config")
    p_synth.add_argument("--seed", type=int)
    p_synth.add_argument("--samples", type=int, dest="n_samples")
    p_synth.add_argument("--val-samples", type=int, dest="val_samples")
    p_synth.add_argument("--test-samples", type=int, dest="test_samples")
    p_synth.add_argument("--classes", type=int, dest="n_classes")
    p_synth.add_argument("--seq-nodes", type=int, dest="seq_nodes")
    p_synth.add_argument("--video-nodes", type=int, dest="video_nodes")
    p_synth.add_argument("--seq-dim", type=int, dest="seq_dim")
    p_synth.add_argument("--video-dim", type=int, dest="video_dim")
    p_synth.add_argument(
        "--mode",
        choices=["seq_only", "video_only", "xor_crossmodal", "entropy_burst"],
        dest="mode",
    )
    p_synth.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p_synth.add_argument("--signal-scale", type=float, dest="signal_scale")
    p_synth.add_argument("--burst-fraction", type=float, dest="burst_fraction")
    p_synth.add_argument("--pattern-seed", type=int, dest="pattern_seed")

    p_graph = sub.add_parser("build-graph", help="export graph structure and diagnostics")
    p_graph.add_argument("--data", required=True)
    p_graph.add_argument("--out", required=True)
    p_graph.add_argument("--config")
    p_graph.add_argument("--seed", type=int)
    p_graph.add_argument("--dot", action="store_true", help="also write DOT clique expansions")
    p_graph.add_argument("--limit", type=int, help="export at most this many samples")
    _add_graph_flags(p_graph)

    p_train = sub.add_parser("train", help="train a model and write checkpoint + metrics")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--config")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--preset", choices=sorted(TRAIN_PRESETS))
    p_train.add_argument("--sweep", action="store_true", help="run the r_min and strategy sweep matrix")
    _add_graph_flags(p_train)
    _add_model_flags(p_train)
    _add_train_flags(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out", help="metrics JSON path (default: stdout)")
    p_eval.add_argument("--config")
    p_eval.add_argument("--seed", type=int)
    _add_graph_flags(p_eval)
    _add_model_flags(p_eval)

    p_inspect = sub.add_parser("inspect", help="summarize a blob, manifest, or checkpoint")
    p_inspect.add_argument("path")
    return parser


# ---------------------------------------------------------------------------
# config merging


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    unknown = set(doc) - _ALLOWED_FILE_KEYS
    if unknown:
        raise ConfigError(f"config file {p} has unknown keys: {sorted(unknown)}")
    return doc


_FLAG_VALUE_MAP = {
    "strategy": {"max-diff": "max_diff", "min-diff": "min_diff", "random": "random"},
    "modality": {"combined": "combined", "seq-only": "seq_only", "video-only": "video_only"},
    "hawkes_mode": {"source-timestamp": "source_timestamp", "interval": "interval"},
}


def _flag_overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    for key, value in vars(args).items():
        if key in ("command", "config", "preset", "out", "data", "checkpoint", "path", "dot", "sweep", "limit"):
            continue
        if value is None:
            continue
        if key == "no_cross_modal":
            overrides["cross_modal"] = not value
            continue
        if key in _FLAG_VALUE_MAP:
            value = _FLAG_VALUE_MAP[key][value]
        overrides[key] = value
    return overrides


def merged_settings(args: argparse.Namespace, presets: dict[str, dict] | None = None) -> dict:
    """Flat settings dict: defaults, then preset, then config file, then flags."""
    settings: dict = {}
    preset_name = getattr(args, "preset", None)
    if preset_name is not None:
        settings.update((presets or {})[preset_name])
    settings.update(_load_config_file(getattr(args, "config", None)))
    settings.update(_flag_overrides(args))
    return settings


def _pick(settings: dict, cls):
    names = dataclass_field_names(cls)
    return cls(**{k: v for k, v in settings.items() if k in names})


# ---------------------------------------------------------------------------
# subcommands


def _resolve_manifest(data: str, default_name: str) -> Path:
    p = Path(data)
    if p.is_dir():
        candidate = p / default_name
        if not candidate.exists():
            raise ValidationError(f"no {default_name} inside {p}")
        return candidate
    if not p.exists():
        raise ValidationError(f"manifest not found: {p}")
    return p


def _cmd_synth(args: argparse.Namespace) -> int:
    settings = merged_settings(args, SYNTH_PRESETS)
    spec = _pick(settings, SynthSpec).validate()
    val_n = int(settings.get("val_samples", max(1, spec.n_samples // 4)))
    test_n = int(settings.get("test_samples", max(1, spec.n_samples // 2)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    splits = (
        ("train.ndjson", spec.n_samples, 0),
        ("val.ndjson", val_n, spec.n_samples),
        ("test.ndjson", test_n, spec.n_samples + val_n),
    )
    for name, count, offset in splits:
        split_spec = dataclasses.replace(spec, n_samples=count, sample_offset=offset)
        generate_dataset(split_spec, out, name)
        LOG.info("wrote %s with %d samples", out / name, count)
    return 0


def _graph_settings_to_config(settings: dict, n_classes: int = 2) -> HHNConfig:
    cfg = _pick(settings, HHNConfig)
    cfg.n_classes = int(settings.get("n_classes", n_classes))
    return cfg.validate()


def _histogram(values: np.ndarray, bins: int = 10) -> dict:
    counts, edges = np.histogram(values, bins=bins)
    return {"bin_edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def _cmd_build_graph(args: argparse.Namespace) -> int:
    settings = merged_settings(args)
    manifest = _resolve_manifest(args.data, "train.ndjson")
    samples = load_dataset(manifest)
    if not samples:
        raise ValidationError(f"manifest {manifest} lists no samples")
    if args.limit is not None:
        samples = samples[: args.limit]
    cfg = _graph_settings_to_config(settings, n_classes=len(samples[0].labels))
    seed = int(settings.get("seed", 0))
    graphs = build_dataset_graphs(samples, cfg, seed)

    out = Path(args.out)
    graph_dir = out / "graphs"
    graph_dir.mkdir(parents=True, exist_ok=True)
    seq_entropies: list[float] = []
    video_entropies: list[float] = []
    seq_windows: list[int] = []
    video_windows: list[int] = []
    degenerate = 0
    cross_edges = 0
    for g in graphs:
        doc = graph_to_json(g)
        (graph_dir / f"{g.sample_id}.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        if args.dot:
            (graph_dir / f"{g.sample_id}.dot").write_text(graph_to_dot(g), encoding="utf-8")
        if g.seq_profile is not None:
            seq_entropies.extend(g.seq_profile.entropies.tolist())
            seq_windows.extend(int(w) for w in g.seq_profile.windows)
            degenerate += g.seq_hypergraph.n_degenerate
        if g.video_profile is not None:
            video_entropies.extend(g.video_profile.entropies.tolist())
            video_windows.extend(int(w) for w in g.video_profile.windows)
            degenerate += g.video_hypergraph.n_degenerate
        if g.cross is not None:
            cross_edges += len(g.cross.edges)

    def window_counts(windows: list[int]) -> dict:
        out_counts: dict[str, int] = {}
        for w in sorted(set(windows)):
            out_counts[str(w)] = windows.count(w)
        return out_counts

    diagnostics = {
        "schema_version": 1,
        "n_samples": len(graphs),
        "degenerate_edge_count": degenerate,
        "cross_edge_count": cross_edges,
        "modalities": {
            "sequence": {
                "entropy_histogram": _histogram(np.asarray(seq_entropies)) if seq_entropies else None,
                "window_sizes": window_counts(seq_windows),
            },
            "video": {
                "entropy_histogram": _histogram(np.asarray(video_entropies)) if video_entropies else None,
                "window_sizes": window_counts(video_windows),
            },
        },
    }
    (out / "diagnostics.json").write_text(json.dumps(diagnostics, indent=2) + "\n", encoding="utf-8")
    LOG.info("exported %d graphs to %s", len(graphs), graph_dir)
    return 0


def _sidecar_doc(cfg: HHNConfig, seq_dim: int, video_dim: int) -> dict:
    return {
        "schema_version": 1,
        "model": dataclasses.asdict(cfg),
        "seq_dim": seq_dim,
        "video_dim": video_dim,
    }


def _write_metrics(path: Path, report_dict: dict) -> None:
    path.write_text(json.dumps(report_dict, indent=2) + "\n", encoding="utf-8")


def _train_once(samples, val_samples, settings: dict, seed: int):
    mcfg = _graph_settings_to_config(settings, n_classes=len(samples[0].labels))
    tcfg = _pick(settings, TrainConfig)
    tcfg.seed = seed
    tcfg.validate()
    state, report = train_loop(samples, val_samples, tcfg, mcfg)
    return state, report, mcfg, tcfg


def _cmd_train(args: argparse.Namespace) -> int:
    settings = merged_settings(args, TRAIN_PRESETS)
    data_dir = Path(args.data)
    train_manifest = _resolve_manifest(args.data, "train.ndjson")
    samples = load_dataset(train_manifest)
    if not samples:
        raise ValidationError(f"manifest {train_manifest} lists no samples")
    val_path = data_dir / "val.ndjson" if data_dir.is_dir() else None
    val_samples = load_dataset(val_path) if val_path is not None and val_path.exists() else []
    seed = int(settings.get("seed", 0))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.sweep:
        sweep: dict = {"schema_version": 1, "r_min_sweep": [], "strategy_sweep": []}
        for r_min in (4, 5, 6, 7, 8):
            run = dict(settings, r_min=r_min)
            _, report, mcfg, _ = _train_once(samples, val_samples, run, seed)
            sweep["r_min_sweep"].append(
                {"r_min": r_min, "strategy": mcfg.strategy,
                 "mean_ap": report.mean_ap, "macro_auc": report.macro_auc,
                 "final_loss": report.final_loss}
            )
            LOG.info("sweep r_min=%d: mAP %.4f", r_min, report.mean_ap)
        for strategy in ("max_diff", "min_diff", "random"):
            run = dict(settings, strategy=strategy)
            _, report, mcfg, _ = _train_once(samples, val_samples, run, seed)
            sweep["strategy_sweep"].append(
                {"strategy": strategy, "r_min": mcfg.r_min,
                 "mean_ap": report.mean_ap, "macro_auc": report.macro_auc,
                 "final_loss": report.final_loss}
            )
            LOG.info("sweep strategy=%s: mAP %.4f", strategy, report.mean_ap)
        (out / "sweep.json").write_text(json.dumps(sweep, indent=2) + "\n", encoding="utf-8")
        return 0

    state, report, mcfg, tcfg = _train_once(samples, val_samples, settings, seed)
    ckpt = out / "checkpoint.hhnm"
    save_checkpoint(state, ckpt)
    Path(str(ckpt) + ".config.json").write_text(
        json.dumps(_sidecar_doc(mcfg, state.seq_dim, state.video_dim), indent=2) + "\n",
        encoding="utf-8",
    )
    _write_metrics(out / "metrics.json", report.to_dict())
    with open(out / "loss_curve.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for i, value in enumerate(report.loss_curve):
            writer.writerow([i, repr(value)])
    LOG.info("best validation mAP %.4f; wrote %s", report.mean_ap, ckpt)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise ValidationError(f"checkpoint not found: {ckpt}")
    sidecar = Path(str(ckpt) + ".config.json")
    settings: dict = {}
    seq_dim = video_dim = None
    if sidecar.exists():
        doc = json.loads(sidecar.read_text(encoding="utf-8"))
        settings.update(doc.get("model", {}))
        seq_dim, video_dim = doc.get("seq_dim"), doc.get("video_dim")
    settings.update(_load_config_file(getattr(args, "config", None)))
    settings.update(_flag_overrides(args))

    manifest = _resolve_manifest(args.data, "test.ndjson")
    samples = load_dataset(manifest)
    if not samples:
        raise ValidationError(f"manifest {manifest} lists no samples")
    cfg = _graph_settings_to_config(settings, n_classes=len(samples[0].labels))
    if seq_dim is None:
        seq_dim = samples[0].seq_nodes[0].features.shape[0]
    if video_dim is None:
        video_dim = samples[0].video_nodes[0].features.shape[0]
    state = init_state(cfg, int(seq_dim), int(video_dim), seed=0)
    load_checkpoint(ckpt, state)

    seed = int(settings.get("seed", 0))
    graphs = build_dataset_graphs(samples, cfg, seed)
    labels = np.vstack([s.labels for s in samples])
    probs = evaluate(graphs, labels, state, cfg)
    report = compute_metrics(probs, labels)
    doc = report.to_dict()
    if args.out:
        _write_metrics(Path(args.out), doc)
        LOG.info("wrote metrics to %s", args.out)
    else:
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return 0


def _cmd_inspect(args: argparse.Namespace) -> int:
    path = Path(args.path)
    if not path.exists():
        raise ValidationError(f"path not found: {path}")
    head = path.open("rb").read(4) if path.is_file() else b""
    if head == b"HHNF":
        matrix = read_feature_blob(path)
        print(f"feature blob {path}")
        print(f"  shape: {matrix.shape[0]} x {matrix.shape[1]} (float32 on disk)")
        print(f"  min {matrix.min():.6g}  max {matrix.max():.6g}  mean {matrix.mean():.6g}")
        return 0
    if head == b"HHNM":
        shapes = scan_checkpoint(path)
        total = sum(r * c for r, c in shapes)
        print(f"checkpoint {path}")
        print(f"  tensors: {len(shapes)}  total parameters: {total}")
        for i, (r, c) in enumerate(shapes):
            print(f"  tensor {i}: {r} x {c}")
        return 0
    manifests = load_manifest(path)
    print(f"manifest {path}")
    print(f"  samples: {len(manifests)}")
    if manifests:
        n_classes = len(manifests[0].labels)
        seq_nodes = [len(m.sequence.t_start) for m in manifests]
        video_nodes = [len(m.video.t_start) for m in manifests]
        print(f"  classes: {n_classes}")
        print(f"  sequence nodes per sample: min {min(seq_nodes)} max {max(seq_nodes)}")
        print(f"  video nodes per sample: min {min(video_nodes)} max {max(video_nodes)}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "build-graph": _cmd_build_graph,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, ConfigError, FormatError, DimensionError) as exc:
        LOG.error("%s", exc)
        return 1
    except FileNotFoundError as exc:
        LOG.error("%s", exc)
        return 1
    except HHNError as exc:
        LOG.error("%s", exc)
        return 2
    except OSError as exc:
        LOG.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
