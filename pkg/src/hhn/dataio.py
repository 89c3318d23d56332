"""Feature-blob and manifest I/O plus per-sample node assembly.

Feature blobs use the "HHNF" layout: 4 magic bytes, then little-endian
u32 version (=1), u32 rows, u32 cols, then rows*cols IEEE-754 float32
values in row-major order.  Storage is float32; everything is widened to
float64 on load.  Manifests are newline-delimited JSON, one sample per
line, with keys ``sample_id``, ``labels`` and
``modalities.{sequence,video}.{blob, t_start[], t_end[]}``.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

BLOB_MAGIC = b"HHNF"
BLOB_VERSION = 1
_HEADER = struct.Struct("<III")


class Modality(enum.Enum):
    SEQUENCE = "sequence"
    VIDEO = "video"


@dataclass
class SegmentNode:
    """One timestamped feature vector of one modality."""

    modality: Modality
    index: int
    t_start: int
    t_end: int
    features: np.ndarray


@dataclass
class ModalityTable:
    """Blob reference plus the segment timing table for one modality."""

    blob: str
    t_start: list[int]
    t_end: list[int]


@dataclass
class SampleManifest:
    sample_id: str
    labels: list[int]
    sequence: ModalityTable
    video: ModalityTable


@dataclass
class Sample:
    """A fully assembled sample: nodes per modality plus its label vector."""

    sample_id: str
    seq_nodes: list[SegmentNode]
    video_nodes: list[SegmentNode]
    labels: np.ndarray


def write_feature_blob(matrix: np.ndarray, path) -> None:
    """Write a matrix as an HHNF v1 blob (float32 payload)."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValidationError(f"feature blob needs a non-empty 2-D matrix, got shape {m.shape}")
    rows, cols = m.shape
    payload = np.ascontiguousarray(m, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(BLOB_MAGIC)
        fh.write(_HEADER.pack(BLOB_VERSION, rows, cols))
        fh.write(payload)


def read_feature_blob(path) -> np.ndarray:
    """Read an HHNF blob back as a float64 matrix (inverse of the writer)."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != BLOB_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {BLOB_MAGIC!r}")
    if len(data) < 16:
        raise FormatError(f"{path}: truncated header, got {len(data)} bytes, need 16")
    version, rows, cols = _HEADER.unpack_from(data, 4)
    if version != BLOB_VERSION:
        raise FormatError(f"{path}: unsupported blob version {version}")
    expected = 16 + rows * cols * 4
    if len(data) != expected:
        raise FormatError(
            f"{path}: payload size mismatch, expected {expected} bytes total, got {len(data)}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=16)
    return values.astype(np.float64).reshape(rows, cols)


def _parse_timing(raw, what: str, line_no: int) -> list[int]:
    if not isinstance(raw, list) or not raw:
        raise ValidationError(f"manifest line {line_no}: {what} must be a non-empty list")
    try:
        return [int(v) for v in raw]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"manifest line {line_no}: {what} holds a non-integer: {exc}") from exc


def _parse_modality(obj, name: str, line_no: int) -> ModalityTable:
    if not isinstance(obj, dict):
        raise ValidationError(f"manifest line {line_no}: modalities.{name} must be an object")
    missing = {"blob", "t_start", "t_end"} - obj.keys()
    if missing:
        raise ValidationError(f"manifest line {line_no}: modalities.{name} missing keys {sorted(missing)}")
    t_start = _parse_timing(obj["t_start"], f"modalities.{name}.t_start", line_no)
    t_end = _parse_timing(obj["t_end"], f"modalities.{name}.t_end", line_no)
    if len(t_start) != len(t_end):
        raise ValidationError(
            f"manifest line {line_no}: modalities.{name} timing lengths differ "
            f"({len(t_start)} vs {len(t_end)})"
        )
    return ModalityTable(blob=str(obj["blob"]), t_start=t_start, t_end=t_end)


def load_manifest(path) -> list[SampleManifest]:
    """Parse an NDJSON manifest file; rejects duplicate ids and ragged labels."""
    manifests: list[SampleManifest] = []
    seen: set[str] = set()
    n_classes: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"manifest line {line_no}: invalid JSON: {exc}") from exc
            if not isinstance(doc, dict):
                raise ValidationError(f"manifest line {line_no}: expected a JSON object")
            for key in ("sample_id", "labels", "modalities"):
                if key not in doc:
                    raise ValidationError(f"manifest line {line_no}: missing key {key!r}")
            sample_id = str(doc["sample_id"])
            if sample_id in seen:
                raise ValidationError(f"manifest line {line_no}: duplicate sample_id {sample_id!r}")
            seen.add(sample_id)
            labels = doc["labels"]
            if not isinstance(labels, list) or not labels or any(v not in (0, 1) for v in labels):
                raise ValidationError(
                    f"manifest line {line_no}: labels must be a non-empty list of 0/1 values"
                )
            if n_classes is None:
                n_classes = len(labels)
            elif len(labels) != n_classes:
                raise ValidationError(
                    f"manifest line {line_no}: label length {len(labels)} != dataset class count {n_classes}"
                )
            mods = doc["modalities"]
            if not isinstance(mods, dict):
                raise ValidationError(f"manifest line {line_no}: modalities must be an object")
            for name in ("sequence", "video"):
                if name not in mods:
                    raise ValidationError(f"manifest line {line_no}: modalities missing {name!r}")
            manifests.append(
                SampleManifest(
                    sample_id=sample_id,
                    labels=[int(v) for v in labels],
                    sequence=_parse_modality(mods["sequence"], "sequence", line_no),
                    video=_parse_modality(mods["video"], "video", line_no),
                )
            )
    return manifests


def _assemble_modality(kind: Modality, table: ModalityTable, base_dir: Path | None, sample_id: str) -> list[SegmentNode]:
    blob_path = Path(table.blob)
    if base_dir is not None and not blob_path.is_absolute():
        blob_path = base_dir / blob_path
    features = read_feature_blob(blob_path)
    n = len(table.t_start)
    if features.shape[0] != n:
        raise ValidationError(
            f"sample {sample_id!r} {kind.value}: blob has {features.shape[0]} rows "
            f"but the timing table lists {n} segments"
        )
    nodes: list[SegmentNode] = []
    prev_start: int | None = None
    for i in range(n):
        t0, t1 = table.t_start[i], table.t_end[i]
        if t1 <= t0:
            raise ValidationError(
                f"sample {sample_id!r} {kind.value} segment {i}: t_end {t1} must exceed t_start {t0}"
            )
        if prev_start is not None and t0 <= prev_start:
            raise ValidationError(
                f"sample {sample_id!r} {kind.value} segment {i}: t_start {t0} must be strictly "
                f"increasing (previous {prev_start})"
            )
        prev_start = t0
        nodes.append(SegmentNode(kind, i, t0, t1, features[i]))
    return nodes


def assemble_sample(manifest: SampleManifest, base_dir=None) -> Sample:
    """Pair blob rows with timing rows, preserving row order, into a Sample."""
    base = Path(base_dir) if base_dir is not None else None
    seq = _assemble_modality(Modality.SEQUENCE, manifest.sequence, base, manifest.sample_id)
    video = _assemble_modality(Modality.VIDEO, manifest.video, base, manifest.sample_id)
    labels = np.asarray(manifest.labels, dtype=np.float64)
    return Sample(manifest.sample_id, seq, video, labels)


def load_dataset(manifest_path) -> list[Sample]:
    """Load and assemble every sample listed in a manifest.

    Relative blob paths are resolved against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    return [assemble_sample(m, base) for m in load_manifest(manifest_path)]
