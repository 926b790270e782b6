"""Dataset containers and feature file ingestion.

Feature files come in two flavours:

* CSV with header ``id,label,f0,f1,...`` (UTF-8).
* Raw binary: 16-byte header (magic ``SMCF``, u32-LE n_samples, u32-LE
  d_feat), then n_samples x d_feat float32-LE row-major, then n_samples
  int32-LE labels.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"SMCF"


@dataclass
class FeatureSet:
    """Per-sample feature vectors with integer class labels and stable ids."""

    features: np.ndarray  # (n_samples, d_feat) float64
    labels: np.ndarray    # (n_samples,) int
    ids: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise ValueError("features must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite entries")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels length must match n_samples")
        if np.any(self.labels < 0):
            raise ValueError("labels must be non-negative class ids")
        if not self.ids:
            self.ids = [str(i) for i in range(self.features.shape[0])]
        if len(self.ids) != self.features.shape[0]:
            raise ValueError("ids length must match n_samples")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("ids must be unique")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def d_feat(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass
class Batch:
    """A subset of a FeatureSet, by index."""

    indices: list
    kind: str = "train"  # train | validation

    def __post_init__(self):
        self.indices = [int(i) for i in self.indices]
        if not self.indices:
            raise ValueError("batch must be non-empty")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("batch indices must be unique")
        if self.kind not in ("train", "validation"):
            raise ValueError(f"unknown batch kind {self.kind!r}")

    def validate_against(self, features: FeatureSet) -> None:
        n = features.n_samples
        for i in self.indices:
            if not 0 <= i < n:
                raise IndexError(f"batch index {i} out of bounds for {n} samples")

    def __len__(self) -> int:
        return len(self.indices)


def load_features_csv(path) -> FeatureSet:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise ValueError(f"{path}: expected header 'id,label,f0,...', got {header[:3]}")
        ids, labels, rows = [], [], []
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            labels.append(int(row[1]))
            rows.append([float(v) for v in row[2:]])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return FeatureSet(np.asarray(rows), np.asarray(labels), ids)


def save_features_csv(path, features: FeatureSet) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + [f"f{i}" for i in range(features.d_feat)])
        for i in range(features.n_samples):
            writer.writerow(
                [features.ids[i], int(features.labels[i])]
                + [repr(float(v)) for v in features.features[i]]
            )


def load_features_binary(path) -> FeatureSet:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != MAGIC:
            raise ValueError(f"{path}: bad magic, expected {MAGIC!r}")
        n, d = struct.unpack("<II", header[4:12])
        if n < 1 or d < 1:
            raise ValueError(f"{path}: invalid dimensions {n}x{d}")
        feat_bytes = fh.read(4 * n * d)
        if len(feat_bytes) != 4 * n * d:
            raise ValueError(f"{path}: truncated feature block")
        feats = np.frombuffer(feat_bytes, dtype="<f4", count=n * d)
        label_bytes = fh.read(4 * n)
        if len(label_bytes) != 4 * n:
            raise ValueError(f"{path}: truncated label block")
        labels = np.frombuffer(label_bytes, dtype="<i4", count=n)
    return FeatureSet(feats.reshape(n, d).astype(np.float64), labels.astype(np.int64))


def save_features_binary(path, features: FeatureSet) -> None:
    n, d = features.n_samples, features.d_feat
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", n, d) + b"\x00\x00\x00\x00")
        fh.write(features.features.astype("<f4").tobytes(order="C"))
        fh.write(features.labels.astype("<i4").tobytes())


def gaussian_blobs(n_samples, d_feat=10, separation=2.0, seed=0,
                   n_classes=2) -> FeatureSet:
    """Isotropic unit-variance Gaussian classes with the given mean separation."""
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(d_feat)
    direction /= np.linalg.norm(direction)
    centers = [(k - (n_classes - 1) / 2.0) * separation * direction
               for k in range(n_classes)]
    labels = rng.integers(0, n_classes, size=n_samples)
    feats = rng.standard_normal((n_samples, d_feat)) + np.take(centers, labels, axis=0)
    return FeatureSet(feats, labels)
