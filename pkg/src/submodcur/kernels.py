"""Pairwise similarity kernels over mini-batches.

All similarities live in [0, 1]: cosine similarity is shifted via
(c + 1) / 2 so that disparity objectives (1 - s_ij) stay non-negative,
and the RBF kernel is bounded by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Batch, FeatureSet

METRICS = ("cosine-shifted", "rbf")


@dataclass
class SimilarityMatrix:
    """Dense symmetric similarity kernel over an ordered ground set."""

    entries: np.ndarray
    metric: str

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float64)
        n = self.entries.shape[0]
        if self.entries.shape != (n, n):
            raise ValueError("similarity matrix must be square")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("similarity matrix has non-finite entries")
        if not np.array_equal(self.entries, self.entries.T):
            raise ValueError("similarity matrix must be exactly symmetric")
        if self.entries.min() < 0.0 or self.entries.max() > 1.0:
            raise ValueError("similarities must lie in [0, 1]")
        diag = np.diag(self.entries)
        if self.metric == "cosine-shifted" and not np.all(diag == 1.0):
            raise ValueError("cosine-shifted kernel must have unit diagonal")
        if self.metric == "rbf" and np.any(diag <= 0.0):
            raise ValueError("rbf kernel must have positive diagonal")

    @property
    def ground_size(self) -> int:
        return self.entries.shape[0]


def median_bandwidth(vectors: np.ndarray) -> float:
    """Median pairwise Euclidean distance; falls back to 1.0 if degenerate."""
    n = vectors.shape[0]
    if n < 2:
        return 1.0
    sq = np.sum(vectors**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * vectors @ vectors.T, 0.0)
    dists = np.sqrt(d2[np.triu_indices(n, k=1)])
    med = float(np.median(dists))
    return med if med > 0.0 else 1.0


def _shifted_cosine(vectors: np.ndarray, ids) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1)
    bad = np.nonzero(norms == 0.0)[0]
    if bad.size:
        raise ValueError(f"zero-norm vector for id {ids[bad[0]]!r} under cosine metric")
    unit = vectors / norms[:, None]
    cos = np.clip(unit @ unit.T, -1.0, 1.0)
    s = (cos + 1.0) / 2.0
    s = (s + s.T) / 2.0
    np.fill_diagonal(s, 1.0)
    return s


def build_kernel(features: FeatureSet, subset: Batch, metric: str = "cosine-shifted",
                 bandwidth: float | None = None) -> SimilarityMatrix:
    """Similarity kernel over ``subset`` in its given order.

    ``bandwidth`` applies to rbf only; default is the batch median heuristic.
    """
    subset.validate_against(features)
    vectors = features.features[subset.indices]
    if metric == "cosine-shifted":
        s = _shifted_cosine(vectors, [features.ids[i] for i in subset.indices])
    elif metric == "rbf":
        if bandwidth is None:
            bandwidth = median_bandwidth(vectors)
        if bandwidth <= 0.0:
            raise ValueError("bandwidth must be positive")
        sq = np.sum(vectors**2, axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * vectors @ vectors.T, 0.0)
        s = np.exp(-d2 / (2.0 * bandwidth**2))
        s = np.clip((s + s.T) / 2.0, 0.0, 1.0)
        np.fill_diagonal(s, 1.0)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return SimilarityMatrix(s, metric)


def gradient_features(columns: np.ndarray) -> SimilarityMatrix:
    """Shifted-cosine kernel over per-sample gradient columns (d x m)."""
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim != 2 or columns.shape[1] < 1:
        raise ValueError("gradient matrix must be d x m with m >= 1")
    vectors = columns.T
    s = _shifted_cosine(vectors, [f"grad-col-{j}" for j in range(vectors.shape[0])])
    return SimilarityMatrix(s, "cosine-shifted")
