"""Shared fixtures and random-instance factories for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from submodcur.kernels import SimilarityMatrix
from submodcur.objectives import MI_KINDS, SubmodularObjective


def random_kernel(rng: np.random.Generator, n: int) -> SimilarityMatrix:
    """Random symmetric similarity matrix with unit diagonal in [0, 1]."""
    raw = rng.random((n, n))
    s = (raw + raw.T) / 2.0
    np.fill_diagonal(s, 1.0)
    return SimilarityMatrix(s, "cosine-shifted")


def random_psd_kernel(rng: np.random.Generator, n: int,
                      d: int = 6) -> SimilarityMatrix:
    """Shifted-cosine kernel of random vectors: PSD, unit diagonal, [0, 1]."""
    vectors = rng.standard_normal((n, d))
    unit = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    s = (np.clip(unit @ unit.T, -1.0, 1.0) + 1.0) / 2.0
    s = (s + s.T) / 2.0
    np.fill_diagonal(s, 1.0)
    return SimilarityMatrix(s, "cosine-shifted")


def random_objective(rng: np.random.Generator, kind: str, n: int,
                     n_query: int = 2, **params) -> SubmodularObjective:
    """Random instance of ``kind``; MI kinds get the last indices as query."""
    needs_psd = kind in ("log-determinant", "logdet-mi")
    if kind in MI_KINDS:
        total = n + n_query
        kernel = random_psd_kernel(rng, total) if needs_psd \
            else random_kernel(rng, total)
        params.setdefault("query", list(range(n, n + n_query)))
        if kind == "logdet-mi":
            # keep the deflated kernel comfortably positive definite
            params.setdefault("eta_mi", 0.7)
            params.setdefault("ridge", 1e-3)
        return SubmodularObjective(kind=kind, kernel=kernel, **params)
    kernel = random_psd_kernel(rng, n) if needs_psd else random_kernel(rng, n)
    return SubmodularObjective(kind=kind, kernel=kernel, **params)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
