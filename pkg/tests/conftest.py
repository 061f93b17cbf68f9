"""Shared corpus builders for the fuzz and acceptance suites."""

import numpy as np
import pytest

from xbarspmv import SparseMatrix, SynthSpec, generate, with_values

LENGTHS = (4, 16, 64, 87, 256)
MAX_CORPUS_NNZ = 30_000


def corpus_case(i: int, seed: int):
    """One deterministic fuzz case: (matrix with integer values in 1..8,
    accelerator length, input vector with integer values in 1..8)."""
    rng = np.random.default_rng(seed)
    l = LENGTHS[i % len(LENGTHS)]
    n = int(round(10 ** rng.uniform(np.log10(8), np.log10(2048))))
    dist = ("uniform", "uniform", "power-law", "k-regular")[i % 4]
    if dist == "k-regular":
        k = int(rng.integers(1, max(2, min(n, MAX_CORPUS_NNZ // n))))
        spec = SynthSpec(dist, n, degree=k, seed=int(rng.integers(2**31)))
    else:
        p_cap = min(10 ** -0.7, MAX_CORPUS_NNZ / (n * n))
        p = min(10 ** rng.uniform(-2.5, -0.7), p_cap)
        p = max(p, 1.0 / (n * n))
        spec = SynthSpec(dist, n, density=float(p), seed=int(rng.integers(2**31)))
    mat = generate(spec)
    mat = with_values(mat, rng.integers(1, 9, mat.nnz).astype(float))
    v = rng.integers(1, 9, n).astype(float)
    return mat, l, v


def small_random_matrix(rng, max_n=48, max_density=0.4) -> SparseMatrix:
    m = int(rng.integers(1, max_n))
    n = int(rng.integers(1, max_n))
    dense = rng.random((m, n))
    dense[dense > max_density] = 0.0
    return SparseMatrix.from_dense(dense)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20250810)
