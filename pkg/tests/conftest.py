"""Shared oracle helpers for the test suite.

These deliberately re-derive quantities through independent routes (indicator
inner products, configuration-pair double sums, materialized projections) so
the library code is never checked against itself.
"""

import math

import numpy as np
import pytest

from pottsglass import core


def indicator_inner_product(sig: np.ndarray, tau: np.ndarray) -> float:
    """Coefficient-space covariance oracle: sum_ij 1{s_i=s_j} 1{t_i=t_j} / n."""
    n = sig.size
    ms = sig[:, None] == sig[None, :]
    mt = tau[:, None] == tau[None, :]
    return float((ms & mt).sum() / n)


def match_matrix_flat(colors: np.ndarray) -> np.ndarray:
    """(m, n*n) flattened site-match indicators for a batch of configs."""
    return (colors[:, :, None] == colors[:, None, :]).reshape(colors.shape[0], -1)


def gram_pair_covariances(colors: np.ndarray) -> np.ndarray:
    """All-pairs covariance oracle: entry (i, j) = n ||R(sigma_i, sigma_j)||_F^2."""
    m = match_matrix_flat(colors).astype(np.float64)
    return m @ m.T / colors.shape[1]


def brute_force_energy(colors: np.ndarray, g: np.ndarray) -> float:
    """Scalar double-loop Hamiltonian, the slowest possible oracle."""
    n = colors.size
    total = 0.0
    for i in range(n):
        for j in range(n):
            if colors[i] == colors[j]:
                total += g[i, j]
    return total / math.sqrt(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_config(rng, n: int, kappa: int) -> core.SpinConfig:
    return core.SpinConfig(rng.integers(1, kappa + 1, size=n), kappa)
