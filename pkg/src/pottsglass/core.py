"""Configurations, quenched disorder, Hamiltonians, and overlap machinery.

Conventions used throughout the package:

* Colors are 1-based integers ``1..kappa``; site indices are 0-based.
* The Hamiltonian double sum runs over *all* ordered pairs ``(i, j)``,
  including the diagonal ``i == j``.  Many spin-glass codes drop the
  diagonal; here it is kept.
* Magnetization and overlap counts are exact integers over ``n``; floating
  point enters only at the energy/covariance layer.
* All types are immutable after construction and safe to share across
  threads.  Enumeration streams are single-consumer.

Randomness: coupling matrices come from the counter-based Philox bit
generator keyed with ``(seed, stream)``.  Each matrix entry is a 53-bit
uniform pushed through the inverse normal CDF, so a matrix is reproducible
bit-for-bit across platforms from ``(n, seed, stream)``.  Streams are
namespaced by purpose: disorder replica ``r`` uses stream ``r``, Monte Carlo
chain ``c`` uses ``CHAIN_NAMESPACE | c``, optimizer restart ``i`` uses
``RESTART_NAMESPACE | i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterator

import numpy as np
from scipy.special import ndtri

__all__ = [
    "CHAIN_NAMESPACE",
    "RESTART_NAMESPACE",
    "TEMPER_NAMESPACE",
    "DimensionMismatchError",
    "DivisibilityError",
    "EnumerationCapError",
    "SectorError",
    "SpinConfig",
    "MagnetizationVector",
    "CouplingMatrix",
    "OverlapMatrix",
    "Projection",
    "philox_generator",
    "hamiltonian_raw",
    "hamiltonian_centered",
    "centering_shift",
    "delta_energy",
    "magnetization",
    "overlap",
    "covariance_raw",
    "covariance_centered",
    "sector_counts",
    "count_configs",
    "enumerate_configs",
    "config_array",
    "batch_energies_raw",
]

_MASK64 = (1 << 64) - 1

# Stream namespaces for the seed-splitting rule (see module docstring).
CHAIN_NAMESPACE = 1 << 32
RESTART_NAMESPACE = 2 << 32
TEMPER_NAMESPACE = 3 << 32


class DimensionMismatchError(ValueError):
    """Configuration and coupling matrix sizes disagree."""


class DivisibilityError(ValueError):
    """A sector constraint requires a divisibility condition that fails."""


class EnumerationCapError(RuntimeError):
    """An exact enumeration would exceed the configured state cap."""


class SectorError(ValueError):
    """An operation was asked to run on a sector it does not support."""


def philox_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Deterministic generator for the given (seed, stream) pair."""
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, stream & _MASK64]))


def _standard_normal(n_rows: int, n_cols: int, seed: int, stream: int) -> np.ndarray:
    """Inverse-CDF normals from Philox 53-bit uniforms (platform stable)."""
    rng = philox_generator(seed, stream)
    k = rng.integers(0, 1 << 53, size=(n_rows, n_cols))
    return ndtri((k + 0.5) * 2.0 ** -53)


@dataclass(frozen=True, eq=False)
class SpinConfig:
    """An assignment of one of ``kappa`` colors to each of ``n`` sites."""

    colors: np.ndarray
    kappa: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.colors, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("colors must be a non-empty 1-d sequence")
        if self.kappa < 2:
            raise ValueError(f"kappa must be >= 2, got {self.kappa}")
        if arr.min() < 1 or arr.max() > self.kappa:
            raise ValueError(f"colors must lie in [1, {self.kappa}]")
        arr.setflags(write=False)
        object.__setattr__(self, "colors", arr)

    @property
    def n(self) -> int:
        return int(self.colors.size)

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.colors)

    def with_color(self, site: int, new_color: int) -> "SpinConfig":
        """Copy with one site recolored."""
        if not 0 <= site < self.n:
            raise IndexError(f"site {site} out of range [0, {self.n})")
        if not 1 <= new_color <= self.kappa:
            raise ValueError(f"color {new_color} out of range [1, {self.kappa}]")
        arr = self.colors.copy()
        arr[site] = new_color
        return SpinConfig(arr, self.kappa)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpinConfig)
            and self.kappa == other.kappa
            and np.array_equal(self.colors, other.colors)
        )


@dataclass(frozen=True, eq=False)
class MagnetizationVector:
    """Per-color site fractions, kept as exact integer counts over ``n``."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.counts, dtype=np.int64)
        if arr.min() < 0 or int(arr.sum()) != self.n:
            raise ValueError("counts must be nonnegative and sum to n")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def fractions(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(int(c), self.n) for c in self.counts)

    def asarray(self) -> np.ndarray:
        return self.counts / self.n

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MagnetizationVector)
            and self.n == other.n
            and np.array_equal(self.counts, other.counts)
        )


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """The n-by-n quenched Gaussian disorder with its seed provenance.

    ``seed``/``stream`` are ``None`` for derived matrices (e.g. gauge flips)
    that were not drawn directly from the generator.
    """

    g: np.ndarray
    seed: int | None = None
    stream: int | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.g, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("coupling matrix must be square")
        arr.setflags(write=False)
        object.__setattr__(self, "g", arr)

    @classmethod
    def from_seed(cls, n: int, seed: int, stream: int = 0) -> "CouplingMatrix":
        return cls(_standard_normal(n, n, seed, stream), seed=seed, stream=stream)

    @property
    def n(self) -> int:
        return int(self.g.shape[0])

    def flipped_at(self, site: int) -> "CouplingMatrix":
        """Sign-flip every coupling incident to ``site`` (diagonal untouched)."""
        if not 0 <= site < self.n:
            raise IndexError(f"site {site} out of range [0, {self.n})")
        g = self.g.copy()
        g[site, :] *= -1.0
        g[:, site] *= -1.0  # the diagonal entry is flipped twice, restoring it
        return CouplingMatrix(g)


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    """Joint color counts of two configurations, exact integers over ``n``."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.counts, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("overlap counts must be square")
        if arr.min() < 0 or int(arr.sum()) != self.n:
            raise ValueError("overlap counts must be nonnegative and sum to n")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def kappa(self) -> int:
        return int(self.counts.shape[0])

    def asarray(self) -> np.ndarray:
        return self.counts / self.n

    def row_sums(self) -> MagnetizationVector:
        return MagnetizationVector(self.counts.sum(axis=1), self.n)

    def col_sums(self) -> MagnetizationVector:
        return MagnetizationVector(self.counts.sum(axis=0), self.n)


@dataclass(frozen=True)
class Projection:
    """Orthogonal projection onto the complement of the all-ones direction."""

    kappa: int

    def materialize(self) -> np.ndarray:
        k = self.kappa
        return np.eye(k) - np.full((k, k), 1.0 / k)


def _check_pair(sigma: SpinConfig, g: CouplingMatrix) -> None:
    if sigma.n != g.n:
        raise DimensionMismatchError(f"config has {sigma.n} sites, coupling is {g.n}x{g.n}")


def hamiltonian_raw(sigma: SpinConfig, g: CouplingMatrix) -> float:
    """Energy ``n^{-1/2} sum_{i,j} g_ij 1{sigma_i = sigma_j}`` (diagonal included)."""
    _check_pair(sigma, g)
    c = sigma.colors
    mask = c[:, None] == c[None, :]
    return float(g.g[mask].sum() / math.sqrt(sigma.n))


def centering_shift(g: CouplingMatrix, kappa: int) -> float:
    """The configuration-independent shift ``n^{-1/2} kappa^{-1} sum_{i,j} g_ij``."""
    return float(g.g.sum() / (kappa * math.sqrt(g.n)))


def hamiltonian_centered(sigma: SpinConfig, g: CouplingMatrix) -> float:
    """Energy with the color indicator replaced by ``1{.} - 1/kappa``."""
    _check_pair(sigma, g)
    return hamiltonian_raw(sigma, g) - centering_shift(g, sigma.kappa)


def delta_energy(sigma: SpinConfig, g: CouplingMatrix, site: int, new_color: int) -> float:
    """Energy change from recoloring one site, in O(n).

    Identical for the raw and centered Hamiltonians since the centering
    shift does not depend on the configuration.
    """
    _check_pair(sigma, g)
    if not 0 <= site < sigma.n:
        raise IndexError(f"site {site} out of range [0, {sigma.n})")
    if not 1 <= new_color <= sigma.kappa:
        raise ValueError(f"color {new_color} out of range [1, {sigma.kappa}]")
    old = int(sigma.colors[site])
    if new_color == old:
        return 0.0
    c = sigma.colors
    row = g.g[site, :] + g.g[:, site]
    gain = row[c == new_color].sum()
    loss = row[c == old].sum() - row[site]  # exclude the self term; it never changes
    return float((gain - loss) / math.sqrt(sigma.n))


def magnetization(sigma: SpinConfig) -> MagnetizationVector:
    counts = np.bincount(sigma.colors - 1, minlength=sigma.kappa)
    return MagnetizationVector(counts, sigma.n)


def overlap(sigma: SpinConfig, tau: SpinConfig) -> OverlapMatrix:
    """Joint color-count matrix; row sums are sigma's counts, columns tau's."""
    if sigma.n != tau.n or sigma.kappa != tau.kappa:
        raise DimensionMismatchError("configs must share n and kappa")
    k = sigma.kappa
    codes = (sigma.colors - 1) * k + (tau.colors - 1)
    counts = np.bincount(codes, minlength=k * k).reshape(k, k)
    return OverlapMatrix(counts, sigma.n)


def covariance_raw(sigma: SpinConfig, tau: SpinConfig) -> float:
    """Hamiltonian covariance ``n * ||R(sigma, tau)||_F^2`` (deterministic)."""
    r = overlap(sigma, tau)
    return float((r.counts.astype(np.float64) ** 2).sum() / sigma.n)


def covariance_centered(sigma: SpinConfig, tau: SpinConfig) -> float:
    """Centered-Hamiltonian covariance ``n * ||P R P||_F^2``."""
    r = overlap(sigma, tau).asarray()
    p = Projection(sigma.kappa).materialize()
    m = p @ r @ p
    return float(sigma.n * (m ** 2).sum())


def sector_counts(n: int, kappa: int, constraint) -> np.ndarray | None:
    """Normalize a sector constraint to a per-color count vector.

    ``constraint`` is ``"all"`` (returns None), ``"balanced"``, or a sequence
    of per-color site counts summing to ``n``.
    """
    if constraint == "all" or constraint is None:
        return None
    if constraint == "balanced":
        if n % kappa != 0:
            raise DivisibilityError(f"balanced sector needs kappa | n, got n={n}, kappa={kappa}")
        return np.full(kappa, n // kappa, dtype=np.int64)
    if isinstance(constraint, MagnetizationVector):
        counts = np.asarray(constraint.counts, dtype=np.int64)
    else:
        counts = np.asarray(list(constraint), dtype=np.int64)
    if counts.size != kappa:
        raise DivisibilityError(f"fixed-d constraint needs {kappa} counts, got {counts.size}")
    if counts.min() < 0 or int(counts.sum()) != n:
        raise DivisibilityError(f"fixed-d counts must be nonnegative and sum to n={n}")
    return counts


def count_configs(n: int, kappa: int, constraint="all") -> int:
    """Exact cardinality of a sector, without enumerating it."""
    counts = sector_counts(n, kappa, constraint)
    if counts is None:
        return kappa ** n
    total = math.factorial(n)
    for c in counts:
        total //= math.factorial(int(c))
    return total


def _multiset_permutations(counts: np.ndarray) -> Iterator[np.ndarray]:
    """Lexicographic stream of all arrangements of the given color counts."""
    n = int(counts.sum())
    kappa = counts.size
    work = counts.copy()
    out = np.empty(n, dtype=np.int64)

    def rec(pos: int) -> Iterator[np.ndarray]:
        if pos == n:
            yield out.copy()
            return
        for c in range(kappa):
            if work[c] > 0:
                work[c] -= 1
                out[pos] = c + 1
                yield from rec(pos + 1)
                work[c] += 1

    yield from rec(0)


def enumerate_configs(n: int, kappa: int, constraint="all") -> Iterator[SpinConfig]:
    """Yield each configuration of the sector exactly once."""
    counts = sector_counts(n, kappa, constraint)
    if counts is None:
        for colors in product(range(1, kappa + 1), repeat=n):
            yield SpinConfig(np.array(colors, dtype=np.int64), kappa)
    else:
        for colors in _multiset_permutations(counts):
            yield SpinConfig(colors, kappa)


def config_array(n: int, kappa: int, constraint="all", cap: int | None = None) -> np.ndarray:
    """All sector configurations as one ``(count, n)`` int array.

    The ordering matches :func:`enumerate_configs`.  Raises
    :class:`EnumerationCapError` before materializing anything too large.
    """
    total = count_configs(n, kappa, constraint)
    if cap is not None and total > cap:
        raise EnumerationCapError(
            f"sector has {total} configurations, exceeding the cap of {cap}"
        )
    counts = sector_counts(n, kappa, constraint)
    if counts is None:
        idx = np.arange(total, dtype=np.int64)
        cols = np.empty((total, n), dtype=np.int64)
        for j in range(n):
            cols[:, j] = (idx // kappa ** (n - 1 - j)) % kappa + 1
        return cols
    return np.array(list(_multiset_permutations(counts)), dtype=np.int64)


def batch_energies_raw(colors: np.ndarray, g: CouplingMatrix, chunk: int = 4096) -> np.ndarray:
    """Raw Hamiltonian of every row of a ``(m, n)`` color matrix."""
    colors = np.asarray(colors, dtype=np.int64)
    m, n = colors.shape
    if n != g.n:
        raise DimensionMismatchError(f"configs have {n} sites, coupling is {g.n}x{g.n}")
    flat = g.g.reshape(-1)
    sqn = math.sqrt(n)
    out = np.empty(m, dtype=np.float64)
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        blk = colors[lo:hi]
        mask = (blk[:, :, None] == blk[:, None, :]).reshape(hi - lo, -1)
        out[lo:hi] = mask.astype(np.float64) @ flat / sqn
    return out
