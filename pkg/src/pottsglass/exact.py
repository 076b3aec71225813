"""Brute-force-exact engines at small n.

Partition functions, free energies, Gibbs and annealed expectations, ground
states, the exact second-moment ratio over balanced overlap tables, the
Stirling expansion of the table law, and the two-color gauge identities.

Every log-scale accumulation uses running-max log-sum-exp; partition
functions are never exponentiated raw.  Factorials go through log-gamma in
double precision, while admissibility is checked in exact integers first.
Disorder replication derives child generators from one root seed and the
replica index (see :mod:`pottsglass.core`), so any single replica is
reproducible in isolation.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.special import gammaln

from .core import (
    CouplingMatrix,
    DivisibilityError,
    EnumerationCapError,
    SectorError,
    SpinConfig,
    batch_energies_raw,
    centering_shift,
    config_array,
    count_configs,
    sector_counts,
)

__all__ = [
    "DEFAULT_CAP",
    "AdmissibleMatrix",
    "FreeEnergySample",
    "QuenchedFreeEnergy",
    "GroundStateResult",
    "GaugePairResult",
    "MomentEstimate",
    "logsumexp",
    "log_partition",
    "quenched_free_energy",
    "gibbs_expectation",
    "ground_state",
    "enumerate_admissible",
    "admissible_array",
    "overlap_law_exact",
    "log_overlap_law",
    "second_moment_ratio",
    "ldp_log_probability",
    "shell_count",
    "shell_histogram",
    "uncentered_ratio",
    "uncentered_lower_bound",
    "annealed_log_partition_balanced",
    "gauge_pair_check",
    "magnetization_moment_exact",
    "magnetization_mgf_exact",
    "tail_probability_exact",
]

# Hard default for exact enumerations: number of states, not sites.
DEFAULT_CAP = 20_000_000


def logsumexp(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return -math.inf
    m = float(np.max(a))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(a - m))))


@dataclass(frozen=True, eq=False)
class AdmissibleMatrix:
    """kappa-by-kappa nonnegative integer table with all margins n/kappa."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.counts, dtype=np.int64)
        k = arr.shape[0]
        if arr.ndim != 2 or arr.shape[1] != k:
            raise ValueError("admissible table must be square")
        if self.n % k != 0:
            raise DivisibilityError(f"admissible table needs kappa | n, got n={self.n}, kappa={k}")
        margin = self.n // k
        if arr.min() < 0 or (arr.sum(axis=0) != margin).any() or (arr.sum(axis=1) != margin).any():
            raise ValueError(f"all row and column sums must equal n/kappa = {margin}")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def kappa(self) -> int:
        return int(self.counts.shape[0])

    def asarray(self) -> np.ndarray:
        return self.counts / self.n


@dataclass(frozen=True)
class FreeEnergySample:
    """One disorder realization's exact log partition value (nats)."""

    log_z: float
    n: int
    kappa: int
    beta: float
    seed: int | None
    stream: int | None
    sector: str
    kind: str

    @property
    def free_energy(self) -> float:
        return self.log_z / self.n


@dataclass(frozen=True)
class QuenchedFreeEnergy:
    mean: float
    stderr: float
    samples: tuple[FreeEnergySample, ...]

    @property
    def replicas(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class GroundStateResult:
    """Exact maximum energy and the full set of maximizing configurations."""

    energy: float
    maximizers: np.ndarray  # (count, n) color rows
    n: int
    kappa: int
    sector: str
    kind: str

    @property
    def degeneracy(self) -> int:
        return int(self.maximizers.shape[0])


def _sector_label(constraint) -> str:
    if constraint is None or constraint == "all":
        return "all"
    if constraint == "balanced":
        return "balanced"
    return "fixed"


def _sector_energies(g: CouplingMatrix, kappa: int, sector, kind: str, cap: int):
    """(colors, energies) for a whole sector under the requested Hamiltonian."""
    if kind not in ("raw", "centered"):
        raise ValueError(f"hamiltonian kind must be 'raw' or 'centered', got {kind!r}")
    colors = config_array(g.n, kappa, sector, cap=cap)
    energies = batch_energies_raw(colors, g)
    if kind == "centered":
        energies = energies - centering_shift(g, kappa)
    return colors, energies


def log_partition(
    g: CouplingMatrix,
    beta: float,
    kappa: int,
    sector="all",
    kind: str = "centered",
    cap: int = DEFAULT_CAP,
) -> FreeEnergySample:
    """Exact ``log sum_sigma exp(beta * H(sigma))`` over the sector."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    _, energies = _sector_energies(g, kappa, sector, kind, cap)
    return FreeEnergySample(
        log_z=logsumexp(beta * energies),
        n=g.n,
        kappa=kappa,
        beta=beta,
        seed=g.seed,
        stream=g.stream,
        sector=_sector_label(sector),
        kind=kind,
    )


def _quenched_one(args) -> FreeEnergySample:
    n, kappa, beta, sector, kind, cap, seed, stream = args
    g = CouplingMatrix.from_seed(n, seed, stream)
    return log_partition(g, beta, kappa, sector, kind, cap)


def quenched_free_energy(spec, workers: int | None = None) -> QuenchedFreeEnergy:
    """Mean and standard error of ``n^{-1} log Z`` over disorder replicas.

    ``spec`` needs fields ``kappa, n, beta, sector, kind, seed, replicas``
    (a single n and beta; see :class:`pottsglass.experiment.ExperimentSpec`).
    Replica ``r`` draws its coupling from stream ``r`` of the root seed, so
    results are independent of the worker count.
    """
    n = spec.n if isinstance(spec.n, int) else spec.n[0]
    beta = spec.beta if isinstance(spec.beta, float) else spec.beta[0]
    if spec.replicas < 2:
        raise ValueError("quenched averaging needs at least 2 replicas")
    jobs = [
        (n, spec.kappa, beta, spec.sector, spec.kind, spec.cap, spec.seed, r)
        for r in range(spec.replicas)
    ]
    workers = workers if workers is not None else getattr(spec, "workers", 1)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            samples = list(ex.map(_quenched_one, jobs, chunksize=8))
    else:
        samples = [_quenched_one(j) for j in jobs]
    vals = np.array([s.free_energy for s in samples])
    return QuenchedFreeEnergy(
        mean=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / math.sqrt(len(vals))),
        samples=tuple(samples),
    )


def gibbs_expectation(
    g: CouplingMatrix,
    beta: float,
    kappa: int,
    observable: Callable[[SpinConfig], float],
    sector="all",
    kind: str = "raw",
    cap: int = DEFAULT_CAP,
) -> float:
    """Exact Gibbs average of an observable, stabilized by the max energy.

    ``beta = inf`` uses the uniform distribution on the energy maximizers.
    """
    colors, energies = _sector_energies(g, kappa, sector, kind, cap)
    values = np.array(
        [observable(SpinConfig(row, kappa)) for row in colors], dtype=np.float64
    )
    if math.isinf(beta):
        w = (energies == energies.max()).astype(np.float64)
    else:
        w = np.exp(beta * (energies - energies.max()))
    return float((w * values).sum() / w.sum())


def ground_state(
    g: CouplingMatrix,
    kappa: int,
    sector="all",
    kind: str = "raw",
    cap: int = DEFAULT_CAP,
) -> GroundStateResult:
    """Exact maximum energy over the sector, with every maximizer kept.

    Float ties are kept as-is: configurations related by a global color
    permutation produce bit-identical energies, so the structural degeneracy
    is exact.
    """
    colors, energies = _sector_energies(g, kappa, sector, kind, cap)
    top = float(energies.max())
    return GroundStateResult(
        energy=top,
        maximizers=colors[energies == top],
        n=g.n,
        kappa=kappa,
        sector=_sector_label(sector),
        kind=kind,
    )


def enumerate_admissible(n: int, kappa: int) -> Iterator[AdmissibleMatrix]:
    """All kappa-by-kappa tables with margins n/kappa, by margin-constrained fill."""
    for counts in _admissible_rows(n, kappa):
        yield AdmissibleMatrix(np.array(counts, dtype=np.int64), n)


def _admissible_rows(n: int, kappa: int) -> Iterator[list[list[int]]]:
    if n % kappa != 0:
        raise DivisibilityError(f"admissible tables need kappa | n, got n={n}, kappa={kappa}")
    margin = n // kappa

    def fill_row(prefix: list[int], col_left: list[int], rem: int) -> Iterator[list[int]]:
        j = len(prefix)
        if j == kappa - 1:
            if 0 <= rem <= col_left[-1]:
                yield prefix + [rem]
            return
        for v in range(min(rem, col_left[j]) + 1):
            yield from fill_row(prefix + [v], col_left, rem - v)

    def rec(rows: list[list[int]], col_left: list[int]) -> Iterator[list[list[int]]]:
        if len(rows) == kappa - 1:
            yield rows + [col_left]  # last row forced by the column margins
            return
        for row in fill_row([], col_left, margin):
            yield from rec(rows + [row], [c - v for c, v in zip(col_left, row)])

    yield from rec([], [margin] * kappa)


def admissible_array(n: int, kappa: int) -> np.ndarray:
    """All admissible tables stacked as one ``(count, kappa, kappa)`` array."""
    return np.array(list(_admissible_rows(n, kappa)), dtype=np.int64)


def _log_gamma_table(n: int) -> np.ndarray:
    # table[k] = log k!
    return gammaln(np.arange(n + 1, dtype=np.float64) + 1.0)


def log_overlap_law(tables: np.ndarray, n: int, kappa: int) -> np.ndarray:
    """Log probability of each admissible table under the balanced overlap law.

    For a fixed balanced sigma and uniform balanced tau the overlap table
    has probability ``[n!/((n/kappa)!)^kappa]^{-1} prod_a (n/kappa)! /
    prod_b (n r_ab)!``.
    """
    tables = np.asarray(tables, dtype=np.int64)
    squeeze = tables.ndim == 2
    if squeeze:
        tables = tables[None]
    glt = _log_gamma_table(n)
    margin = n // kappa
    log_sector = glt[n] - kappa * glt[margin]
    lp = -log_sector + kappa * glt[margin] - glt[tables].sum(axis=(1, 2))
    return lp[0] if squeeze else lp


def overlap_law_exact(n: int, kappa: int, table) -> float:
    """Probability of one admissible overlap table (validates admissibility)."""
    if not isinstance(table, AdmissibleMatrix):
        table = AdmissibleMatrix(np.asarray(table, dtype=np.int64), n)
    elif table.n != n or table.kappa != kappa:
        raise ValueError("table does not match the requested (n, kappa)")
    return float(math.exp(log_overlap_law(table.counts, n, kappa)))


def second_moment_ratio(n: int, beta: float, kappa: int) -> float:
    """Exact ``E (Z^bal)^2 / (E Z^bal)^2`` for the centered balanced model.

    Computed as the overlap-law average of
    ``exp(beta^2 n ||r - kappa^{-2} 11^T||_F^2)`` over admissible tables.
    """
    tables = admissible_array(n, kappa)
    lp = log_overlap_law(tables, n, kappa)
    gap = ((tables / n - 1.0 / kappa ** 2) ** 2).sum(axis=(1, 2))
    return math.exp(logsumexp(lp + beta ** 2 * n * gap))


def ldp_log_probability(n: int, kappa: int, table) -> tuple[float, float]:
    """(exact, asymptotic) log probability of an admissible table.

    The asymptotic value is ``-n D(r||u) - ((kappa-1)^2/2) log n
    - (1/2) sum_{r_ab != 0} log r_ab`` with ``u`` the uniform table; the
    difference of the two stays O(1) as n grows at fixed rational r.
    """
    if not isinstance(table, AdmissibleMatrix):
        table = AdmissibleMatrix(np.asarray(table, dtype=np.int64), n)
    exact = float(log_overlap_law(table.counts, n, kappa))
    r = table.counts / n
    pos = r > 0
    kl = float((r[pos] * np.log(kappa ** 2 * r[pos])).sum())
    asym = -n * kl - (kappa - 1) ** 2 / 2.0 * math.log(n) - 0.5 * float(np.log(r[pos]).sum())
    return exact, asym


def shell_histogram(n: int, kappa: int) -> np.ndarray:
    """Admissible-table counts per Frobenius shell ``[(l-1)/n, l/n)``, l=1..n."""
    tables = admissible_array(n, kappa)
    gap = ((tables / n - 1.0 / kappa ** 2) ** 2).sum(axis=(1, 2))
    shells = np.floor(gap * n).astype(np.int64)  # shell l-1 holds gap in [(l-1)/n, l/n)
    return np.bincount(shells, minlength=n)[:n]


def shell_count(n: int, kappa: int, l: int) -> int:
    if not 1 <= l <= n:
        raise ValueError(f"shell index l must lie in [1, {n}]")
    return int(shell_histogram(n, kappa)[l - 1])


def _compositions(total: int, parts: int, _cache={}) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    key = (total, parts)
    if key in _cache:
        return _cache[key]
    if parts == 1:
        out = np.array([[total]], dtype=np.int64)
    else:
        blocks = []
        for v in range(total + 1):
            rest = _compositions(total - v, parts - 1)
            blk = np.empty((len(rest), parts), dtype=np.int64)
            blk[:, 0] = v
            blk[:, 1:] = rest
            blocks.append(blk)
        out = np.concatenate(blocks)
    out.setflags(write=False)
    if parts <= 4:
        _cache[key] = out
    return out


def _log_ez_raw(n: int, beta: float, kappa: int, counts: np.ndarray | None) -> float:
    """log E Z for the raw Hamiltonian; E e^{beta H} = e^{beta^2 sum_a m_a^2 / (2n)}."""
    glt = _log_gamma_table(n)
    if counts is None:
        m = _compositions(n, kappa)
        logmult = glt[n] - glt[m].sum(axis=1)
    else:
        m = counts[None, :]
        logmult = np.array([glt[n] - glt[counts].sum()])
    e1 = beta ** 2 * (m.astype(np.float64) ** 2).sum(axis=1) / (2.0 * n)
    return logsumexp(logmult + e1)


def _log_ez2_raw_all(n: int, beta: float, kappa: int) -> float:
    """log E Z^2 for the unconstrained raw model.

    Pairs (sigma, tau) are grouped by their joint color-count table C; the
    number of pairs with table C is the multinomial n!/prod C_ab!, and the
    Gaussian pair moment is exp(beta^2 (sum_a rows_a^2 + sum_b cols_b^2 +
    2 sum C^2) / (2n)).  The table sum is evaluated row-by-row so the cross
    term between rows reduces to pairwise dot products, which keeps the
    kappa=3, n=24 case (10.5M tables) vectorized.
    """
    glt = _log_gamma_table(n)
    al = beta ** 2 / (2.0 * n)
    pieces: list[float] = []
    for row_sums in _compositions(n, kappa):
        rows = [_compositions(int(t), kappa) for t in row_sums]
        fs = []
        for rr in rows:
            rf = rr.astype(np.float64)
            # per-row: -log prod factorials + al*(2+1)*sum r^2 (own squares
            # appear in both the cross-column sum and the 2*||C||^2 term)
            fs.append(-glt[rr].sum(axis=1) + al * 3.0 * (rf ** 2).sum(axis=1))
        base = float(glt[n] + al * (row_sums.astype(np.float64) ** 2).sum())
        if kappa == 2:
            a, b = (rr.astype(np.float64) for rr in rows)
            x = base + fs[0][:, None] + fs[1][None, :] + al * 2.0 * (a @ b.T)
            pieces.append(logsumexp(x))
        elif kappa == 3:
            a, b, c = (rr.astype(np.float64) for rr in rows)
            ab, ac, bc = a @ b.T, a @ c.T, b @ c.T
            n1 = a.shape[0]
            step = max(1, int(4_000_000 // max(1, b.shape[0] * c.shape[0])))
            for lo in range(0, n1, step):
                hi = min(n1, lo + step)
                x = (
                    base
                    + fs[0][lo:hi, None, None]
                    + fs[1][None, :, None]
                    + fs[2][None, None, :]
                    + al * 2.0 * (ab[lo:hi, :, None] + ac[lo:hi, None, :] + bc[None, :, :])
                )
                pieces.append(logsumexp(x))
        else:
            # generic fallback: explicit table enumeration
            tb = _compositions(n, kappa * kappa).reshape(-1, kappa, kappa)
            tf = tb.astype(np.float64)
            expo = al * (
                (tf.sum(axis=2) ** 2).sum(axis=1)
                + (tf.sum(axis=1) ** 2).sum(axis=1)
                + 2.0 * (tf ** 2).sum(axis=(1, 2))
            )
            return logsumexp(glt[n] - glt[tb].sum(axis=(1, 2)) + expo)
    return logsumexp(pieces)


def uncentered_ratio(n: int, beta: float, kappa: int, sector="all", cap: int = DEFAULT_CAP) -> float:
    """Exact ``E Z^2 / (E Z)^2`` for the RAW Hamiltonian.

    Evaluated through the Gaussian pair-moment identity, summed over joint
    color-count tables rather than configuration pairs, which is exact and
    reaches n=24 at kappa=3.  Diverges with n for any beta > 0; the
    constrained sectors only slow the divergence.
    """
    counts = sector_counts(n, kappa, sector)
    if counts is None:
        n_tables = math.comb(n + kappa * kappa - 1, kappa * kappa - 1)
        if n_tables > cap:
            raise EnumerationCapError(
                f"pair-table enumeration has {n_tables} terms, exceeding the cap of {cap}"
            )
        log_ez = _log_ez_raw(n, beta, kappa, None)
        log_ez2 = _log_ez2_raw_all(n, beta, kappa)
        return math.exp(log_ez2 - 2.0 * log_ez)
    if not np.all(counts == counts[0]):
        raise SectorError("uncentered_ratio supports the 'all' and 'balanced' sectors")
    # balanced: E Z = |sector| e^{beta^2 n / (2 kappa)}; the pair sum reduces
    # to the overlap-law average of exp(beta^2 n ||r||_F^2).
    tables = admissible_array(n, kappa)
    lp = log_overlap_law(tables, n, kappa)
    frob = (tables.astype(np.float64) ** 2).sum(axis=(1, 2)) / n
    return math.exp(logsumexp(lp + beta ** 2 * frob))


def uncentered_lower_bound(n: int, beta: float, kappa: int, sector="all") -> float:
    """Closed-form divergence floor for the raw-Hamiltonian moment ratio."""
    if sector == "all":
        return math.exp(beta ** 2 * (n - 1) / kappa ** 2)
    if sector == "balanced":
        return math.exp(beta ** 2 * (n - 1) * ((n - kappa) / ((n - 1) * kappa)) ** 2)
    raise SectorError("bound available for the 'all' and 'balanced' sectors")


def annealed_log_partition_balanced(n: int, beta: float, kappa: int) -> float:
    """Closed-form ``log E Z^bal`` for the centered model.

    The centered energy variance is constant on the balanced sector, so
    ``E Z^bal = exp(beta^2 n (kappa-1) / (2 kappa^2)) |Sigma^bal|``.
    """
    if n % kappa != 0:
        raise DivisibilityError(f"balanced sector needs kappa | n, got n={n}, kappa={kappa}")
    return math.log(count_configs(n, kappa, "balanced")) + beta ** 2 * n * (kappa - 1) / (
        2.0 * kappa ** 2
    )


# ---------------------------------------------------------------------------
# kappa = 2 gauge identities


@dataclass(frozen=True)
class GaugePairResult:
    value: float
    value_flipped: float
    pair_sum: float
    parity: str  # 'odd' or 'even'
    flip_site: int | None


def _spin_products(colors: np.ndarray, sites: Sequence[int]) -> np.ndarray:
    # tau_i = +1 when color 1, -1 when color 2
    tau = 3 - 2 * colors  # 1 -> +1, 2 -> -1
    out = np.ones(colors.shape[0], dtype=np.float64)
    for s in sites:
        out *= tau[:, s]
    return out


def _gibbs_product(g: CouplingMatrix, beta: float, sites: Sequence[int], cap: int) -> float:
    colors = config_array(g.n, 2, "all", cap=cap)
    energies = batch_energies_raw(colors, g)
    prods = _spin_products(colors, sites)
    if math.isinf(beta):
        w = (energies == energies.max()).astype(np.float64)
    else:
        w = np.exp(beta * (energies - energies.max()))
    return float((w * prods).sum() / w.sum())


def gauge_pair_check(
    g: CouplingMatrix, beta: float, sites: Sequence[int], cap: int = DEFAULT_CAP
) -> GaugePairResult:
    """Evaluate a multi-spin correlation for g and for its gauge flip.

    ``sites`` is a multiset of 0-based site indices.  When some site has odd
    multiplicity, flipping the signs of every coupling incident to it maps
    the Gibbs measure onto the site-flipped one, so the two correlations are
    exact negatives and their sum must vanish -- a deterministic test that
    needs no disorder averaging.  Works for beta in [0, inf]; beta = inf uses
    the uniform measure on energy maximizers.

    With no odd-multiplicity site the result carries parity='even' (the
    correlation is then flip-invariant, e.g. ``<tau_i^2> = 1``).
    """
    sites = [int(s) for s in sites]
    if not sites:
        raise ValueError("sites multiset must be non-empty")
    if any(not 0 <= s < g.n for s in sites):
        raise IndexError(f"site indices must lie in [0, {g.n})")
    degrees: dict[int, int] = {}
    for s in sites:
        degrees[s] = degrees.get(s, 0) + 1
    odd = sorted(s for s, d in degrees.items() if d % 2 == 1)
    value = _gibbs_product(g, beta, sites, cap)
    if not odd:
        return GaugePairResult(value, value, 2.0 * value, "even", None)
    flip = odd[0]
    value_flipped = _gibbs_product(g.flipped_at(flip), beta, sites, cap)
    return GaugePairResult(value, value_flipped, value + value_flipped, "odd", flip)


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float
    bound: float
    m: int
    n: int
    beta: float
    replicas: int

    @property
    def satisfied(self) -> bool:
        return self.value <= self.bound + 3.0 * self.stderr


def _kappa2_gibbs_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    if math.isinf(beta):
        w = (energies == energies.max()).astype(np.float64)
    else:
        w = np.exp(beta * (energies - energies.max()))
    return w / w.sum()


def _kappa2_replica_average(
    n: int,
    beta: float,
    replicas: int,
    seed: int,
    stat: Callable[[np.ndarray, np.ndarray], float],
    cap: int,
) -> tuple[float, float]:
    """Disorder average of a Gibbs statistic with exact inner enumeration.

    ``stat(weights, x)`` sees the normalized Gibbs weights and the centered
    color-1 fraction ``x = d_1 - 1/2`` of every configuration.
    """
    colors = config_array(n, 2, "all", cap=cap)
    x = (colors == 1).sum(axis=1) / n - 0.5
    vals = np.empty(replicas)
    for r in range(replicas):
        g = CouplingMatrix.from_seed(n, seed, r)
        w = _kappa2_gibbs_weights(batch_energies_raw(colors, g), beta)
        vals[r] = stat(w, x)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(replicas))


def magnetization_moment_exact(
    n: int,
    beta: float,
    m: int,
    replicas: int = 200,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> MomentEstimate:
    """Disorder-averaged ``<(d_1 - 1/2)^m>`` for the two-color model.

    Odd moments vanish identically: the global color swap leaves every
    energy bit-for-bit unchanged while negating ``d_1 - 1/2``, so each
    disorder realization's Gibbs average pairs to zero.  Even moments are
    estimated over disorder replicas and compared against the bound
    ``m! / (2^m (m/2)!) n^{-m/2}``.
    """
    if m < 1:
        raise ValueError("moment order m must be >= 1")
    if m % 2 == 1:
        return MomentEstimate(0.0, 0.0, 0.0, m, n, beta, 0)
    if replicas < 2:
        raise ValueError("even-moment estimation needs at least 2 replicas")
    bound = math.factorial(m) / (2 ** m * math.factorial(m // 2)) / n ** (m // 2)
    mean, se = _kappa2_replica_average(
        n, beta, replicas, seed, lambda w, x: float((w * x ** m).sum()), cap
    )
    return MomentEstimate(mean, se, bound, m, n, beta, replicas)


def magnetization_mgf_exact(
    n: int,
    beta: float,
    lam: float,
    replicas: int = 200,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> MomentEstimate:
    """Disorder-averaged ``<exp(lam (d_1 - 1/2))>`` against ``e^{lam^2/(4n)}``."""
    mean, se = _kappa2_replica_average(
        n, beta, replicas, seed, lambda w, x: float((w * np.exp(lam * x)).sum()), cap
    )
    return MomentEstimate(mean, se, math.exp(lam ** 2 / (4.0 * n)), 0, n, beta, replicas)


def tail_probability_exact(
    n: int,
    beta: float,
    epsilon: float,
    replicas: int = 200,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> MomentEstimate:
    """Disorder-averaged Gibbs mass of ``|d_1 - 1/2| >= eps`` vs ``2 e^{-eps^2 n}``."""
    mean, se = _kappa2_replica_average(
        n, beta, replicas, seed, lambda w, x: float((w * (np.abs(x) >= epsilon)).sum()), cap
    )
    return MomentEstimate(mean, se, 2.0 * math.exp(-epsilon ** 2 * n), 0, n, beta, replicas)
