"""Samplers for system sizes beyond exact enumeration.

Single-site Metropolis targets the unconstrained Gibbs measure; pair-swap
dynamics target the balanced sector while conserving the magnetization
exactly; parallel tempering couples chains across an inverse-temperature
ladder.  Estimators (magnetization tails, thermodynamic integration) ride on
top of these kernels.

Zero temperature is never sampled here: beta = inf claims route to the
exact ground-state measure in :mod:`pottsglass.exact`, since no
equilibration guarantee exists at beta = inf.

Reproducibility: chain ``c`` of root seed ``s`` draws from the Philox stream
``CHAIN_NAMESPACE | c`` of ``s``; the per-sweep randomness is drawn in fixed-
size blocks so trajectories are bit-for-bit reproducible and independent of
the worker count used to farm out disorder replicas.  Each sweep's cached
energy is audited against a full recomputation every ``audit_interval``
sweeps to guard against incremental drift.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CHAIN_NAMESPACE,
    TEMPER_NAMESPACE,
    CouplingMatrix,
    SectorError,
    SpinConfig,
    batch_energies_raw,
    centering_shift,
    count_configs,
    philox_generator,
    sector_counts,
)

__all__ = [
    "ChainState",
    "TemperingLadder",
    "TailEstimate",
    "TiResult",
    "metropolis_sweep",
    "swap_sweep",
    "sweep",
    "tempering_step",
    "run_sweeps",
    "estimate_tail",
    "free_energy_ti",
    "equilibration_flagged",
    "save_checkpoint",
    "load_chain",
    "load_ladder",
]

CHECKPOINT_VERSION = 1


@dataclass
class ChainState:
    """One Markov chain: configuration, cached raw energy, its own RNG.

    The cached energy always refers to the raw Hamiltonian (the centered one
    differs by a configuration-independent shift, so the dynamics agree).
    For the balanced sector the magnetization is validated at construction
    and preserved exactly by the swap kernel.
    """

    colors: np.ndarray
    kappa: int
    beta: float
    sector: str
    energy: float
    rng: np.random.Generator
    sweeps: int = 0
    audit_interval: int = 100
    seed: int | None = None
    chain_id: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ValueError("chain beta must be finite and nonnegative")
        if self.sector not in ("all", "balanced"):
            raise SectorError(f"unsupported chain sector {self.sector!r}")
        self.colors = np.ascontiguousarray(self.colors, dtype=np.int64)
        if self.sector == "balanced":
            counts = np.bincount(self.colors - 1, minlength=self.kappa)
            if not np.all(counts == self.colors.size // self.kappa):
                raise SectorError("balanced chain must start from a balanced configuration")

    @property
    def n(self) -> int:
        return int(self.colors.size)

    @property
    def spin_config(self) -> SpinConfig:
        return SpinConfig(self.colors.copy(), self.kappa)

    @classmethod
    def start(
        cls,
        g: CouplingMatrix,
        kappa: int,
        beta: float,
        sector: str = "all",
        seed: int = 0,
        chain_id: int = 0,
        audit_interval: int = 100,
    ) -> "ChainState":
        rng = philox_generator(seed, CHAIN_NAMESPACE | chain_id)
        n = g.n
        if sector == "balanced":
            counts = sector_counts(n, kappa, "balanced")
            colors = np.repeat(np.arange(1, kappa + 1), counts)
            rng.shuffle(colors)
        else:
            colors = rng.integers(1, kappa + 1, size=n)
        energy = float(batch_energies_raw(colors[None, :], g)[0])
        return cls(
            colors=colors,
            kappa=kappa,
            beta=beta,
            sector=sector,
            energy=energy,
            rng=rng,
            seed=seed,
            chain_id=chain_id,
            audit_interval=audit_interval,
        )

    def energy_of_kind(self, g: CouplingMatrix, kind: str) -> float:
        if kind == "raw":
            return self.energy
        if kind == "centered":
            return self.energy - centering_shift(g, self.kappa)
        raise ValueError(f"unknown hamiltonian kind {kind!r}")

    def _audit(self, g: CouplingMatrix) -> None:
        recomputed = float(batch_energies_raw(self.colors[None, :], g)[0])
        scale = max(1.0, abs(recomputed))
        if abs(self.energy - recomputed) > 1e-6 * scale:
            raise RuntimeError(
                f"cached energy drifted: cached={self.energy!r} recomputed={recomputed!r}"
            )
        self.energy = recomputed  # resync to stop error accumulation


def _site_delta(colors: np.ndarray, srow: np.ndarray, site: int, old: int, new: int, kappa: int, sqn: float) -> float:
    sums = np.bincount(colors - 1, weights=srow, minlength=kappa)
    return float((sums[new - 1] - sums[old - 1] + srow[site]) / sqn)


def metropolis_sweep(state: ChainState, g: CouplingMatrix) -> ChainState:
    """n single-site recoloring proposals with acceptance min(1, e^{beta dH}).

    Proposals draw the new color uniformly over all kappa colors, so a
    proposal equal to the current color is always accepted as a no-op.
    """
    if state.sector != "all":
        raise SectorError("metropolis_sweep serves the unconstrained sector")
    n, kappa, beta = state.n, state.kappa, state.beta
    s = g.g + g.g.T
    sqn = math.sqrt(n)
    sites = state.rng.integers(0, n, size=n)
    props = state.rng.integers(1, kappa + 1, size=n)
    us = state.rng.random(size=n)
    colors = state.colors
    energy = state.energy
    for k in range(n):
        t = int(sites[k])
        new = int(props[k])
        old = int(colors[t])
        if new == old:
            continue  # dH = 0: always accepted, state unchanged
        d = _site_delta(colors, s[t], t, old, new, kappa, sqn)
        if d >= 0.0 or us[k] < math.exp(beta * d):
            colors[t] = new
            energy += d
    state.energy = energy
    state.sweeps += 1
    if state.sweeps % state.audit_interval == 0:
        state._audit(g)
    return state


def swap_sweep(state: ChainState, g: CouplingMatrix) -> ChainState:
    """n proposed transpositions of two differing-color sites (balanced sector).

    The first site is uniform over all sites, the second uniform over the
    sites of any other color; in the balanced sector that count is constant,
    so the proposal is uniform over ordered differing-color pairs and
    symmetric.  Color counts are conserved exactly.
    """
    if state.sector != "balanced":
        raise SectorError("swap_sweep serves the balanced sector")
    n, kappa, beta = state.n, state.kappa, state.beta
    per = n // kappa
    n_other = n - per
    if n_other == 0:
        raise SectorError("no differing-color pair exists")
    s = g.g + g.g.T
    sqn = math.sqrt(n)
    sites = state.rng.integers(0, n, size=n)
    ranks = state.rng.integers(0, n_other, size=n)
    us = state.rng.random(size=n)
    colors = state.colors
    energy = state.energy
    for k in range(n):
        i = int(sites[k])
        a = int(colors[i])
        others = np.flatnonzero(colors != a)
        j = int(others[ranks[k]])
        b = int(colors[j])
        d1 = _site_delta(colors, s[i], i, a, b, kappa, sqn)
        colors[i] = b
        d2 = _site_delta(colors, s[j], j, b, a, kappa, sqn)
        colors[i] = a
        d = d1 + d2
        if d >= 0.0 or us[k] < math.exp(beta * d):
            colors[i] = b
            colors[j] = a
            energy += d
    state.energy = energy
    state.sweeps += 1
    if state.sweeps % state.audit_interval == 0:
        state._audit(g)
    return state


def sweep(state: ChainState, g: CouplingMatrix) -> ChainState:
    return swap_sweep(state, g) if state.sector == "balanced" else metropolis_sweep(state, g)


def run_sweeps(state: ChainState, g: CouplingMatrix, count: int) -> ChainState:
    for _ in range(count):
        sweep(state, g)
    return state


@dataclass
class TemperingLadder:
    """Parallel-tempering stack: one chain per rung, shared disorder."""

    rungs: list[ChainState]
    rng: np.random.Generator
    swap_attempts: np.ndarray = field(default=None)  # type: ignore[assignment]
    swap_accepts: np.ndarray = field(default=None)  # type: ignore[assignment]
    seed: int | None = None
    ladder_id: int | None = None

    def __post_init__(self):
        if not self.rungs:
            raise ValueError("ladder needs at least one rung")
        betas = [r.beta for r in self.rungs]
        if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError("rung betas must be nondecreasing")
        if self.swap_attempts is None:
            self.swap_attempts = np.zeros(max(len(self.rungs) - 1, 0), dtype=np.int64)
        if self.swap_accepts is None:
            self.swap_accepts = np.zeros(max(len(self.rungs) - 1, 0), dtype=np.int64)

    @property
    def betas(self) -> tuple[float, ...]:
        return tuple(r.beta for r in self.rungs)

    @classmethod
    def start(
        cls,
        g: CouplingMatrix,
        kappa: int,
        betas,
        sector: str = "all",
        seed: int = 0,
        ladder_id: int = 0,
    ) -> "TemperingLadder":
        rungs = [
            ChainState.start(g, kappa, float(b), sector, seed, chain_id=(ladder_id << 8) | k)
            for k, b in enumerate(betas)
        ]
        rng = philox_generator(seed, TEMPER_NAMESPACE | ladder_id)
        return cls(rungs=rungs, rng=rng, seed=seed, ladder_id=ladder_id)


def tempering_step(ladder: TemperingLadder, g: CouplingMatrix) -> TemperingLadder:
    """One sweep per rung, then adjacent swap proposals from the bottom up.

    A swap of rungs (i, j) is accepted with probability
    min(1, exp((beta_i - beta_j)(H_j - H_i))); configurations and cached
    energies travel, the rung temperatures stay put.
    """
    if len(ladder.rungs) < 2:
        raise ValueError("tempering needs at least 2 rungs")
    for rung in ladder.rungs:
        sweep(rung, g)
    us = ladder.rng.random(size=len(ladder.rungs) - 1)
    for k in range(len(ladder.rungs) - 1):
        lo, hi = ladder.rungs[k], ladder.rungs[k + 1]
        ladder.swap_attempts[k] += 1
        log_acc = (lo.beta - hi.beta) * (hi.energy - lo.energy)
        if log_acc >= 0.0 or us[k] < math.exp(log_acc):
            lo.colors, hi.colors = hi.colors, lo.colors
            lo.energy, hi.energy = hi.energy, lo.energy
            ladder.swap_accepts[k] += 1
    return ladder


def equilibration_flagged(series: np.ndarray) -> bool:
    """Geweke-style flag: first-half and second-half means differ by > 3
    pooled standard errors."""
    series = np.asarray(series, dtype=np.float64)
    if series.size < 8:
        return False
    half = series.size // 2
    a, b = series[:half], series[half:]
    se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    if se == 0.0:
        return False
    return abs(a.mean() - b.mean()) / se > 3.0


# ---------------------------------------------------------------------------
# Estimators


@dataclass(frozen=True)
class TailEstimate:
    epsilon: float
    estimate: float
    stderr: float
    bound: float | None
    replicas: int
    flagged: bool


def _max_deviation(colors: np.ndarray, kappa: int) -> float:
    counts = np.bincount(colors - 1, minlength=kappa)
    return float(np.abs(counts / colors.size - 1.0 / kappa).max())


def _tail_exact_replica(g: CouplingMatrix, kappa: int, beta: float, epsilons, cap: int) -> list[float]:
    from .core import config_array

    colors = config_array(g.n, kappa, "all", cap=cap)
    energies = batch_energies_raw(colors, g)
    counts = np.stack([(colors == a).sum(axis=1) for a in range(1, kappa + 1)], axis=1)
    dev = np.abs(counts / g.n - 1.0 / kappa).max(axis=1)
    if math.isinf(beta):
        w = (energies == energies.max()).astype(np.float64)
    else:
        w = np.exp(beta * (energies - energies.max()))
    w = w / w.sum()
    return [float((w * (dev >= e)).sum()) for e in epsilons]


def estimate_tail(spec, epsilon) -> list[TailEstimate]:
    """Disorder-and-Gibbs double average of ``1{max_a |d_a - 1/kappa| >= eps}``.

    Accepts one epsilon or a sequence; all epsilons share the same chains.
    For the balanced sector the deviation is identically zero.  beta = inf
    is served by the exact uniform-on-maximizers measure; finite beta runs
    Metropolis chains, or a tempering ladder when ``spec.ladder`` is set
    (recommended for large beta).  For kappa = 2 the closed-form ceiling
    ``2 e^{-eps^2 n}`` is attached to each estimate.
    """
    epsilons = [float(epsilon)] if np.isscalar(epsilon) else [float(e) for e in epsilon]
    n = spec.n if isinstance(spec.n, int) else spec.n[0]
    beta = spec.beta if isinstance(spec.beta, float) else spec.beta[0]
    kappa = spec.kappa

    def bound(e: float) -> float | None:
        return 2.0 * math.exp(-e ** 2 * n) if kappa == 2 else None

    if spec.sector == "balanced":
        return [TailEstimate(e, 0.0, 0.0, bound(e), 0, False) for e in epsilons]
    if spec.ladder and not math.isinf(beta) and spec.ladder[-1] != beta:
        raise ValueError(
            f"the ladder must end at the target beta: ladder top {spec.ladder[-1]}, beta {beta}"
        )

    per_replica = np.empty((spec.replicas, len(epsilons)))
    flagged = False
    for r in range(spec.replicas):
        g = CouplingMatrix.from_seed(n, spec.seed, r)
        if math.isinf(beta):
            per_replica[r] = _tail_exact_replica(g, kappa, beta, epsilons, spec.cap)
            continue
        if spec.ladder:
            ladder = TemperingLadder.start(g, kappa, spec.ladder, "all", spec.seed, ladder_id=r)
            target = ladder.rungs[-1]
            for _ in range(spec.burn_in):
                tempering_step(ladder, g)
            devs = []
            for t in range(spec.sweeps):
                tempering_step(ladder, g)
                if t % spec.thinning == 0:
                    devs.append(_max_deviation(target.colors, kappa))
        else:
            chain = ChainState.start(g, kappa, beta, "all", spec.seed, chain_id=r)
            run_sweeps(chain, g, spec.burn_in)
            devs = []
            for t in range(spec.sweeps):
                metropolis_sweep(chain, g)
                if t % spec.thinning == 0:
                    devs.append(_max_deviation(chain.colors, kappa))
        devs = np.asarray(devs)
        flagged = flagged or equilibration_flagged(devs)
        per_replica[r] = [(devs >= e).mean() for e in epsilons]

    out = []
    for idx, e in enumerate(epsilons):
        col = per_replica[:, idx]
        se = float(col.std(ddof=1) / math.sqrt(len(col))) if len(col) > 1 else 0.0
        out.append(TailEstimate(e, float(col.mean()), se, bound(e), spec.replicas, flagged))
    return out


@dataclass(frozen=True)
class TiResult:
    value: float
    stderr: float
    quad_error: float
    grid: np.ndarray
    energy_means: np.ndarray
    energy_stderrs: np.ndarray
    log_sector_size: float
    flagged: bool


def _batch_stats(series: np.ndarray, n_batches: int = 20) -> tuple[float, float]:
    series = np.asarray(series, dtype=np.float64)
    mean = float(series.mean())
    k = min(n_batches, max(2, series.size // 4))
    usable = (series.size // k) * k
    batches = series[:usable].reshape(k, -1).mean(axis=1)
    return mean, float(batches.std(ddof=1) / math.sqrt(k))


def free_energy_ti(
    g: CouplingMatrix,
    kappa: int,
    beta_max: float,
    n_grid: int,
    sector: str = "all",
    kind: str = "centered",
    seed: int = 0,
    sweeps: int = 2000,
    burn_in: int = 500,
) -> TiResult:
    """Per-site free energy at beta_max by thermodynamic integration.

    ``d(log Z)/d(beta) = <H>``, so the trapezoid rule over Monte Carlo
    estimates of the mean energy, anchored at ``log |sector|`` for beta = 0,
    reconstructs ``n^{-1} log Z(beta_max)``.  The reported uncertainty is the
    propagated sampling stderr; the quadrature error is estimated from
    second differences of the integrand.
    """
    if n_grid < 8:
        raise ValueError("need n_grid >= 8 for a usable trapezoid rule")
    n = g.n
    log_size = math.log(count_configs(n, kappa, sector))
    grid = np.linspace(0.0, beta_max, n_grid)
    means = np.empty(n_grid)
    errs = np.empty(n_grid)
    flagged = False
    chain = ChainState.start(g, kappa, 0.0, sector, seed, chain_id=0)
    for idx, b in enumerate(grid):
        chain.beta = float(b)
        run_sweeps(chain, g, burn_in)
        series = np.empty(sweeps)
        for t in range(sweeps):
            sweep(chain, g)
            series[t] = chain.energy_of_kind(g, kind)
        flagged = flagged or equilibration_flagged(series)
        means[idx], errs[idx] = _batch_stats(series)
    if beta_max == 0.0:
        return TiResult(log_size / n, 0.0, 0.0, grid, means, errs, log_size, flagged)
    h = grid[1] - grid[0]
    integral = float(np.trapezoid(means, grid))
    weights = np.full(n_grid, h)
    weights[0] = weights[-1] = h / 2.0
    se = math.sqrt(float(((weights * errs) ** 2).sum())) / n
    second = np.abs(np.diff(means, 2))
    quad = float(second.sum()) * h / 12.0 / n
    return TiResult(
        value=(log_size + integral) / n,
        stderr=se,
        quad_error=quad,
        grid=grid,
        energy_means=means,
        energy_stderrs=errs,
        log_sector_size=log_size,
        flagged=flagged,
    )


# ---------------------------------------------------------------------------
# Checkpoints (versioned JSON; layout documented field by field)


def _rng_state(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return json.loads(json.dumps(state, default=lambda o: o.tolist()))


def _restore_rng(payload: dict) -> np.random.Generator:
    rng = np.random.Generator(np.random.Philox())
    state = dict(payload)
    inner = dict(state["state"])
    inner["counter"] = np.array(inner["counter"], dtype=np.uint64)
    inner["key"] = np.array(inner["key"], dtype=np.uint64)
    state["state"] = inner
    if "buffer" in state:
        state["buffer"] = np.array(state["buffer"], dtype=np.uint64)
    rng.bit_generator.state = state
    return rng


def _chain_payload(state: ChainState) -> dict:
    return {
        "kind": "chain",
        "version": CHECKPOINT_VERSION,
        "seed": state.seed,
        "chain_id": state.chain_id,
        "kappa": state.kappa,
        "beta": state.beta,
        "sector": state.sector,
        "sweeps": state.sweeps,
        "energy": state.energy,
        "colors": state.colors.tolist(),
        "audit_interval": state.audit_interval,
        "rng": _rng_state(state.rng),
    }


def save_checkpoint(obj, path: str) -> None:
    """Atomically write a chain or ladder checkpoint as versioned JSON."""
    if isinstance(obj, ChainState):
        payload = _chain_payload(obj)
    elif isinstance(obj, TemperingLadder):
        payload = {
            "kind": "ladder",
            "version": CHECKPOINT_VERSION,
            "seed": obj.seed,
            "ladder_id": obj.ladder_id,
            "swap_attempts": obj.swap_attempts.tolist(),
            "swap_accepts": obj.swap_accepts.tolist(),
            "rng": _rng_state(obj.rng),
            "rungs": [_chain_payload(r) for r in obj.rungs],
        }
    else:
        raise TypeError(f"cannot checkpoint {type(obj).__name__}")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _chain_from_payload(payload: dict) -> ChainState:
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    return ChainState(
        colors=np.array(payload["colors"], dtype=np.int64),
        kappa=payload["kappa"],
        beta=payload["beta"],
        sector=payload["sector"],
        energy=payload["energy"],
        rng=_restore_rng(payload["rng"]),
        sweeps=payload["sweeps"],
        audit_interval=payload["audit_interval"],
        seed=payload["seed"],
        chain_id=payload["chain_id"],
    )


def load_chain(path: str) -> ChainState:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("kind") != "chain":
        raise ValueError("checkpoint does not hold a chain")
    return _chain_from_payload(payload)


def load_ladder(path: str) -> TemperingLadder:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("kind") != "ladder":
        raise ValueError("checkpoint does not hold a ladder")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    return TemperingLadder(
        rungs=[_chain_from_payload(p) for p in payload["rungs"]],
        rng=_restore_rng(payload["rng"]),
        swap_attempts=np.array(payload["swap_attempts"], dtype=np.int64),
        swap_accepts=np.array(payload["swap_accepts"], dtype=np.int64),
        seed=payload["seed"],
        ladder_id=payload["ladder_id"],
    )
