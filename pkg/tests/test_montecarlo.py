import math

import numpy as np
import pytest
from scipy.stats import chisquare

from pottsglass import core, exact, montecarlo as mc
from pottsglass.experiment import ExperimentSpec


def exact_gibbs_weights(g, kappa, beta, sector):
    colors = core.config_array(g.n, kappa, sector)
    energies = core.batch_energies_raw(colors, g)
    w = np.exp(beta * (energies - energies.max()))
    return colors, w / w.sum()


def single_proposal_kernel(g, kappa, beta, sector):
    """Transition matrix of one proposal, mirroring the sweep acceptance rule."""
    colors, _ = exact_gibbs_weights(g, kappa, beta, sector)
    energies = core.batch_energies_raw(colors, g)
    index = {tuple(row): i for i, row in enumerate(colors)}
    m = len(colors)
    n = g.n
    P = np.zeros((m, m))
    if sector == "all":
        for i, row in enumerate(colors):
            for t in range(n):
                for c in range(1, kappa + 1):
                    row2 = row.copy()
                    row2[t] = c
                    j = index[tuple(row2)]
                    acc = 1.0 if j == i else min(1.0, math.exp(beta * (energies[j] - energies[i])))
                    P[i, j] += acc / (n * kappa)
                    P[i, i] += (1 - acc) / (n * kappa)
    else:
        per = n // kappa
        n_other = n - per
        for i, row in enumerate(colors):
            for t in range(n):
                for s in range(n):
                    if row[s] == row[t]:
                        continue
                    row2 = row.copy()
                    row2[t], row2[s] = row[s], row[t]
                    j = index[tuple(row2)]
                    acc = min(1.0, math.exp(beta * (energies[j] - energies[i])))
                    P[i, j] += acc / (n * n_other)
                    P[i, i] += (1 - acc) / (n * n_other)
    return colors, energies, P


class TestMetropolis:
    def test_infinite_temperature_site_marginals_uniform(self):
        g = core.CouplingMatrix.from_seed(5, 1)
        chain = mc.ChainState.start(g, 3, 0.0, "all", seed=7)
        counts = np.zeros((5, 3), dtype=np.int64)
        for _ in range(10000):
            mc.metropolis_sweep(chain, g)
            counts[np.arange(5), chain.colors - 1] += 1
        for site in range(5):
            assert chisquare(counts[site]).pvalue > 0.001

    def test_detailed_balance_matrix(self):
        for kappa, n, beta in ((2, 4, 1.2), (3, 3, 0.8)):
            g = core.CouplingMatrix.from_seed(n, 3)
            _, energies, P = single_proposal_kernel(g, kappa, beta, "all")
            pi = np.exp(beta * (energies - energies.max()))
            pi /= pi.sum()
            flow = pi[:, None] * P
            assert np.abs(flow - flow.T).max() < 1e-10
            assert np.abs(P.sum(axis=1) - 1).max() < 1e-12

    def test_sector_guard(self):
        g = core.CouplingMatrix.from_seed(4, 1)
        chain = mc.ChainState.start(g, 2, 1.0, "balanced", seed=0)
        with pytest.raises(core.SectorError):
            mc.metropolis_sweep(chain, g)

    def test_matches_exact_state_distribution(self):
        g = core.CouplingMatrix.from_seed(4, 12)
        kappa, beta = 2, 0.9
        colors, probs = exact_gibbs_weights(g, kappa, beta, "all")
        index = {tuple(row): i for i, row in enumerate(colors)}
        chain = mc.ChainState.start(g, kappa, beta, "all", seed=4)
        mc.run_sweeps(chain, g, 500)
        n_batches, per_batch = 50, 800
        batch_fracs = np.zeros((n_batches, len(colors)))
        for b in range(n_batches):
            for _ in range(per_batch):
                mc.metropolis_sweep(chain, g)
                batch_fracs[b, index[tuple(chain.colors)]] += 1
        batch_fracs /= per_batch
        emp = batch_fracs.mean(axis=0)
        se = batch_fracs.std(axis=0, ddof=1) / math.sqrt(n_batches)
        # batch means absorb the sweep-to-sweep autocorrelation
        assert np.all(np.abs(emp - probs) <= 3 * se + 1e-4)


class TestSwap:
    def test_conserves_magnetization(self):
        g = core.CouplingMatrix.from_seed(6, 5)
        chain = mc.ChainState.start(g, 3, 1.5, "balanced", seed=2)
        target = np.bincount(chain.colors - 1, minlength=3).copy()
        for _ in range(2000):
            mc.swap_sweep(chain, g)
            assert np.array_equal(np.bincount(chain.colors - 1, minlength=3), target)

    def test_conserves_magnetization_over_a_million_moves(self):
        g = core.CouplingMatrix.from_seed(20, 55)
        chain = mc.ChainState.start(g, 2, 0.8, "balanced", seed=56)
        target = np.bincount(chain.colors - 1, minlength=2).copy()
        for block in range(100):
            for _ in range(500):  # 100 * 500 sweeps * 20 proposals = 1e6 moves
                mc.swap_sweep(chain, g)
            assert np.array_equal(np.bincount(chain.colors - 1, minlength=2), target)

    def test_uniform_over_balanced_at_infinite_temperature(self):
        g = core.CouplingMatrix.from_seed(4, 9)
        chain = mc.ChainState.start(g, 2, 0.0, "balanced", seed=3)
        colors = core.config_array(4, 2, "balanced")
        index = {tuple(row): i for i, row in enumerate(colors)}
        visits = np.zeros(6)
        for _ in range(30000):
            mc.swap_sweep(chain, g)
            visits[index[tuple(chain.colors)]] += 1
        assert chisquare(visits).pvalue > 0.001

    def test_detailed_balance_matrix(self):
        g = core.CouplingMatrix.from_seed(4, 6)
        _, energies, P = single_proposal_kernel(g, 2, 1.1, "balanced")
        pi = np.exp(1.1 * (energies - energies.max()))
        pi /= pi.sum()
        flow = pi[:, None] * P
        assert np.abs(flow - flow.T).max() < 1e-10

    def test_sector_guard(self):
        g = core.CouplingMatrix.from_seed(4, 1)
        chain = mc.ChainState.start(g, 2, 1.0, "all", seed=0)
        with pytest.raises(core.SectorError):
            mc.swap_sweep(chain, g)

    def test_unbalanced_start_rejected(self):
        g = core.CouplingMatrix.from_seed(4, 1)
        with pytest.raises(core.SectorError):
            mc.ChainState(
                colors=np.array([1, 1, 1, 2]), kappa=2, beta=1.0, sector="balanced",
                energy=0.0, rng=core.philox_generator(0, 0),
            )


class TestTempering:
    def test_equal_betas_always_swap(self):
        g = core.CouplingMatrix.from_seed(4, 2)
        ladder = mc.TemperingLadder.start(g, 2, [0.7, 0.7], "all", seed=5)
        for _ in range(50):
            mc.tempering_step(ladder, g)
        assert ladder.swap_accepts[0] == ladder.swap_attempts[0] == 50

    def test_rung_marginals_match_exact(self):
        g = core.CouplingMatrix.from_seed(4, 15)
        betas = [0.4, 1.0]
        ladder = mc.TemperingLadder.start(g, 2, betas, "all", seed=6)
        for _ in range(500):
            mc.tempering_step(ladder, g)
        colors, probs_hot = exact_gibbs_weights(g, 2, betas[0], "all")
        _, probs_cold = exact_gibbs_weights(g, 2, betas[1], "all")
        index = {tuple(row): i for i, row in enumerate(colors)}
        visits = np.zeros((2, len(colors)))
        sweeps = 30000
        for _ in range(sweeps):
            mc.tempering_step(ladder, g)
            for r in range(2):
                visits[r, index[tuple(ladder.rungs[r].colors)]] += 1
        assert chisquare(visits[0], probs_hot * sweeps).pvalue > 0.001
        assert chisquare(visits[1], probs_cold * sweeps).pvalue > 0.001

    def test_needs_two_rungs(self):
        g = core.CouplingMatrix.from_seed(4, 2)
        ladder = mc.TemperingLadder.start(g, 2, [0.5], "all", seed=1)
        with pytest.raises(ValueError):
            mc.tempering_step(ladder, g)


class TestEstimators:
    def test_balanced_tail_is_zero(self):
        spec = ExperimentSpec(command="tail-bound", kappa=2, n=(4,), beta=(1.0,), sector="balanced")
        (est,) = mc.estimate_tail(spec, 0.25)
        assert est.estimate == 0.0 and est.stderr == 0.0

    def test_zero_temperature_routes_to_ground_state(self):
        spec = ExperimentSpec(
            command="tail-bound", kappa=2, n=(6,), beta=(math.inf,), replicas=8, seed=9
        )
        (est,) = mc.estimate_tail(spec, 0.25)
        # oracle: direct uniform-over-maximizers average per replica
        vals = []
        for r in range(8):
            g = core.CouplingMatrix.from_seed(6, 9, r)
            gs = exact.ground_state(g, 2, "all", "raw")
            dev = np.abs(
                np.stack([(gs.maximizers == a).sum(axis=1) for a in (1, 2)], axis=1) / 6 - 0.5
            ).max(axis=1)
            vals.append((dev >= 0.25).mean())
        assert est.estimate == pytest.approx(np.mean(vals), abs=1e-14)

    def test_infinite_temperature_matches_counting(self):
        # at beta=0 only the two monochrome configs reach deviation 0.5
        spec = ExperimentSpec(
            command="tail-bound", kappa=2, n=(8,), beta=(0.0,), replicas=24,
            sweeps=800, burn_in=100, thinning=2, seed=14,
        )
        (est,) = mc.estimate_tail(spec, 0.5)
        assert abs(est.estimate - 2 / 256) <= 3 * est.stderr + 1e-3

    def test_ladder_must_end_at_target_beta(self):
        spec = ExperimentSpec(
            command="tail-bound", kappa=2, n=(4,), beta=(2.0,), replicas=2,
            sweeps=10, burn_in=2, thinning=1, seed=1, ladder=(0.5, 1.0),
        )
        with pytest.raises(ValueError, match="ladder"):
            mc.estimate_tail(spec, 0.25)

    def test_reproducible_bit_for_bit(self):
        spec = ExperimentSpec(
            command="tail-bound", kappa=2, n=(6,), beta=(1.0,), replicas=4,
            sweeps=200, burn_in=50, thinning=2, seed=13,
        )
        a = mc.estimate_tail(spec, (0.25, 0.5))
        b = mc.estimate_tail(spec, (0.25, 0.5))
        assert [(e.estimate, e.stderr) for e in a] == [(e.estimate, e.stderr) for e in b]

    def test_ladder_path(self):
        spec = ExperimentSpec(
            command="tail-bound", kappa=2, n=(6,), beta=(2.0,), replicas=3,
            sweeps=100, burn_in=30, thinning=2, seed=13, ladder=(0.5, 1.0, 2.0),
        )
        (est,) = mc.estimate_tail(spec, 0.5)
        assert 0.0 <= est.estimate <= 1.0 and est.bound == pytest.approx(2 * math.exp(-0.25 * 6))


class TestFreeEnergyTi:
    def test_beta_zero_is_entropy(self):
        g = core.CouplingMatrix.from_seed(6, 3)
        res = mc.free_energy_ti(g, 3, 0.0, 8, "balanced", "centered", seed=1, sweeps=64, burn_in=8)
        assert res.value == pytest.approx(math.log(90) / 6, abs=1e-14)
        assert res.stderr == 0.0

    def test_matches_exact_at_small_n(self):
        g = core.CouplingMatrix.from_seed(6, 21)
        res = mc.free_energy_ti(g, 3, 1.0, 9, "balanced", "centered", seed=2, sweeps=1500, burn_in=300)
        target = exact.log_partition(g, 1.0, 3, "balanced", "centered").free_energy
        assert abs(res.value - target) <= 3 * res.stderr + res.quad_error + 1e-3

    def test_grid_too_small(self):
        g = core.CouplingMatrix.from_seed(4, 1)
        with pytest.raises(ValueError):
            mc.free_energy_ti(g, 2, 1.0, 4, "all", seed=1)


class TestEquilibrationFlag:
    def test_stationary_series_not_flagged(self, rng):
        assert not mc.equilibration_flagged(rng.standard_normal(400))

    def test_drifting_series_flagged(self, rng):
        series = np.concatenate([rng.standard_normal(200), rng.standard_normal(200) + 5.0])
        assert mc.equilibration_flagged(series)


class TestChainInternals:
    def test_energy_audit_catches_corruption(self):
        g = core.CouplingMatrix.from_seed(4, 4)
        chain = mc.ChainState.start(g, 2, 0.5, "all", seed=1, audit_interval=5)
        chain.energy += 1.0  # simulate drift
        with pytest.raises(RuntimeError, match="drifted"):
            for _ in range(5):
                mc.metropolis_sweep(chain, g)

    def test_checkpoint_roundtrip_chain(self, tmp_path):
        g = core.CouplingMatrix.from_seed(5, 8)
        chain = mc.ChainState.start(g, 3, 0.7, "all", seed=2)
        mc.run_sweeps(chain, g, 37)
        path = str(tmp_path / "chain.json")
        mc.save_checkpoint(chain, path)
        restored = mc.load_chain(path)
        mc.run_sweeps(chain, g, 20)
        mc.run_sweeps(restored, g, 20)
        assert np.array_equal(chain.colors, restored.colors)
        assert chain.energy == restored.energy
        assert chain.sweeps == restored.sweeps

    def test_checkpoint_roundtrip_ladder(self, tmp_path):
        g = core.CouplingMatrix.from_seed(4, 8)
        ladder = mc.TemperingLadder.start(g, 2, [0.3, 0.9], "all", seed=3)
        for _ in range(11):
            mc.tempering_step(ladder, g)
        path = str(tmp_path / "ladder.json")
        mc.save_checkpoint(ladder, path)
        restored = mc.load_ladder(path)
        mc.tempering_step(ladder, g)
        mc.tempering_step(restored, g)
        for a, b in zip(ladder.rungs, restored.rungs):
            assert np.array_equal(a.colors, b.colors)
            assert a.energy == b.energy
        assert np.array_equal(ladder.swap_accepts, restored.swap_accepts)

    def test_cached_energy_matches_recomputation(self):
        g = core.CouplingMatrix.from_seed(6, 6)
        chain = mc.ChainState.start(g, 3, 1.2, "all", seed=4)
        mc.run_sweeps(chain, g, 333)
        full = float(core.batch_energies_raw(chain.colors[None, :], g)[0])
        assert chain.energy == pytest.approx(full, rel=1e-6)
