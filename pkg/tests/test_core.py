import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pottsglass import core

from conftest import brute_force_energy, indicator_inner_product, random_config


def cfg(colors, kappa):
    return core.SpinConfig(np.array(colors, dtype=np.int64), kappa)


def coupling(matrix):
    return core.CouplingMatrix(np.array(matrix, dtype=np.float64))


# configs paired with couplings of matching size, for property tests
small_systems = st.integers(2, 6).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.integers(2, 4),
        st.lists(st.integers(0, 10 ** 6), min_size=n, max_size=n),
        st.lists(
            st.lists(st.floats(-3, 3, allow_nan=False), min_size=n, max_size=n),
            min_size=n,
            max_size=n,
        ),
    )
)


class TestSpinConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            cfg([0, 1], 2)
        with pytest.raises(ValueError):
            cfg([1, 3], 2)
        with pytest.raises(ValueError):
            core.SpinConfig(np.array([1, 2]), 1)

    def test_immutable(self):
        s = cfg([1, 2, 1], 2)
        with pytest.raises(ValueError):
            s.colors[0] = 2

    def test_with_color(self):
        s = cfg([1, 1], 2)
        assert s.with_color(1, 2) == cfg([1, 2], 2)
        with pytest.raises(IndexError):
            s.with_color(2, 1)


class TestHamiltonians:
    def test_single_site_is_identity(self):
        g = coupling([[3.25]])
        assert core.hamiltonian_raw(cfg([1], 3), g) == 3.25

    def test_two_sites_distinct_colors_keep_diagonal(self):
        g = coupling([[1.0, 2.0], [3.0, 4.0]])
        assert core.hamiltonian_raw(cfg([1, 2], 2), g) == pytest.approx((1 + 4) / math.sqrt(2), abs=1e-14)

    def test_two_sites_same_color(self):
        g = coupling([[1.0, 1.0], [1.0, 1.0]])
        assert core.hamiltonian_raw(cfg([1, 1], 2), g) == pytest.approx(4 / math.sqrt(2), abs=1e-12)

    def test_centered_single_site(self):
        g = coupling([[5.0]])
        assert core.hamiltonian_centered(cfg([2], 3), g) == pytest.approx(5.0 * 2 / 3, abs=1e-14)

    def test_centered_hand_value(self):
        g = coupling([[1.0, 0.0], [0.0, 1.0]])
        got = core.hamiltonian_centered(cfg([1, 2], 2), g)
        assert got == pytest.approx(math.sqrt(2) / 2, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(core.DimensionMismatchError):
            core.hamiltonian_raw(cfg([1, 2, 1], 2), coupling([[1.0]]))

    @settings(max_examples=60, deadline=None)
    @given(small_systems)
    def test_centering_shift_independent_of_config(self, sys):
        n, kappa, color_seed, g_rows = sys
        g = coupling(g_rows)
        shifts = set()
        for offset in range(3):
            colors = [(c + offset) % kappa + 1 for c in color_seed]
            s = cfg(colors, kappa)
            shifts.add(round(core.hamiltonian_centered(s, g) - core.hamiltonian_raw(s, g), 12))
        assert len(shifts) == 1

    @settings(max_examples=40, deadline=None)
    @given(small_systems)
    def test_matches_double_loop_oracle(self, sys):
        n, kappa, color_seed, g_rows = sys
        colors = np.array([c % kappa + 1 for c in color_seed])
        g = coupling(g_rows)
        expected = brute_force_energy(colors, g.g)
        assert core.hamiltonian_raw(core.SpinConfig(colors, kappa), g) == pytest.approx(expected, abs=1e-10)


class TestDeltaEnergy:
    def test_no_change(self):
        g = core.CouplingMatrix.from_seed(4, 1)
        s = cfg([1, 2, 1, 2], 2)
        assert core.delta_energy(s, g, 2, 1) == 0.0

    def test_hand_value(self):
        g = coupling([[1.0, 1.0], [1.0, 1.0]])
        assert core.delta_energy(cfg([1, 1], 2), g, 1, 2) == pytest.approx(-math.sqrt(2), abs=1e-12)

    def test_out_of_range(self):
        g = core.CouplingMatrix.from_seed(3, 1)
        s = cfg([1, 2, 3], 3)
        with pytest.raises(IndexError):
            core.delta_energy(s, g, 3, 1)
        with pytest.raises(ValueError):
            core.delta_energy(s, g, 0, 4)

    def test_matches_full_recomputation(self, rng):
        g = core.CouplingMatrix.from_seed(6, 77)
        for _ in range(50):
            s = random_config(rng, 6, 3)
            site = int(rng.integers(0, 6))
            color = int(rng.integers(1, 4))
            expected = core.hamiltonian_raw(s.with_color(site, color), g) - core.hamiltonian_raw(s, g)
            assert core.delta_energy(s, g, site, color) == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_chain_of_updates(self, rng):
        n = 8
        g = core.CouplingMatrix.from_seed(n, 5)
        s = random_config(rng, n, 3)
        energy = core.hamiltonian_raw(s, g)
        for site in range(n):
            color = int(rng.integers(1, 4))
            energy += core.delta_energy(s, g, site, color)
            s = s.with_color(site, color)
        assert energy == pytest.approx(core.hamiltonian_raw(s, g), rel=1e-8)


class TestMagnetizationOverlap:
    def test_magnetization_examples(self):
        assert core.magnetization(cfg([1, 2, 3], 3)).fractions == tuple(
            __import__("fractions").Fraction(1, 3) for _ in range(3)
        )
        m = core.magnetization(cfg([1, 1, 1, 2], 2))
        assert [f"{f}" for f in m.fractions] == ["3/4", "1/4"]
        assert core.magnetization(cfg([2, 2, 2], 3)).counts.tolist() == [0, 3, 0]

    def test_magnetization_sums_exactly(self, rng):
        for _ in range(20):
            s = random_config(rng, int(rng.integers(2, 12)), int(rng.integers(2, 5)))
            assert sum(core.magnetization(s).fractions) == 1

    def test_overlap_examples(self):
        s = cfg([1, 2, 3], 3)
        assert np.array_equal(core.overlap(s, s).counts, np.eye(3, dtype=np.int64))
        a = cfg([1, 1, 2, 2, 3, 3], 3)
        b = cfg([1, 2, 3, 1, 2, 3], 3)
        assert core.overlap(a, b).counts.tolist() == [[1, 1, 0], [1, 0, 1], [0, 1, 1]]

    def test_self_overlap_is_diagonal_magnetization(self, rng):
        for _ in range(10):
            s = random_config(rng, 9, 3)
            r = core.overlap(s, s)
            assert np.array_equal(np.diag(r.counts), core.magnetization(s).counts)
            assert np.array_equal(r.counts, np.diag(np.diag(r.counts)))

    def test_margins_reproduce_magnetization(self, rng):
        for _ in range(20):
            s = random_config(rng, 10, 4)
            t = random_config(rng, 10, 4)
            r = core.overlap(s, t)
            assert r.row_sums() == core.magnetization(s)
            assert r.col_sums() == core.magnetization(t)

    @settings(max_examples=100, deadline=None)
    @given(
        st.integers(2, 4).flatmap(
            lambda k: st.tuples(
                st.just(k),
                st.lists(st.integers(1, k), min_size=1, max_size=10),
                st.lists(st.integers(1, k), min_size=10, max_size=10),
            )
        )
    )
    def test_margin_property(self, data):
        kappa, a, b = data
        n = len(a)
        s = cfg(a, kappa)
        t = cfg(b[:n], kappa)
        r = core.overlap(s, t)
        assert r.row_sums() == core.magnetization(s)
        assert r.col_sums() == core.magnetization(t)
        assert int(r.counts.sum()) == n

    def test_size_mismatch(self):
        with pytest.raises(core.DimensionMismatchError):
            core.overlap(cfg([1, 2], 2), cfg([1, 2, 1], 2))


class TestCovariance:
    def test_balanced_self(self):
        s = cfg([1, 2, 3], 3)
        assert core.covariance_raw(s, s) == pytest.approx(1.0, abs=1e-14)

    def test_monochrome_self(self):
        s = cfg([2, 2, 2, 2], 3)
        assert core.covariance_raw(s, s) == pytest.approx(4.0, abs=1e-14)

    def test_disjoint_colors(self):
        assert core.covariance_raw(cfg([1, 1], 2), cfg([2, 2], 2)) == pytest.approx(2.0, abs=1e-14)

    def test_symmetric_and_matches_indicator_oracle(self, rng):
        for _ in range(30):
            s = random_config(rng, 6, 3)
            t = random_config(rng, 6, 3)
            got = core.covariance_raw(s, t)
            assert got == pytest.approx(core.covariance_raw(t, s), abs=1e-12)
            assert got == pytest.approx(indicator_inner_product(s.colors, t.colors), abs=1e-10)

    def test_centered_balanced_self(self):
        for kappa, n in ((2, 4), (3, 6)):
            colors = np.repeat(np.arange(1, kappa + 1), n // kappa)
            s = core.SpinConfig(colors, kappa)
            assert core.covariance_centered(s, s) == pytest.approx(n * (kappa - 1) / kappa ** 2, abs=1e-12)

    def test_centered_monochrome_matches_projection_oracle(self):
        for kappa in (2, 3, 4):
            n = 4
            s = cfg([1] * n, kappa)
            p = core.Projection(kappa).materialize()
            r = core.overlap(s, s).asarray()
            expected = n * ((p @ r @ p) ** 2).sum()
            assert core.covariance_centered(s, s) == pytest.approx(expected, abs=1e-12)
            # closed form for a rank-one overlap: n * ((kappa-1)/kappa)^2
            assert expected == pytest.approx(n * ((kappa - 1) / kappa) ** 2, abs=1e-12)

    def test_centered_antialigned_pair(self):
        got = core.covariance_centered(cfg([1, 2], 2), cfg([2, 1], 2))
        assert got == pytest.approx(0.5, abs=1e-14)

    def test_centered_equals_shifted_frobenius_for_balanced(self):
        # exhaustive over all balanced pairs at kappa=3, n=6
        kappa, n = 3, 6
        colors = core.config_array(n, kappa, "balanced")
        configs = [core.SpinConfig(c, kappa) for c in colors]
        for s in configs:
            for t in configs:
                r = core.overlap(s, t).asarray()
                expected = n * ((r - 1 / kappa ** 2) ** 2).sum()
                assert abs(core.covariance_centered(s, t) - expected) <= 1e-10


class TestEnumeration:
    def test_counts(self):
        assert core.count_configs(2, 2, "all") == 4
        assert core.count_configs(4, 2, "balanced") == 6
        assert core.count_configs(3, 3, "balanced") == 6
        assert core.count_configs(5, 2, (3, 2)) == 10

    def test_enumeration_unique_and_complete(self):
        seen = {s.as_tuple() for s in core.enumerate_configs(4, 2, "balanced")}
        assert len(seen) == 6
        assert all(sum(1 for c in t if c == 1) == 2 for t in seen)
        assert len({s.as_tuple() for s in core.enumerate_configs(2, 2)}) == 4

    def test_divisibility_error_names_constraint(self):
        with pytest.raises(core.DivisibilityError, match="balanced"):
            core.sector_counts(5, 2, "balanced")

    def test_config_array_matches_stream(self):
        arr = core.config_array(3, 3, "balanced")
        stream = [s.as_tuple() for s in core.enumerate_configs(3, 3, "balanced")]
        assert [tuple(row) for row in arr] == stream
        arr_all = core.config_array(3, 2, "all")
        stream_all = [s.as_tuple() for s in core.enumerate_configs(3, 2, "all")]
        assert [tuple(row) for row in arr_all] == stream_all

    def test_cap(self):
        with pytest.raises(core.EnumerationCapError):
            core.config_array(10, 3, "all", cap=100)


class TestIdentities:
    def test_pointwise_centering_identity(self):
        # (1{match} - 1/k)^2 == (1 - 2/k) 1{match} + 1/k^2 for both indicator values
        for kappa in range(2, 8):
            a = 1.0 - 2.0 / kappa
            for ind in (0.0, 1.0):
                lhs = (ind - 1.0 / kappa) ** 2
                rhs = a * ind + 1.0 / kappa ** 2
                assert lhs == pytest.approx(rhs, abs=1e-15)

    def test_projection_properties(self):
        for kappa in (2, 3, 5, 8):
            p = core.Projection(kappa).materialize()
            assert np.abs(p @ p - p).max() < 1e-12
            assert np.abs(p - p.T).max() < 1e-12
            assert np.abs(p @ np.ones(kappa)).max() < 1e-12


class TestCouplingMatrix:
    def test_reproducible(self):
        a = core.CouplingMatrix.from_seed(5, 123, 7)
        b = core.CouplingMatrix.from_seed(5, 123, 7)
        assert np.array_equal(a.g, b.g)

    def test_streams_differ(self):
        a = core.CouplingMatrix.from_seed(5, 123, 0)
        b = core.CouplingMatrix.from_seed(5, 123, 1)
        assert not np.allclose(a.g, b.g)

    def test_entries_look_standard_normal(self):
        g = core.CouplingMatrix.from_seed(200, 9)
        flat = g.g.ravel()
        assert abs(flat.mean()) < 0.02
        assert abs(flat.std() - 1.0) < 0.02

    def test_flipped_at(self):
        g = core.CouplingMatrix.from_seed(4, 3)
        f = g.flipped_at(1)
        assert f.g[1, 1] == g.g[1, 1]
        assert f.g[1, 0] == -g.g[1, 0]
        assert f.g[2, 1] == -g.g[2, 1]
        assert f.g[0, 2] == g.g[0, 2]
