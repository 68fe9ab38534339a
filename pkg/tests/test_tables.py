"""Multiway tables and posterior Cramér's V."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pochhammer_priors.tables import (
    MCMCConfig,
    MultiwayTable,
    cramers_v,
    synthetic_table,
    table_posterior_cramers_v,
)


def _brute_force_v(joint):
    """Cramér's V by explicit loops over cells."""
    joint = np.asarray(joint, dtype=float)
    r, c = joint.shape
    row, col = joint.sum(axis=1), joint.sum(axis=0)
    chi = 0.0
    for i in range(r):
        for j in range(c):
            e = row[i] * col[j]
            chi += (joint[i, j] - e) ** 2 / e
    return (chi / (min(r, c) - 1)) ** 0.5


class TestCramersV:
    def test_independence(self):
        assert cramers_v(np.outer([0.2, 0.3, 0.5], [0.6, 0.4])) == pytest.approx(0.0, abs=1e-12)

    def test_perfect_association(self):
        assert cramers_v([[0.5, 0.0], [0.0, 0.5]]) == pytest.approx(1.0, abs=1e-12)

    def test_hand_case(self):
        assert cramers_v([[0.4, 0.1], [0.1, 0.4]]) == pytest.approx(0.6, abs=1e-12)
        assert _brute_force_v([[0.4, 0.1], [0.1, 0.4]]) == pytest.approx(0.6, abs=1e-12)

    def test_zero_marginal(self):
        with pytest.raises(ValueError):
            cramers_v([[0.5, 0.0], [0.5, 0.0]])

    def test_not_a_distribution(self):
        with pytest.raises(ValueError):
            cramers_v([[0.5, 0.2], [0.1, 0.1]])

    @settings(max_examples=50)
    @given(st.integers(2, 5), st.integers(2, 5), st.integers(0, 10_000))
    def test_bounds_and_brute_force(self, r, c, seed):
        joint = np.random.default_rng(seed).dirichlet(np.full(r * c, 0.5)).reshape(r, c)
        joint = np.clip(joint, 1e-12, None)
        joint /= joint.sum()
        v = cramers_v(joint)
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(_brute_force_v(joint), rel=1e-10, abs=1e-12)

    @settings(max_examples=30)
    @given(st.integers(0, 10_000))
    def test_label_invariance(self, seed):
        rng = np.random.default_rng(seed)
        joint = rng.dirichlet(np.ones(12)).reshape(3, 4)
        perm_r, perm_c = rng.permutation(3), rng.permutation(4)
        assert cramers_v(joint[perm_r]) == pytest.approx(cramers_v(joint), rel=1e-12)
        assert cramers_v(joint[:, perm_c]) == pytest.approx(cramers_v(joint), rel=1e-12)

    def test_transpose_symmetry(self):
        joint = np.random.default_rng(3).dirichlet(np.ones(8)).reshape(2, 4)
        assert cramers_v(joint.T) == cramers_v(joint)


class TestMultiwayTable:
    def test_counts(self):
        t = MultiwayTable((2, 3), [[0, 1], [1, 2], [0, 1]])
        assert t.n_cells == 6
        np.testing.assert_array_equal(t.counts(), [0, 2, 0, 0, 0, 1])
        assert t.sparse_counts() == {1: 2, 5: 1}
        assert t.counts().sum() == t.n_obs

    def test_from_labels(self):
        t = MultiwayTable.from_labels([("a", "g"), ("c", "t"), ("a", "t")])
        assert t.alphabets == (("a", "c"), ("g", "t"))
        np.testing.assert_array_equal(t.observations, [[0, 0], [1, 1], [0, 1]])
        with pytest.raises(ValueError):
            MultiwayTable.from_labels([("a", "x")], alphabets=[("a",), ("g", "t")])

    def test_validation(self):
        with pytest.raises(ValueError):
            MultiwayTable((2, 2), [[0, 2]])
        with pytest.raises(ValueError):
            MultiwayTable((2, 2), [[0, 1, 1]])

    def test_marginal_consistency(self):
        t = MultiwayTable((2, 3, 4), np.zeros((0, 3), dtype=int))
        probs = np.random.default_rng(0).dirichlet(np.ones(24))
        tensor = probs.reshape(2, 3, 4)
        singles = [tensor.sum(axis=(1, 2)), tensor.sum(axis=(0, 2)), tensor.sum(axis=(0, 1))]
        for j, k in itertools.permutations(range(3), 2):
            pair = t.marginal(probs, (j, k))
            np.testing.assert_allclose(pair.sum(axis=1), singles[j], atol=1e-12)
            np.testing.assert_allclose(pair.sum(axis=0), singles[k], atol=1e-12)

    def test_marginal_axis_order(self):
        t = MultiwayTable((2, 3, 4), np.zeros((0, 3), dtype=int))
        probs = np.random.default_rng(1).dirichlet(np.ones(24), size=3)
        np.testing.assert_allclose(t.marginal(probs, (2, 0, 1)), probs.reshape(3, 2, 3, 4).transpose(0, 3, 1, 2))


class TestPosteriorCramersV:
    CONFIG = MCMCConfig(iterations=3000, burn_in=500, thin=5, seed=0)

    def test_independent_positions(self):
        t = synthetic_table("independent", p=2, d=4, n_obs=500, seed=1)
        s = table_posterior_cramers_v(t, config=self.CONFIG)
        assert s.mean[0] < 0.15
        assert s.q025[0] < 0.06

    def test_copy_position(self):
        t = synthetic_table("copy", p=2, d=4, n_obs=200, seed=2)
        s = table_posterior_cramers_v(t, config=self.CONFIG)
        assert s.mean[0] > 0.8

    def test_repeated_tuple(self):
        t = MultiwayTable((3, 3, 3), np.tile([1, 2, 0], (40, 1)))
        s = table_posterior_cramers_v(t, config=self.CONFIG)
        assert np.all(s.mean > 0.5)
        assert np.all((s.q025 >= 0) & (s.q975 <= 1))

    def test_summary_structure(self):
        t = synthetic_table("promoter", p=4, d=4, n_obs=53, seed=0)
        s = table_posterior_cramers_v(t, config=MCMCConfig(iterations=600, burn_in=100, thin=5))
        assert s.pairs == tuple(itertools.combinations(range(4), 2))
        m = s.matrix()
        np.testing.assert_array_equal(m, m.T)
        assert np.all(np.isnan(np.diag(m)))
        assert np.all((s.q025 >= 0) & (s.q975 <= 1) & (s.q025 <= s.mean) & (s.mean <= s.q975))
        assert s.rows()[0][:2] == (1, 2)

    def test_single_position(self):
        t = MultiwayTable((4,), [[0], [1], [1]])
        s = table_posterior_cramers_v(t, config=self.CONFIG)
        assert s.pairs == () and s.rows() == []

    def test_deterministic(self):
        t = synthetic_table("promoter", p=3, d=4, n_obs=30, seed=4)
        cfg = MCMCConfig(iterations=400, burn_in=100, thin=2, seed=9)
        a = table_posterior_cramers_v(t, config=cfg)
        b = table_posterior_cramers_v(t, config=cfg)
        np.testing.assert_array_equal(a.mean, b.mean)
