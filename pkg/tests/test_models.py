"""Companion count models: NB coupling, negative multinomial, GDM, ESF, Yule-Simon."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.special import betaln

from pochhammer_priors.errors import PochhammerError
from pochhammer_priors.models import (
    FIG3_PRIORS,
    AllelicPartition,
    NBCoupledPrior,
    cycle_type_count,
    enumerate_partitions,
    esf_log_prob,
    esf_posterior,
    figure4_curves,
    gdm_halfhorseshoe_density_curves,
    gdm_probs_to_stick,
    gdm_reduction_sample,
    gdm_stick_to_probs,
    nb_generate,
    nb_marginal_posterior,
    nb_pi_conditional,
    nm_marginal_log_likelihood,
    nm_posterior,
    yule_simon_log_pmf,
    yule_simon_posterior,
)
from pochhammer_priors.numeric import integrate_halfline, log_rising, rng_suite
from pochhammer_priors.pochhammer import PochhammerParams, ph_moment

PH = PochhammerParams

# frozen sympy partial-fraction integrals
C_NB_12 = 0.0014606025714975022  # K = 2, n = (1, 2), PH(0,1,2,1)
C_NM_4_2 = 0.002500645529967858  # N = 4, K = 2, PH(0,1,2,1)
C_ESF_M2 = 0.3068528194400547  # 1 - ln 2
C_ESF_M11 = 0.06233514461880835
C_YS_12 = 0.008527546991404641  # counts (1, 2), PH(0,1,3,1)


class TestNBCoupling:
    def test_empty_counts_rescales_prior(self):
        e = nb_marginal_posterior([0, 0, 0], NBCoupledPrior(PH(0, 1, 2, 1)))
        # 1 / ((4 alpha + 1)(4 alpha + 2)) integrates to ln 2 / 4
        assert e.norm_const == pytest.approx(math.log(2) / 4, rel=1e-13)

    def test_single_category(self):
        e = nb_marginal_posterior([0], NBCoupledPrior(PH(0, 1, 2, 1)))
        assert e.norm_const == pytest.approx(math.log(2) / 2, rel=1e-13)
        assert e.norm_const == pytest.approx(0.346574, abs=5e-7)

    def test_two_categories(self):
        e = nb_marginal_posterior([1, 2], NBCoupledPrior(PH(0, 1, 2, 1)))
        assert e.norm_const == pytest.approx(C_NB_12, rel=1e-10)
        f = lambda a: log_rising(a, 1) + log_rising(a, 2) - log_rising(3 * a + 1, 5)
        assert e.norm_const == pytest.approx(integrate_halfline(f), rel=1e-6)

    def test_pi_conditional(self):
        assert nb_pi_conditional(2.0, [3, 4, 0], NBCoupledPrior(PH(0, 1, 2, 1))) == (9.0, 9.0)
        assert nb_pi_conditional(2.0, [], NBCoupledPrior(PH(0, 1, 2, 1))) == (3.0, 2.0)

    def test_pi_conditional_mean_decreasing_in_n(self):
        prior = NBCoupledPrior(PH(0, 1, 2, 1))
        means = []
        for N in (0, 3, 10, 50):
            p, q = nb_pi_conditional(1.5, [N, 0], prior)
            means.append(p / (p + q))
        assert np.all(np.diff(means) < 0)

    def test_generate_deterministic(self):
        a = nb_generate(NBCoupledPrior(PH(0, 1, 2, 1)), 1000, seed=3)
        b = nb_generate(NBCoupledPrior(PH(0, 1, 2, 1)), 1000, seed=3)
        np.testing.assert_array_equal(a.histogram()[1], b.histogram()[1])

    def test_zero_fraction_regimes(self):
        small = nb_generate(FIG3_PRIORS["m0_b2"], 100_000, seed=0).zero_fraction
        large = nb_generate(FIG3_PRIORS["m3_b20"], 100_000, seed=0).zero_fraction
        # the population zero fraction under PH(0,1,2,1) is exactly one half
        assert small == pytest.approx(0.5, abs=0.005)
        assert small - large >= 0.2

    def test_composition_mean(self):
        """Counts given (alpha, pi) have mean alpha (1 - pi) / pi."""
        rng = rng_suite(8)
        alpha, pi, n = 2.5, 0.3, 400_000
        lam = rng.gamma(alpha, pi / (1 - pi), n)
        counts = rng.poisson(lam)
        se = counts.std() / math.sqrt(n)
        assert abs(counts.mean() - alpha * (1 - pi) / pi) < 4 * se

    def test_histogram(self):
        s = nb_generate(NBCoupledPrior(PH(0, 1, 5, 1)), 5000, seed=1)
        x, f = s.histogram(20)
        assert x.size == 21 and f.sum() == pytest.approx(1.0)
        assert s.nonzero_mode is None or s.nonzero_mode >= 1


class TestNegativeMultinomial:
    def test_k0(self):
        assert nm_marginal_log_likelihood(2.0, 3, 0) == pytest.approx(math.log(2) - math.log(5))

    def test_posterior_normalizer(self):
        e = nm_posterior(4, 2, PH(0, 1, 2, 1))
        assert e.norm_const == pytest.approx(C_NM_4_2, rel=1e-10)
        f = lambda a: nm_marginal_log_likelihood(a, 4, 2) - log_rising(a + 1, 2)
        assert e.norm_const == pytest.approx(integrate_halfline(f), rel=1e-6)

    def test_tail_slope(self):
        big = np.array([1e6, 1e7])
        lv = nm_marginal_log_likelihood(big, 5, 3)
        slope = (lv[1] - lv[0]) / math.log(10)
        assert slope == pytest.approx(-3, abs=1e-4)


class TestStickBreaking:
    def test_examples(self):
        np.testing.assert_allclose(gdm_stick_to_probs([0.3]), [0.3, 0.7])
        np.testing.assert_allclose(gdm_stick_to_probs([0.5, 0.5]), [0.5, 0.25, 0.25])

    def test_domain(self):
        with pytest.raises(ValueError):
            gdm_stick_to_probs([1.2])
        with pytest.raises(ValueError):
            gdm_probs_to_stick([0.5, 0.6])

    @settings(max_examples=50)
    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=12))
    def test_round_trip(self, w):
        pi = np.array(w) / np.sum(w)
        back = gdm_stick_to_probs(gdm_probs_to_stick(pi))
        np.testing.assert_allclose(back, pi, atol=1e-12)
        assert back.sum() == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=50)
    @given(st.lists(st.floats(0.001, 0.999), min_size=1, max_size=12))
    def test_bijective_from_sticks(self, z):
        np.testing.assert_allclose(gdm_probs_to_stick(gdm_stick_to_probs(z)), z, rtol=1e-9)

    def test_reduction_to_dirichlet(self):
        alpha = np.array([0.7, 1.5, 2.0])
        draws = gdm_reduction_sample(alpha, 200_000, seed=2)
        ref = rng_suite(3).dirichlet(alpha, 200_000)
        for k in range(3):
            assert stats.ks_2samp(draws[:, k], ref[:, k]).statistic < 0.01


class TestGDMCurves:
    def test_beta_one_fixed(self):
        c = gdm_halfhorseshoe_density_curves(beta=1.0, n_draws=1_000_000, seed=0)
        d = c["density"]
        assert np.argmax(d) == 0
        # alpha has no mean, so the density at Z = 1 (which equals E[alpha]) is
        # unbounded too; the histogram still puts more mass at the left end
        assert d[0] > d[-1]

    def test_both_half_horseshoe(self):
        c = gdm_halfhorseshoe_density_curves(beta=PH(0, 1, 2, 1), n_draws=1_000_000, seed=0)
        d = c["density"]
        assert set(np.argsort(d)[-2:]) == {0, d.size - 1}

    def test_uniform(self):
        c = gdm_halfhorseshoe_density_curves(alpha_prior=1.0, beta=1.0, n_draws=200_000, seed=0)
        # binomial sd of a bin density with 100 bins is about sqrt(100 / n)
        assert np.max(np.abs(c["density"] - 1.0)) < 5 * math.sqrt(100 / 200_000)

    def test_figure4_keys(self):
        curves = figure4_curves(n_draws=20_000, bins=50)
        assert set(curves) == {"beta0.5", "beta1", "beta2", "beta_halfhorseshoe"}
        for c in curves.values():
            assert _integrates_to_one(c)


def _integrates_to_one(c):
    width = np.diff(c["edges"])
    return abs(np.sum(c["density"] * width) - 1.0) < 1e-9


class TestESF:
    def test_partition_validation(self):
        with pytest.raises(PochhammerError):
            AllelicPartition((-1, 1))
        with pytest.raises(PochhammerError):
            AllelicPartition(())
        p = AllelicPartition.from_sizes([2, 1, 1])
        assert p.multiplicities == (2, 1) and p.n == 4 and p.n_alleles == 3
        assert AllelicPartition.from_pairs([(1, 2), (2, 1)]) == p

    def test_two_genes(self):
        for a in (0.3, 1.0, 4.0):
            assert math.exp(esf_log_prob(AllelicPartition((2,)), a)) == pytest.approx(a / (a + 1), rel=1e-13)
            assert math.exp(esf_log_prob(AllelicPartition((0, 1)), a)) == pytest.approx(1 / (a + 1), rel=1e-13)

    def test_enumeration_count(self):
        assert sum(1 for _ in enumerate_partitions(5)) == 7
        assert sum(1 for _ in enumerate_partitions(12)) == 77

    @pytest.mark.parametrize("n", range(1, 9))
    @pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5])
    def test_normalization(self, n, alpha):
        total = math.fsum(math.exp(esf_log_prob(p, alpha)) for p in enumerate_partitions(n))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_n5_alpha07(self):
        total = math.fsum(math.exp(esf_log_prob(p, 0.7)) for p in enumerate_partitions(5))
        assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", range(1, 7))
    def test_uniform_permutations(self, n):
        for p in enumerate_partitions(n):
            assert math.exp(esf_log_prob(p, 1.0)) == pytest.approx(cycle_type_count(p) / math.factorial(n), rel=1e-12)

    def test_posterior_double_pole(self):
        e = esf_posterior(AllelicPartition((0, 1)), PH(0, 1, 2, 1))
        assert e.norm_const == pytest.approx(C_ESF_M2, rel=1e-12)
        assert e.max_order == 2

    def test_posterior_singletons(self):
        e = esf_posterior(AllelicPartition((2,)), PH(0, 1, 3, 1))
        assert e.norm_const == pytest.approx(C_ESF_M11, rel=1e-12)
        f = lambda a: np.log(a) - 2 * np.log1p(a) - np.log(a + 2) - np.log(a + 3)
        assert e.norm_const == pytest.approx(integrate_halfline(f), rel=1e-6)

    def test_unsimplified_form_when_m_not_below_n(self):
        part = AllelicPartition((1, 1))  # n = 3
        prior = PH(3, 1, 7, 1)
        e = esf_posterior(part, prior)
        f = lambda a: 2 * np.log(a) + log_rising(a, 3) - log_rising(a, 3) - log_rising(a + 1, 7)
        assert e.norm_const == pytest.approx(integrate_halfline(f), rel=1e-6)

    def test_singletons_raise_mean(self):
        prior = PH(0, 1, 6, 1)
        e = esf_posterior(AllelicPartition((4,)), prior)
        f_post = lambda a: e.form.log_eval(a)
        post_mean = integrate_halfline(lambda a: f_post(a) + np.log(a)) / integrate_halfline(f_post)
        assert post_mean > ph_moment(prior, 1)


class TestYuleSimon:
    def test_pmf(self):
        assert math.exp(yule_simon_log_pmf(2, 1.0)) == pytest.approx(1 / 6, rel=1e-14)
        assert yule_simon_log_pmf(5, 2.0) == pytest.approx(math.log(2.0) + betaln(5, 3), rel=1e-14)

    def test_telescoping(self):
        n = np.arange(1, 1_000_001)
        total = math.fsum(np.exp(yule_simon_log_pmf(n, 1.0)))
        assert total == pytest.approx(1 - 1 / (1e6 + 1), abs=1e-12)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0])
    def test_partial_sums(self, alpha):
        p = np.exp(yule_simon_log_pmf(np.arange(1, 20_001), alpha))
        s = np.cumsum(p)
        assert np.all(p > 0) and np.all(np.diff(s) > 0) and s[-1] <= 1.0
        assert s[-1] > 0.99

    def test_domain(self):
        with pytest.raises(ValueError):
            yule_simon_log_pmf(0, 1.0)
        with pytest.raises(ValueError):
            yule_simon_posterior([0, 1], PH(0, 1, 3, 1))

    def test_posterior_normalizer(self):
        e = yule_simon_posterior([1, 2], PH(0, 1, 3, 1))
        assert e.norm_const == pytest.approx(C_YS_12, rel=1e-10)

    def test_high_order_falls_back(self):
        prior = PH(0, 1, 3, 1)
        counts = [3, 3, 3, 2]
        e = yule_simon_posterior(counts, prior)
        assert e.numeric_fallback
        # drop the constant (n - 1)! factors of the pmf
        f = lambda a: sum(yule_simon_log_pmf(n, a) - math.lgamma(n) for n in counts) - log_rising(a + 1, 3)
        assert e.norm_const == pytest.approx(integrate_halfline(f), rel=1e-6)
