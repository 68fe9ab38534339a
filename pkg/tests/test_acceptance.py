"""Acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict, printed immediately and
again in the terminal summary.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from pochhammer_priors.dm import (
    Corpus,
    effective_sample_size,
    heter_conditional_expansion,
    heter_conditional_log_density,
    homog_posterior,
    homog_posterior_double_root,
    homog_posterior_mean_pi,
    mwg_sample,
)
from pochhammer_priors.errors import IntegrabilityError, PoleCollisionError
from pochhammer_priors.harness import ScenarioConfig, run_benchmark
from pochhammer_priors.models import (
    FIG3_PRIORS,
    enumerate_partitions,
    esf_log_prob,
    nb_generate,
    yule_simon_log_pmf,
)
from pochhammer_priors.numeric import Precision, integrate_halfline, log_rising
from pochhammer_priors.pochhammer import (
    PochhammerParams,
    ph_quantile,
    ph_residues,
    pph_residues,
    prior_mass_near_zero,
    stirling_gamma_limit_experiment,
    stirling_population_ks,
)
from pochhammer_priors.tables import cramers_v

PH = PochhammerParams

# independent 2-D tensor-grid quadrature of the posterior means, n = (5, 3), PH(0,1,5,1)
MWG_ORACLE = np.array([1.1045269142519631, 0.8616113248952315])


def verdict(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def _prior_log(prior):
    a, c = float(prior.a), float(prior.c)

    def f(x):
        out = -log_rising(c * x + a, prior.b) + prior.d * np.log(x)
        if prior.m:
            out = out + log_rising(x, prior.m)
        return out

    return f


def _homog_log(counts, prior):
    K, N = len(counts), int(sum(counts))
    base = _prior_log(prior)

    def f(x):
        out = base(x) - log_rising(K * x, N)
        for n in counts:
            out = out + log_rising(x, int(n))
        return out

    return f


def _random_case(rng, kind):
    """One randomized closed-form normalizer and its quadrature, with ``N + b <= 30``."""
    halves = [Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(5, 2)]
    m = int(rng.integers(0, 4))
    d = int(rng.integers(0, 3)) if kind == "pph" else 0
    b = int(rng.integers(m + d + 2, m + d + 10))
    a = halves[rng.integers(len(halves))]
    c = Fraction(int(rng.integers(1, 6)), int(rng.integers(1, 3)))
    if kind in ("ph", "pph"):
        prior = PH(m, a, b, c, d)
        closed = (ph_residues(prior) if d == 0 else pph_residues(prior)).norm_const
        return closed, integrate_halfline(_prior_log(prior)), f"{kind} {prior}"
    K = int(rng.integers(2, 5))
    N = int(rng.integers(0, 31 - b))
    counts = rng.multinomial(N, np.full(K, 1 / K))
    if kind == "homog":
        prior = PH(m, a, b, c)
        post = homog_posterior(Corpus(counts), prior, method="theorem")
        return math.exp(post.log_C_n), integrate_halfline(_homog_log(counts, prior)), f"homog {counts} {prior}"
    if kind == "double":
        prior = PH(max(m, 1), 0, b + max(m, 1) - m, K)
        post = homog_posterior_double_root(Corpus(counts), prior)
        return math.exp(post.log_C_n), integrate_halfline(_homog_log(counts, prior)), f"double {counts} {prior}"
    prior = PH(m, a, b, c)
    n_k = int(counts[0])
    A = float(rng.uniform(0.2, 5.0))
    closed = heter_conditional_expansion(n_k, N, A, prior).norm_const
    quad = integrate_halfline(lambda x: heter_conditional_log_density(x, n_k, N, A, prior))
    return closed, quad, f"heter n_k={n_k} N={N} A={A:.3f} {prior}"


class TestExact:
    """Deterministic closed-form checks."""

    def test_c01_half_horseshoe_normalizer(self):
        e = ph_residues(PH(0, 1, 2, 1))
        err = abs(e.norm_const - math.log(2))
        gam = e.coefficient_values(1).tolist()
        ok = err <= 1e-12 and gam == [1.0, -1.0]
        assert verdict(1, ok, f"|C - ln 2| = {err:.2e}, residues = {gam}")

    def test_c02_residue_sum_zero(self):
        t0 = time.perf_counter()
        worst, cases = 0.0, 0
        for m in range(4):
            for d in range(3):
                for b in range(m + d + 2, 26):
                    for a in (Fraction(1, 2), Fraction(1), Fraction(3, 2)):
                        for c in (1, 2, 5):
                            e = pph_residues(PH(m, a, b, c, d), Precision.extended())
                            gam = e.coefficient_values(1)
                            worst = max(worst, abs(e.residue_sum) / np.max(np.abs(gam)))
                            cases += 1
        secs = time.perf_counter() - t0
        ok = worst <= 1e-10 and secs < 10
        assert verdict(2, ok, f"{cases} priors, max |sum gamma|/max|gamma| = {worst:.1e}, {secs:.1f} s")

    def test_c03_normalizer_vs_quadrature(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(20240)
        kinds = ["ph", "pph", "homog", "double", "heter"]
        worst, label, done = 0.0, "", 0
        while done < 50:
            try:
                closed, quad, desc = _random_case(rng, kinds[done % len(kinds)])
            except (IntegrabilityError, PoleCollisionError):
                continue
            rel = abs(closed - quad) / abs(quad)
            if rel >= worst:
                worst, label = rel, desc
            done += 1
        secs = time.perf_counter() - t0
        ok = worst <= 1e-6 and secs < 60
        assert verdict(3, ok, f"50 cases, worst rel err {worst:.1e} ({label}), {secs:.1f} s")

    def test_c04_homogeneous_means(self):
        worst_eq, worst_sum = 0.0, 0.0
        for counts, prior in [([3, 3, 3], PH(0, 1, 2, 1)), ([2, 2], PH(1, "1/2", 5, 2)),
                              ([0, 0, 0, 0], PH(0, 1, 3, 1)), ([4] * 5, PH(2, "3/2", 6, 5))]:
            post = homog_posterior(Corpus(counts), prior)
            means = [homog_posterior_mean_pi(post, k) for k in range(len(counts))]
            worst_eq = max(worst_eq, max(abs(v - 1 / len(counts)) for v in means))
        for counts, prior in [([5, 0, 1], PH(0, 1, 2, 1)), ([7, 2, 0, 1], PH(1, "1/2", 4, "9/4")),
                              ([0, 9], PH(0, 1, 5, 1))]:
            post = homog_posterior(Corpus(counts), prior)
            worst_sum = max(worst_sum, abs(sum(homog_posterior_mean_pi(post, k) for k in range(len(counts))) - 1))
        ok = worst_eq <= 1e-10 and worst_sum <= 1e-8
        assert verdict(4, ok, f"equal counts max dev {worst_eq:.1e}, |sum - 1| max {worst_sum:.1e}")

    def test_c05_esf_and_yule(self):
        worst = 0.0
        for n in range(1, 9):
            for alpha in (0.3, 1.0, 2.5):
                total = math.fsum(math.exp(esf_log_prob(p, alpha)) for p in enumerate_partitions(n))
                worst = max(worst, abs(total - 1))
        M = 1_000_000
        partial = math.fsum(np.exp(yule_simon_log_pmf(np.arange(1, M + 1), 1.0)))
        yule_err = abs(partial - (1 - 1 / (M + 1)))
        ok = worst <= 1e-12 and yule_err <= 1e-12
        assert verdict(5, ok, f"ESF max |sum - 1| = {worst:.1e}; Yule partial sum err {yule_err:.1e}")

    def test_c06_median_and_mass_near_zero(self):
        p = PH(0, 1, 2, 1)
        med_err = abs(ph_quantile(p, 0.5) - math.sqrt(2))
        mass_err = abs(prior_mass_near_zero(p, 1.0) - math.log(4 / 3) / math.log(2))
        ok = med_err <= 1e-9 and mass_err <= 1e-12
        assert verdict(6, ok, f"|median - sqrt 2| = {med_err:.1e}, mass err = {mass_err:.1e}")

    def test_c07_cramers_v(self):
        errs = [
            abs(cramers_v(np.outer([0.2, 0.3, 0.5], [0.6, 0.4]))),
            abs(cramers_v([[0.5, 0.0], [0.0, 0.5]]) - 1),
            abs(cramers_v([[0.4, 0.1], [0.1, 0.4]]) - 0.6),
        ]
        assert verdict(7, max(errs) <= 1e-12, f"errors {', '.join(f'{e:.1e}' for e in errs)}")


class TestStochastic:
    """Seeded simulation checks."""

    def test_c08_stirling_limit(self):
        """Monotone decrease of the Monte-Carlo KS distance over b = 10, 100, 1000.

        The population distances at b = 100 and 1000 differ by about 2e-4,
        far below the 1/sqrt(n) noise at n = 1e5, so the ordering of the
        sample statistics is not something a correct sampler can guarantee.
        """
        t0 = time.perf_counter()
        res = stirling_gamma_limit_experiment([10, 100, 1000], n=100_000, seed=0)
        secs = time.perf_counter() - t0
        ks = [r.ks for r in res]
        pop = [stirling_population_ks(b) for b in (10, 100, 1000)]
        ok = ks[0] > ks[1] > ks[2] and secs < 30
        verdict(8, ok, f"sample KS {', '.join(f'{v:.5f}' for v in ks)} "
                       f"(population {', '.join(f'{v:.5f}' for v in pop)}), {secs:.1f} s")
        assert ks[0] > ks[1] > ks[2]
        assert secs < 30

    def test_c09_mwg_oracle(self):
        t0 = time.perf_counter()
        ch = mwg_sample(Corpus([5, 3]), PH(0, 1, 5, 1), T=50_000, burn_in=5_000, seed=1, adapt=True)
        secs = time.perf_counter() - t0
        means = ch.draws.mean(axis=0)
        se = np.array([ch.draws[:, k].std() / math.sqrt(effective_sample_size(ch.draws[:, k])) for k in range(2)])
        z = np.abs(means - MWG_ORACLE) / se
        ok = bool(np.all(z < 3)) and secs < 120
        assert verdict(9, ok, f"means {means.round(4)} vs {MWG_ORACLE.round(4)}, |z| = {z.round(2)}, {secs:.1f} s")

    def test_c10_table2_setting1(self):
        t0 = time.perf_counter()
        full = run_benchmark([ScenarioConfig(2, 1, replicates=20)], ["ph1d"], iterations=10_000, burn_in=2_000)
        secs = time.perf_counter() - t0
        smoke = run_benchmark([ScenarioConfig(2, 1, replicates=5)], ["ph1d"], iterations=2_000, burn_in=500)
        r, s = full.row("ph1d"), smoke.row("ph1d")
        ok = (0.10 <= r.abs_mean <= 0.17 and 0.80 <= r.cov_mean <= 0.97
              and 0.08 <= s.abs_mean <= 0.20 and secs < 1800)
        assert verdict(10, ok, f"ABSx100 {r.abs_mean:.4f} (sd {r.abs_sd:.4f}), COV {r.cov_mean:.3f}; "
                               f"smoke ABSx100 {s.abs_mean:.4f}; {secs:.0f} s")

    def test_c11_table1_direction(self):
        t0 = time.perf_counter()
        rep = run_benchmark([ScenarioConfig(1, 1, replicates=20)], ["ph3h", "dm"], iterations=10_000, burn_in=2_000)
        secs = time.perf_counter() - t0
        ph, dm = rep.row("ph3h").abs_mean, rep.row("dm").abs_mean
        ok = ph < dm and secs < 600
        assert verdict(11, ok, f"ABSx100 PH3-h {ph:.4f} < DM {dm:.4f}, {secs:.0f} s")

    def test_c12_table3_shrinkage(self):
        t0 = time.perf_counter()
        cfg = ScenarioConfig(3, 3, replicates=10)
        assert cfg.q == 50
        rep = run_benchmark([cfg], ["ph2d", "ph2h"], iterations=10_000, burn_in=2_000)
        secs = time.perf_counter() - t0
        d, h = rep.row("ph2d").abs_mean, rep.row("ph2h").abs_mean
        ok = d < h and secs < 1200
        assert verdict(12, ok, f"ABSx100 PH2-d {d:.4f} < PH2-h {h:.4f} at q = 50, {secs:.0f} s")

    def test_c13_nb_regimes(self):
        t0 = time.perf_counter()
        small = nb_generate(FIG3_PRIORS["m0_b2"], 100_000, seed=0).zero_fraction
        large = nb_generate(FIG3_PRIORS["m3_b20"], 100_000, seed=0).zero_fraction
        secs = time.perf_counter() - t0
        ok = small - large >= 0.2 and secs < 10
        assert verdict(13, ok, f"zero fraction {small:.4f} vs {large:.4f} (diff {small - large:.4f}), {secs:.2f} s")
