"""Companion count models whose likelihoods are ratios of rising factorials.

Each posterior below reduces to a Pochhammer rational in the concentration
``alpha`` and is normalized by the same residue engine as the priors:

* negative binomial with a Beta link on the success probability,
* negative multinomial,
* generalized Dirichlet-multinomial stick-breaking utilities,
* the Ewens sampling formula for allelic partitions,
* Yule-Simon counts.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import PochhammerError
from .numeric import Precision, RandomStreams, rng_suite
from .pochhammer import HALF_HORSESHOE, PochhammerParams, ph_sample
from .residues import Block, RationalForm, ResidueExpansion, expand

__all__ = [
    "NBCoupledPrior",
    "NBSample",
    "AllelicPartition",
    "FIG3_PRIORS",
    "form_moment",
    "nb_posterior_form",
    "nb_marginal_posterior",
    "nb_pi_conditional",
    "nb_generate",
    "nm_marginal_log_likelihood",
    "nm_posterior",
    "gdm_stick_to_probs",
    "gdm_probs_to_stick",
    "gdm_reduction_sample",
    "gdm_halfhorseshoe_density_curves",
    "figure4_curves",
    "esf_log_prob",
    "esf_posterior_form",
    "esf_posterior",
    "enumerate_partitions",
    "cycle_type_count",
    "yule_simon_log_pmf",
    "yule_simon_posterior_form",
    "yule_simon_posterior",
]


def _prior_numerator(prior: PochhammerParams) -> tuple[Block, ...]:
    return (Block(1, 0, prior.m), Block(1, 0, prior.d, step=0))


def form_moment(form: RationalForm, k: int, precision: Precision | None = None) -> float:
    """``E[alpha^k]`` under the density proportional to ``form``."""
    if k < 0:
        raise ValueError("moment order must be non-negative")
    if k == 0:
        return 1.0
    base = expand(form, precision)
    tilted = expand(form.tilt(k), precision)
    return math.exp(tilted.log_norm_const - base.log_norm_const)


# ---------------------------------------------------------------------------
# negative binomial with a coupled Beta link
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NBCoupledPrior:
    """PH prior on ``alpha`` with ``pi | alpha ~ Beta(c alpha + a, b)``.

    Counts follow ``NB(alpha, pi)`` with pmf proportional to
    ``pi**alpha * (1 - pi)**n``, so the mean is ``alpha (1 - pi) / pi``.
    The shared ``(a, b, c)`` cancel the Beta normalizer against the PH
    denominator, which keeps the marginal posterior of ``alpha`` a
    Pochhammer rational.
    """

    prior: PochhammerParams = HALF_HORSESHOE

    def beta_params(self, alpha: float) -> tuple[float, float]:
        return float(self.prior.c) * alpha + float(self.prior.a), float(self.prior.b)


FIG3_PRIORS = {
    "m0_b2": NBCoupledPrior(PochhammerParams(0, 1, 2, 1)),
    "m1_b5": NBCoupledPrior(PochhammerParams(1, 1, 5, 1)),
    "m3_b20": NBCoupledPrior(PochhammerParams(3, 1, 20, 1)),
}


def _as_counts(counts) -> np.ndarray:
    arr = np.asarray(counts, dtype=np.int64).reshape(-1)
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative")
    return arr


def nb_posterior_form(counts, prior: NBCoupledPrior) -> RationalForm:
    """``[alpha]^m alpha^d prod_k [alpha]^{n_k} / [(c+K) alpha + a]^{N+b}``."""
    n = _as_counts(counts)
    p = prior.prior
    num = _prior_numerator(p) + tuple(Block(1, 0, int(v)) for v in n if v > 0)
    den = (Block(p.c + len(n), p.a, int(n.sum()) + p.b),)
    return RationalForm(num, den)


def nb_marginal_posterior(counts, prior: NBCoupledPrior, precision: Precision | None = None) -> ResidueExpansion:
    """Posterior of ``alpha`` after integrating out ``pi``.

    Examples
    --------
    >>> post = nb_marginal_posterior([0], NBCoupledPrior())
    >>> round(post.norm_const, 6)
    0.346574
    """
    return expand(nb_posterior_form(counts, prior), precision)


def nb_pi_conditional(alpha: float, counts, prior: NBCoupledPrior) -> tuple[float, float]:
    """Beta parameters of ``pi | alpha, n``: ``((c+K) alpha + a, N + b)``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    n = _as_counts(counts)
    p = prior.prior
    return (float(p.c) + len(n)) * alpha + float(p.a), float(n.sum() + p.b)


@dataclass(frozen=True)
class NBSample:
    """Draws from the NB model with a coupled prior."""

    counts: np.ndarray
    alpha: np.ndarray
    pi: np.ndarray

    @property
    def zero_fraction(self) -> float:
        return float(np.mean(self.counts == 0))

    @property
    def nonzero_mode(self) -> int | None:
        nz = self.counts[self.counts > 0]
        if nz.size == 0:
            return None
        vals, freq = np.unique(nz, return_counts=True)
        return int(vals[np.argmax(freq)])

    def histogram(self, max_count: int = 50) -> tuple[np.ndarray, np.ndarray]:
        """Relative frequencies of ``0..max_count``; the last bin collects the overflow."""
        clipped = np.minimum(self.counts, max_count)
        freq = np.bincount(clipped, minlength=max_count + 1) / self.counts.size
        return np.arange(max_count + 1), freq


# Poisson draws above this mean use a rounded normal approximation
_POISSON_LIMIT = 1e12


def nb_generate(prior: NBCoupledPrior, n_draws: int, seed=0) -> NBSample:
    """Sample ``alpha ~ PH``, ``pi | alpha ~ Beta``, then a Gamma-Poisson count."""
    if n_draws < 0:
        raise ValueError("n_draws must be non-negative")
    rng = rng_suite(seed, 3)
    alpha = ph_sample(prior.prior, n_draws, seed=rng.spawn(1)[0])
    a1 = float(prior.prior.c) * alpha + float(prior.prior.a)
    pi = rng.beta(a1, float(prior.prior.b)) if n_draws else np.empty(0)
    lam = rng.gamma(alpha, pi / (1.0 - pi)) if n_draws else np.empty(0)
    big = lam > _POISSON_LIMIT
    counts = rng.poisson(np.where(big, 0.0, lam)).astype(np.int64)
    if np.any(big):
        approx = np.rint(rng.normal(lam[big], np.sqrt(lam[big])))
        counts[big] = np.minimum(approx, np.iinfo(np.int64).max // 2).astype(np.int64)
    return NBSample(counts, alpha, pi)


# ---------------------------------------------------------------------------
# negative multinomial
# ---------------------------------------------------------------------------


def nm_marginal_log_likelihood(alpha, N: int, K: int):
    """``ln alpha - ln [alpha + N]^{K+1}`` up to an additive constant."""
    if N < 0 or K < 0:
        raise ValueError("N and K must be non-negative")
    x = np.asarray(alpha, dtype=float)
    if np.any(x <= 0):
        raise ValueError("alpha must be positive")
    out = np.log(x) - (gammaln(x + N + K + 1) - gammaln(x + N))
    return float(out) if np.ndim(alpha) == 0 else out


def nm_posterior(N: int, K: int, prior: PochhammerParams, precision: Precision | None = None) -> ResidueExpansion:
    """Posterior of ``alpha`` under a PH prior for the negative multinomial."""
    if N < 0 or K < 0:
        raise ValueError("N and K must be non-negative")
    num = _prior_numerator(prior) + (Block(1, 0, 1, step=0),)
    den = (Block(1, N, K + 1), Block(prior.c, prior.a, prior.b))
    return expand(RationalForm(num, den), precision)


# ---------------------------------------------------------------------------
# generalized Dirichlet stick-breaking
# ---------------------------------------------------------------------------


def gdm_stick_to_probs(Z) -> np.ndarray:
    """Map ``K-1`` sticks in (0, 1) to ``K`` probabilities; the last takes the remainder."""
    z = np.asarray(Z, dtype=float)
    if z.ndim != 1 or np.any((z <= 0) | (z >= 1)):
        raise ValueError("sticks must be a vector with entries in (0, 1)")
    remain = np.concatenate([[1.0], np.cumprod(1.0 - z)])
    return np.append(z * remain[:-1], remain[-1])


def gdm_probs_to_stick(pi) -> np.ndarray:
    """Inverse of :func:`gdm_stick_to_probs` for strictly positive probabilities."""
    p = np.asarray(pi, dtype=float)
    if p.ndim != 1 or p.size < 2 or np.any(p <= 0) or abs(p.sum() - 1) > 1e-10:
        raise ValueError("pi must be a probability vector with positive entries")
    # tails computed from the right avoid 1 - cumsum cancellation
    tails = np.cumsum(p[::-1])[::-1]
    return p[:-1] / tails[:-1]


def gdm_reduction_sample(alpha, n: int, seed=0) -> np.ndarray:
    """Stick-breaking draws with ``beta_k = alpha_{k+1} + ... + alpha_K``.

    Under this choice the generalized Dirichlet collapses to ``Dirichlet(alpha)``,
    so the returned ``n x K`` matrix can be compared with direct Dirichlet draws.
    """
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1 or a.size < 2 or np.any(a <= 0):
        raise ValueError("alpha must be a positive vector of length >= 2")
    beta = np.cumsum(a[::-1])[::-1][1:]
    rng = rng_suite(seed, 4)
    Z = rng.beta(a[:-1], beta, size=(n, a.size - 1))
    remain = np.concatenate([np.ones((n, 1)), np.cumprod(1.0 - Z, axis=1)], axis=1)
    return np.concatenate([Z * remain[:, :-1], remain[:, -1:]], axis=1)


def gdm_halfhorseshoe_density_curves(
    alpha_prior: float | PochhammerParams = HALF_HORSESHOE,
    beta: float | PochhammerParams = 1.0,
    n_draws: int = 1_000_000,
    bins: int = 100,
    seed=0,
) -> dict[str, np.ndarray]:
    """Histogram density of ``Z ~ Beta(alpha, beta)`` with ``alpha`` drawn from its prior.

    ``alpha_prior`` and ``beta`` are each either a fixed positive number or
    a PH prior. Returns bin ``edges``, ``centers`` and ``density``.
    """
    rng = seed if isinstance(seed, RandomStreams) else rng_suite(seed, 5)
    s_alpha, s_beta, s_z = rng.spawn(3)

    def draws(spec, stream, name):
        if isinstance(spec, PochhammerParams):
            return ph_sample(spec, n_draws, seed=stream)
        if not spec > 0:
            raise ValueError(f"{name} must be positive")
        return np.full(n_draws, float(spec))

    alpha = draws(alpha_prior, s_alpha, "alpha")
    beta_draws = draws(beta, s_beta, "beta")
    # Beta via log-gammas keeps tiny shapes from underflowing to 0/0
    lx = s_z.log_gamma(alpha)
    ly = s_z.log_gamma(beta_draws)
    z = np.exp(lx - np.logaddexp(lx, ly))
    edges = np.linspace(0.0, 1.0, bins + 1)
    density, _ = np.histogram(z, bins=edges, density=True)
    return {"edges": edges, "centers": 0.5 * (edges[1:] + edges[:-1]), "density": density}


def figure4_curves(n_draws: int = 1_000_000, bins: int = 100, seed=0) -> dict[str, dict[str, np.ndarray]]:
    """Marginal densities of a stick under a half-horseshoe ``alpha``.

    Curves use ``beta`` fixed at 0.5, 1 and 2, and a half-horseshoe ``beta``.
    """
    specs: dict[str, float | PochhammerParams] = {
        "beta0.5": 0.5,
        "beta1": 1.0,
        "beta2": 2.0,
        "beta_halfhorseshoe": HALF_HORSESHOE,
    }
    return {
        name: gdm_halfhorseshoe_density_curves(HALF_HORSESHOE, b, n_draws, bins, seed=rng_suite(seed, 6, i))
        for i, (name, b) in enumerate(specs.items())
    }


# ---------------------------------------------------------------------------
# Ewens sampling formula
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AllelicPartition:
    """Counts ``m_j`` of alleles seen exactly ``j`` times, ``j = 1..n``."""

    multiplicities: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(v) for v in self.multiplicities)
        if any(v < 0 for v in m):
            raise PochhammerError("partition multiplicities must be non-negative")
        while m and m[-1] == 0:
            m = m[:-1]
        if not m:
            raise PochhammerError("partition must contain at least one gene")
        object.__setattr__(self, "multiplicities", m)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int]]) -> "AllelicPartition":
        """Build from ``(j, m_j)`` pairs."""
        top = max((j for j, _ in pairs), default=0)
        m = [0] * top
        for j, mj in pairs:
            if j < 1:
                raise PochhammerError("allele sizes start at 1")
            m[j - 1] += int(mj)
        return cls(tuple(m))

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "AllelicPartition":
        """Build from the list of allele sizes, e.g. ``(2, 1, 1)``."""
        c = Counter(int(s) for s in sizes)
        return cls.from_pairs(sorted(c.items()))

    @property
    def n(self) -> int:
        return sum((j + 1) * v for j, v in enumerate(self.multiplicities))

    @property
    def n_alleles(self) -> int:
        return sum(self.multiplicities)

    def pairs(self) -> list[tuple[int, int]]:
        return [(j + 1, v) for j, v in enumerate(self.multiplicities) if v]


def enumerate_partitions(n: int) -> Iterator[AllelicPartition]:
    """All integer partitions of ``n`` as allelic partitions."""
    if n < 1:
        raise ValueError("n must be positive")

    def parts(rest: int, largest: int):
        if rest == 0:
            yield ()
            return
        for first in range(min(rest, largest), 0, -1):
            for tail in parts(rest - first, first):
                yield (first,) + tail

    for p in parts(n, n):
        yield AllelicPartition.from_sizes(p)


def cycle_type_count(partition: AllelicPartition) -> int:
    """Number of permutations of ``n`` with this cycle type, ``n! / prod j^m_j m_j!``."""
    den = 1
    for j, mj in partition.pairs():
        den *= j**mj * math.factorial(mj)
    return math.factorial(partition.n) // den


def esf_log_prob(partition: AllelicPartition, alpha: float) -> float:
    """Log-probability of an allelic partition under the Ewens sampling formula."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    n = partition.n
    out = math.lgamma(n + 1) - (math.lgamma(alpha + n) - math.lgamma(alpha))
    la = math.log(alpha)
    for j, mj in partition.pairs():
        out += mj * la - mj * math.log(j) - math.lgamma(mj + 1)
    return out


def esf_posterior_form(partition: AllelicPartition, prior: PochhammerParams) -> RationalForm:
    """``alpha^{sum m_j} [alpha]^m / ([alpha]^n [c alpha + a]^b)`` in reduced form.

    For prior ``m < n`` the common factors cancel to ``1 / [alpha + m]^{n - m}``.
    """
    n, k = partition.n, partition.n_alleles
    tilt = Block(1, 0, k + prior.d, step=0)
    if prior.m < n:
        return RationalForm((tilt,), (Block(1, prior.m, n - prior.m), Block(prior.c, prior.a, prior.b)))
    num = (Block(1, n, prior.m - n), tilt)
    return RationalForm(num, (Block(prior.c, prior.a, prior.b),))


def esf_posterior(
    partition: AllelicPartition, prior: PochhammerParams, precision: Precision | None = None
) -> ResidueExpansion:
    """Posterior of ``alpha`` given an allelic partition."""
    return expand(esf_posterior_form(partition, prior), precision)


# ---------------------------------------------------------------------------
# Yule-Simon
# ---------------------------------------------------------------------------


def yule_simon_log_pmf(n, alpha):
    """``ln(alpha B(n, alpha + 1))`` for ``n >= 1``."""
    n_arr = np.asarray(n)
    x = np.asarray(alpha, dtype=float)
    if np.any(n_arr < 1):
        raise ValueError("Yule-Simon counts start at 1")
    if np.any(x <= 0):
        raise ValueError("alpha must be positive")
    n_f = n_arr.astype(float)
    out = np.log(x) + gammaln(n_f) + gammaln(x + 1) - gammaln(n_f + x + 1)
    return float(out) if out.ndim == 0 else out


def yule_simon_posterior_form(counts, prior: PochhammerParams) -> RationalForm:
    """``alpha^K [alpha]^m / ([c alpha + a]^b prod_k [alpha + 1]^{n_k})``."""
    n = np.asarray(counts, dtype=np.int64).reshape(-1)
    if n.size == 0 or np.any(n < 1):
        raise ValueError("Yule-Simon counts must be a non-empty vector of integers >= 1")
    num = _prior_numerator(prior) + (Block(1, 0, int(n.size), step=0),)
    den = (Block(prior.c, prior.a, prior.b),) + tuple(Block(1, 1, int(v)) for v in n)
    return RationalForm(num, den)


def yule_simon_posterior(counts, prior: PochhammerParams, precision: Precision | None = None) -> ResidueExpansion:
    """Posterior of ``alpha`` given Yule-Simon counts.

    Repeated counts stack poles at the negative integers. Poles above order
    two are normalized by quadrature and flagged with ``numeric_fallback``.
    """
    return expand(yule_simon_posterior_form(counts, prior), precision)
