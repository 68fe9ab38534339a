"""Dirichlet-multinomial inference with Pochhammer priors on the concentration.

Homogeneous models share one concentration ``alpha`` across categories and
have closed-form posteriors for a single document. Heterogeneous models
give each category its own ``alpha_k`` and are sampled with
Metropolis-within-Gibbs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import IntegrabilityError, PoleCollisionError, SizeBudgetError
from .numeric import Precision, SignedLogReal, default_precision, log_rising, mp_context, rng_suite, to_mpf
from .pochhammer import PochhammerParams, pph_residues
from .residues import (
    ROOT_RTOL,
    Block,
    RationalForm,
    ResidueExpansion,
    ResidueTerm,
    as_scalar,
    expand,
    run_policy,
)

__all__ = [
    "Corpus",
    "HomogeneousPosterior",
    "PosteriorChain",
    "ChainSummary",
    "marginal_log_likelihood",
    "homog_posterior",
    "homog_posterior_double_root",
    "homog_posterior_mean_pi",
    "homog_posterior_mean_alpha",
    "heter_conditional_log_density",
    "heter_conditional_expansion",
    "heter_conditional_mean_pi",
    "mwg_sample",
    "homog_mh_sample",
    "chain_summaries",
    "effective_sample_size",
]


@dataclass(frozen=True)
class Corpus:
    """Non-negative count matrix with one row per document."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("counts must be a non-empty S x K matrix")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr != np.round(arr)):
            raise ValueError("counts must be non-negative integers")
        arr = arr.astype(np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def S(self) -> int:
        return self.counts.shape[0]

    @property
    def K(self) -> int:
        return self.counts.shape[1]

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def single(self) -> np.ndarray:
        if self.S != 1:
            raise ValueError("this operation needs a single-document corpus")
        return self.counts[0]

    def __hash__(self):
        return hash(self.counts.tobytes()) ^ hash(self.counts.shape)

    def __eq__(self, other):
        return isinstance(other, Corpus) and np.array_equal(self.counts, other.counts)


def _as_corpus(x) -> Corpus:
    return x if isinstance(x, Corpus) else Corpus(np.asarray(x))


def marginal_log_likelihood(corpus, alpha: Sequence[float]) -> float:
    """``sum_s [ -log [A]^{N_s} + sum_k log [alpha_k]^{n_sk} ]`` with ``A = sum(alpha)``.

    Multinomial coefficients are omitted because they do not depend on alpha.
    """
    corpus = _as_corpus(corpus)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (corpus.K,):
        raise ValueError("alpha must have one entry per category")
    if np.any(alpha <= 0):
        raise ValueError("alpha must be strictly positive")
    A = alpha.sum()
    val = -np.sum(log_rising(A, corpus.row_totals))
    val += np.sum(log_rising(np.broadcast_to(alpha, corpus.counts.shape), corpus.counts))
    return float(val)


# ---------------------------------------------------------------------------
# homogeneous single-document posteriors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HomogeneousPosterior:
    """Closed-form posterior of a shared concentration given one document.

    Attributes
    ----------
    expansion : ResidueExpansion
        Residues over the poles ``-(i-1)/K`` and ``-(a+j-1)/c``.
    log_C_n : float
        Log normalizer of ``prod_k [alpha]^{n_k} [alpha]^m / ([K alpha]^N [c alpha + a]^b)``.
    params : PochhammerParams
        The prior.
    counts : Corpus
        Single-document data.
    method : str
        ``"theorem"``, ``"double_root"`` or ``"generic"``.
    """

    expansion: ResidueExpansion
    log_C_n: float
    params: PochhammerParams
    counts: Corpus
    method: str = "theorem"

    def logpdf(self, alpha):
        return self.expansion.logpdf(alpha)

    def pdf(self, alpha):
        return self.expansion.pdf(alpha)

    def cdf(self, alpha):
        return self.expansion.cdf(alpha)

    def rvs(self, n: int, seed=0):
        return self.expansion.rvs(n, seed)


def _posterior_form(n: np.ndarray, prior: PochhammerParams, extra_tilt: int = 0) -> RationalForm:
    K = len(n)
    N = int(n.sum())
    num = [Block(1, 0, int(v)) for v in n if v > 0]
    num.append(Block(1, 0, prior.m))
    num.append(Block(1, 0, prior.d + extra_tilt, step=0))
    den = (Block(K, 0, N), Block(prior.c, prior.a, prior.b))
    return RationalForm(tuple(num), den)


def _numerator_runs(n: np.ndarray, prior: PochhammerParams) -> list[int]:
    """Lengths of the numerator rising factorials, the prior's m acting as one more count."""
    runs = [int(v) for v in n if v > 0]
    if prior.m > 0:
        runs.append(prior.m)
    return runs


def _check_zero_pole(n: np.ndarray, prior: PochhammerParams, tilt: int):
    N = int(n.sum())
    if N >= 1 and not (np.any(n > 0) or prior.m > 0 or prior.d + tilt > 0):
        raise IntegrabilityError("pole at zero does not cancel")


def _collisions(K: int, N: int, prior: PochhammerParams) -> list[tuple[int, int]]:
    """Index pairs (i, j) with (i-1)/K == (a+j-1)/c, i = 2..N, j = 1..b."""
    a, c = prior.a, prior.c
    out = []
    if isinstance(a, Fraction) and isinstance(c, Fraction):
        for j in range(1, prior.b + 1):
            x = (a + j - 1) * K / c + 1
            if x.denominator == 1 and 2 <= x.numerator <= N:
                out.append((int(x.numerator), j))
    else:
        for j in range(1, prior.b + 1):
            x = (float(a) + j - 1) * K / float(c) + 1
            r = round(x)
            if 2 <= r <= N and abs(x - r) <= ROOT_RTOL * max(1.0, x):
                out.append((int(r), j))
    return out


def _theorem_terms_double(n, prior: PochhammerParams, tilt: int):
    """Residues of the homogeneous posterior over disjoint pole families."""
    from scipy.special import gammaln

    K = len(n)
    N = int(n.sum())
    b = prior.b
    a, c = float(prior.a), float(prior.c)
    d = prior.d + tilt
    runs = _numerator_runs(n, prior)
    deg_num = sum(runs) + d
    lK, lc = math.log(K), math.log(c)
    terms, norm_terms, res_terms = [], [], []

    def logabs_sign(values):
        values = np.asarray(values, dtype=float)
        if np.any(values == 0):
            return None, 0
        return float(np.sum(np.log(np.abs(values)))), int(np.count_nonzero(values < 0))

    for i in range(2, N + 1):
        num_vals = [1 + (s - 1) * K - i for r in runs for s in range(1, r + 1)] + [1 - i] * d
        ln, neg = logabs_sign(num_vals)
        if ln is None:
            continue
        t = np.arange(1, b + 1)
        lp, negp = logabs_sign(K * a + K * (t - 1) - c * (i - 1))
        lfac = gammaln(i) + gammaln(N - i + 1)
        logmag = ln - (deg_num - b) * lK - lfac - lp
        sign = -1 if (neg + negp + (i - 1)) % 2 else 1
        g = SignedLogReal(sign, logmag)
        terms.append(ResidueTerm(Fraction(K), Fraction(i - 1), 1, g))
        res_terms.append(SignedLogReal(sign, logmag - lK))
        lo = math.log((i - 1) / K)
        if lo != 0:
            norm_terms.append(SignedLogReal(-sign * (1 if lo > 0 else -1), logmag - lK + math.log(abs(lo))))
    for j in range(1, b + 1):
        num_vals = [1 + (s - 1) * c - a - j for r in runs for s in range(1, r + 1)] + [1 - a - j] * d
        ln, neg = logabs_sign(num_vals)
        if ln is None:
            continue
        s_idx = np.arange(1, N + 1)
        lp, negp = logabs_sign(K + c * (s_idx - 1) - K * (a + j))
        lfac = gammaln(j) + gammaln(b - j + 1)
        logmag = ln - (deg_num - N) * lc - lp - lfac
        sign = -1 if (neg + negp + (j - 1)) % 2 else 1
        g = SignedLogReal(sign, logmag)
        terms.append(ResidueTerm(prior.c, prior.a + j - 1, 1, g))
        res_terms.append(SignedLogReal(sign, logmag - lc))
        lo = math.log((a + j - 1) / c)
        if lo != 0:
            norm_terms.append(SignedLogReal(-sign * (1 if lo > 0 else -1), logmag - lc + math.log(abs(lo))))
    return terms, norm_terms, res_terms


def _theorem_terms_extended(n, prior: PochhammerParams, tilt: int, bits: int):
    ctx = mp_context(bits)
    K = len(n)
    N = int(n.sum())
    b = prior.b
    a, c = to_mpf(ctx, prior.a), to_mpf(ctx, prior.c)
    d = prior.d + tilt
    runs = _numerator_runs(n, prior)
    deg_num = sum(runs) + d
    Km = ctx.mpf(K)
    fact = [ctx.one]
    for k in range(1, max(N, b) + 1):
        fact.append(fact[-1] * k)
    terms, norm_terms, res_terms = [], [], []
    for i in range(2, N + 1):
        num = ctx.fprod(1 + (s - 1) * K - i for r in runs for s in range(1, r + 1)) * ctx.mpf(1 - i) ** d
        if num == 0:
            continue
        den = Km ** (deg_num - b) * fact[i - 1] * fact[N - i]
        den *= ctx.fprod(K * a + K * (t - 1) - c * (i - 1) for t in range(1, b + 1))
        g = num / den if (i - 1) % 2 == 0 else -num / den
        terms.append(ResidueTerm(Fraction(K), Fraction(i - 1), 1, SignedLogReal.from_mpf(ctx, g)))
        res_terms.append(SignedLogReal.from_mpf(ctx, g / Km))
        norm_terms.append(SignedLogReal.from_mpf(ctx, -(g / Km) * ctx.log(ctx.mpf(i - 1) / Km)))
    for j in range(1, b + 1):
        num = ctx.fprod(1 + (s - 1) * c - a - j for r in runs for s in range(1, r + 1)) * (1 - a - j) ** d
        if num == 0:
            continue
        den = c ** (deg_num - N) * fact[j - 1] * fact[b - j]
        den *= ctx.fprod(K + c * (s - 1) - K * (a + j) for s in range(1, N + 1))
        g = num / den if (j - 1) % 2 == 0 else -num / den
        terms.append(ResidueTerm(prior.c, prior.a + j - 1, 1, SignedLogReal.from_mpf(ctx, g)))
        res_terms.append(SignedLogReal.from_mpf(ctx, g / c))
        norm_terms.append(SignedLogReal.from_mpf(ctx, -(g / c) * ctx.log((a + j - 1) / c)))
    return terms, norm_terms, res_terms


def homog_posterior(
    corpus,
    prior: PochhammerParams,
    method: str = "auto",
    precision: Precision | None = None,
    _tilt: int = 0,
) -> HomogeneousPosterior:
    """Posterior of a shared concentration ``alpha`` for a single document.

    The unnormalized posterior is
    ``prod_k [alpha]^{n_k} [alpha]^m / ([K alpha]^N [c alpha + a]^b)``. Its
    residues at ``-(i-1)/K`` (coefficients ``gamma_i*``) and
    ``-(a+j-1)/c`` (``beta_j*``) are evaluated in closed form and the
    normalizer is

    ``C_n = -sum_i (gamma_i*/K) log((i-1)/K) - sum_j (beta_j*/c) log((a+j-1)/c)``.

    Parameters
    ----------
    corpus : Corpus or array
        Counts of a single document.
    prior : PochhammerParams
        PH prior on alpha.
    method : {"auto", "theorem", "generic"}
        ``"theorem"`` uses the closed-form residues and needs disjoint pole
        families; ``"generic"`` runs the cancellation-aware residue engine;
        ``"auto"`` picks the former when possible.

    Raises
    ------
    PoleCollisionError
        If the two pole families meet and leave a double pole.
    """
    corpus = _as_corpus(corpus)
    n = corpus.single()
    K, N = corpus.K, int(n.sum())
    _check_zero_pole(n, prior, _tilt)
    form = _posterior_form(n, prior, _tilt)
    precision = precision or default_precision()
    hits = _collisions(K, N, prior)
    if method == "theorem" and hits:
        raise PoleCollisionError(f"pole families collide at (i, j) = {hits[:3]}")
    if method not in ("auto", "theorem", "generic"):
        raise ValueError(f"unknown method {method!r}")
    if method == "generic" or hits:
        exp = expand(form, precision)
        if exp.max_order >= 2:
            if prior.a == 0 and prior.c == K:
                hint = "use homog_posterior_double_root"
            else:
                hint = "perturb a or c, or use homog_posterior_double_root for a = 0, c = K"
            raise PoleCollisionError(f"double pole after cancellation; {hint}")
        return HomogeneousPosterior(exp, exp.log_norm_const, prior, corpus, "generic")

    def compute(prec: Precision):
        if prec.is_extended:
            return _theorem_terms_extended(n, prior, _tilt, prec.bits)
        return _theorem_terms_double(n, prior, _tilt)

    exp = run_policy(form, compute, 1, precision)
    return HomogeneousPosterior(exp, exp.log_norm_const, prior, corpus, "theorem")


def _double_root_parts(n, prior: PochhammerParams, tilt: int, bits: int | None):
    """Residues when the prior poles ``-(j-1)/K`` coincide with the likelihood poles."""
    K = len(n)
    N = int(n.sum())
    b = prior.b
    d = prior.d + tilt
    lo, hi = min(N, b), max(N, b)
    runs = _numerator_runs(n, prior)
    ctx = mp_context(bits) if bits else None

    def num(x):
        return ctx.mpf(x) if ctx else float(x)

    def log_(x):
        return ctx.log(x) if ctx else math.log(x)

    Km = num(K)
    terms, norm_terms, res_terms = [], [], []
    for i in range(2, hi + 1):
        order = 2 if i <= lo else 1
        # numerator factors in u = K alpha at u = 1 - i, each carries 1/K
        zs = [1 + (s - 1) * K - i for r in runs for s in range(1, r + 1)] + [1 - i] * d
        nonzero = [z for z in zs if z != 0]
        n_zero = len(zs) - len(nonzero)
        eff = order - n_zero
        if eff <= 0:
            continue
        # denominator factors (u + s - 1) other than those vanishing at u = 1 - i
        others = [(s - i, 2 if s <= lo else 1) for s in range(1, hi + 1) if s != i]
        val = num(1)
        for z in nonzero:
            val *= num(z)
        for x, mult in others:
            val /= num(x) ** mult
        # each numerator factor is (u + K(s-1))/K; cancelled ones contribute 1/K
        val /= Km ** len(zs)
        # value of f * (u + i - 1)^eff expressed per linear factor in alpha with scale K
        if eff == 2:
            beta = val
            deriv = sum(num(1) / num(z) for z in nonzero) - sum(num(mult) / num(x) for x, mult in others)
            gamma = beta * deriv
        else:
            beta = None
            gamma = val
        # coefficients in the (K alpha + i - 1) basis: f = beta/(u+i-1)^2 + gamma/(u+i-1)
        if beta is not None and beta != 0:
            terms.append(ResidueTerm(Fraction(K), Fraction(i - 1), 2, _slr(ctx, beta)))
            norm_terms.append(_slr(ctx, beta / (Km * num(i - 1))))
        if gamma != 0:
            terms.append(ResidueTerm(Fraction(K), Fraction(i - 1), 1, _slr(ctx, gamma)))
            res_terms.append(_slr(ctx, gamma / Km))
            norm_terms.append(_slr(ctx, -(gamma / Km) * log_(num(i - 1) / Km)))
    return terms, norm_terms, res_terms


def _slr(ctx, x) -> SignedLogReal:
    return SignedLogReal.from_mpf(ctx, x) if ctx else SignedLogReal.from_real(x)


def homog_posterior_double_root(
    corpus,
    prior: PochhammerParams,
    precision: Precision | None = None,
    _tilt: int = 0,
) -> HomogeneousPosterior:
    """Homogeneous posterior for the colliding prior ``PH(m, a=0, b, c=K)``.

    The poles ``-(i-1)/K`` are double for ``i <= min(N, b)``. With
    ``beta_i*`` the order-two coefficient and ``gamma_i*`` the order-one
    coefficient in the basis ``(K alpha + i - 1)``,

    ``gamma_i* = beta_i* [ sum_num 1/(1 + K(s-1) - i) - sum_{s != i} mult_s/(s - i) ]``

    and ``C_N = -sum (gamma_i*/K) log((i-1)/K) + sum beta_i*/(K(i-1))``. A
    numerator zero at a double pole lowers it to a simple pole, whose
    coefficient is the remaining product alone. The residues at zero always
    vanish.
    """
    corpus = _as_corpus(corpus)
    n = corpus.single()
    K = corpus.K
    if not (prior.a == 0 and prior.c == K):
        raise ValueError("double-root posterior needs a prior with a = 0 and c = K")
    zero_mult = int(np.count_nonzero(n > 0)) + (prior.m > 0) + prior.d + _tilt
    den_zero = (int(n.sum()) > 0) + (prior.b > 0)
    if zero_mult < den_zero:
        raise IntegrabilityError("pole at zero does not cancel")
    form = _posterior_form(n, prior, _tilt)
    precision = precision or default_precision()

    def compute(prec: Precision):
        return _double_root_parts(n, prior, _tilt, prec.bits if prec.is_extended else None)

    exp = run_policy(form, compute, 2, precision)
    return HomogeneousPosterior(exp, exp.log_norm_const, prior, corpus, "double_root")


def _rebuild(post: HomogeneousPosterior, counts: np.ndarray, tilt: int = 0) -> HomogeneousPosterior:
    corpus = Corpus(counts[None, :])
    prec = post.expansion.precision_used if not post.expansion.numeric_fallback else None
    if post.method == "double_root":
        return homog_posterior_double_root(corpus, post.params, prec, _tilt=tilt)
    method = "generic" if post.method == "generic" else "auto"
    return homog_posterior(corpus, post.params, method, prec, _tilt=tilt)


def homog_posterior_mean_pi(post: HomogeneousPosterior, k: int) -> float:
    """``E(pi_k | n) = C_{n + e_k} / C_n``."""
    n = post.counts.single()
    if not 0 <= k < len(n):
        raise IndexError("category index out of range")
    if len(n) == 1:
        return 1.0
    bumped = n.copy()
    bumped[k] += 1
    other = _rebuild(post, bumped)
    return math.exp(other.log_C_n - post.log_C_n)


def homog_posterior_mean_alpha(post: HomogeneousPosterior) -> float:
    """``E(alpha | n)`` as the ratio of the alpha-tilted and plain normalizers.

    Raises
    ------
    MomentError
        If ``b < m + 3``, where the posterior mean does not exist.
    """
    from .errors import MomentError

    p = post.params
    if p.b < p.m + p.d + 3:
        raise MomentError(f"E(alpha | n) does not exist for {p}: needs b >= m + 3")
    tilted = _rebuild(post, post.counts.single(), tilt=1)
    return math.exp(tilted.log_C_n - post.log_C_n)


# ---------------------------------------------------------------------------
# heterogeneous conditionals
# ---------------------------------------------------------------------------


def heter_conditional_log_density(alpha_k, n_k: int, N: int, A_minus_k: float, prior: PochhammerParams):
    """Unnormalized log conditional of ``alpha_k`` given the other concentrations.

    ``-log [alpha_k + A_{-k}]^N + log [alpha_k]^{n_k} + log [alpha_k]^m - log [c alpha_k + a]^b``
    plus ``d log alpha_k`` for tilted priors.
    """
    if A_minus_k <= 0:
        raise ValueError("A_minus_k must be positive")
    if n_k < 0 or N < n_k:
        raise ValueError("need 0 <= n_k <= N")
    x = np.asarray(alpha_k, dtype=float)
    if np.any(x <= 0):
        raise ValueError("alpha_k must be positive")
    val = (
        -log_rising(x + A_minus_k, N)
        + log_rising(x, n_k)
        + log_rising(x, prior.m)
        - log_rising(float(prior.c) * x + float(prior.a), prior.b)
    )
    if prior.d:
        val = val + prior.d * np.log(x)
    return val


def _conditional_form(n_k, N, A_minus_k, prior: PochhammerParams) -> RationalForm:
    return RationalForm(
        (Block(1, 0, n_k), Block(1, 0, prior.m), Block(1, 0, prior.d, step=0)),
        (Block(1, A_minus_k, N), Block(prior.c, prior.a, prior.b)),
    )


def heter_conditional_expansion(
    n_k: int,
    N: int,
    A_minus_k,
    prior: PochhammerParams,
    precision: Precision | None = None,
    size_budget: int = 400,
) -> ResidueExpansion:
    """Residue expansion of the conditional of ``alpha_k``.

    Poles sit at ``-(A_{-k} + j - 1)``, ``j = 1..N`` (coefficients ``gamma_j*``)
    and ``-(a + j - 1)/c``, ``j = 1..b`` (coefficients ``beta_j*``).

    Raises
    ------
    PoleCollisionError
        If the two pole families share a location.
    SizeBudgetError
        If ``N + b`` exceeds ``size_budget``; callers then normalize
        :func:`heter_conditional_log_density` by quadrature.
    """
    if A_minus_k <= 0:
        raise ValueError("A_minus_k must be positive")
    if n_k < 0 or N < n_k:
        raise ValueError("need 0 <= n_k <= N")
    if N + prior.b > size_budget:
        raise SizeBudgetError(f"N + b = {N + prior.b} exceeds the size budget {size_budget}")
    A = as_scalar(A_minus_k)
    for j in range(1, N + 1):
        pa = A + j - 1
        for t in range(1, prior.b + 1):
            pb = (prior.a + t - 1) / prior.c
            if isinstance(pa, Fraction) and isinstance(pb, Fraction):
                hit = pa == pb
            else:
                hit = abs(float(pa) - float(pb)) <= ROOT_RTOL * max(1.0, abs(float(pa)))
            if hit:
                raise PoleCollisionError(f"pole families collide at alpha = {-float(pa):.6g}")
    return expand(_conditional_form(n_k, N, A, prior), precision, allow_fallback=True)


def heter_conditional_mean_pi(n_k: int, N: int, A_minus_k, prior: PochhammerParams, precision=None) -> float:
    """Conditional mean of ``pi_k``: ``C_{n_k+1, N+1} / C_{n_k, N}``."""
    top = heter_conditional_expansion(n_k + 1, N + 1, A_minus_k, prior, precision)
    base = heter_conditional_expansion(n_k, N, A_minus_k, prior, precision)
    return math.exp(top.log_norm_const - base.log_norm_const)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PosteriorChain:
    """Retained MCMC draws of the concentration vector.

    ``draws`` has one row per retained iteration and one column per
    category; for homogeneous chains all columns are equal.
    """

    draws: np.ndarray
    accepted: np.ndarray
    seed: int
    stepsize: float
    burn_in: int
    iterations: int
    thin: int = 1
    final_stepsizes: np.ndarray | None = None
    homogeneous: bool = False

    @property
    def retained_iterations(self) -> int:
        return self.iterations - self.burn_in

    @property
    def acceptance_rate(self) -> np.ndarray:
        kept = self.retained_iterations
        if kept <= 0:
            return np.full(self.accepted.shape, np.nan)
        return self.accepted / kept


def _csr_by_category(counts: np.ndarray):
    K = counts.shape[1]
    indptr = np.zeros(K + 1, dtype=np.int64)
    values = []
    for k in range(K):
        col = counts[:, k]
        nz = col[col > 0]
        values.extend(nz.tolist())
        indptr[k + 1] = indptr[k] + len(nz)
    return indptr, np.asarray(values, dtype=np.int64)


def _unique_totals(totals: np.ndarray):
    uniq, mult = np.unique(totals[totals > 0], return_counts=True)
    return uniq.astype(np.int64), mult.astype(np.float64)


def _prior_args(prior: PochhammerParams):
    return prior.m, float(prior.a), prior.b, float(prior.c), prior.d


def _chunk_rows(iterations: int, burn_in: int, thin: int):
    rows = np.full(iterations, -1, dtype=np.int64)
    kept = np.arange(burn_in, iterations)
    kept = kept[(kept - burn_in) % thin == 0]
    rows[kept] = np.arange(len(kept))
    return rows, len(kept)


def _adapt(sigma: np.ndarray, rate: np.ndarray, lo=0.30, hi=0.45):
    sigma = np.where(rate < lo, sigma * np.exp(rate - lo - 0.1), sigma)
    sigma = np.where(rate > hi, sigma * np.exp(rate - hi + 0.1), sigma)
    return np.clip(sigma, 1e-3, 50.0)


def mwg_sample(
    corpus,
    prior: PochhammerParams,
    T: int = 10_000,
    sigma: float = 0.5,
    burn_in: int = 2_000,
    seed: int = 0,
    adapt: bool = False,
    thin: int = 1,
    init: np.ndarray | None = None,
) -> PosteriorChain:
    """Metropolis-within-Gibbs for heterogeneous concentrations.

    Every sweep updates each ``alpha_k`` with the proposal
    ``alpha_k' = alpha_k exp(eps)``, ``eps ~ N(0, sigma^2)``, and accepts when
    ``log u`` is below the log posterior ratio plus ``log alpha_k' - log alpha_k``
    (the proposal's Jacobian). The likelihood is the product of
    Dirichlet-multinomial marginals over documents.

    Parameters
    ----------
    corpus : Corpus
        Count matrix.
    prior : PochhammerParams
        PH prior applied independently to each ``alpha_k``.
    T, burn_in, thin : int
        Total sweeps, discarded sweeps, and retention interval.
    sigma : float
        Proposal standard deviation on the log scale.
    seed : int
        Seed of the random stream.
    adapt : bool
        Tune per-coordinate stepsizes during burn-in towards 30-45% acceptance.
    init : array, optional
        Starting point; defaults to i.i.d. log-normal(0, 1) draws.
    """
    corpus = _as_corpus(corpus)
    if T < 1 or burn_in < 0 or burn_in > T or thin < 1:
        raise ValueError("need T >= 1, 0 <= burn_in <= T and thin >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    K = corpus.K
    rng = rng_suite(seed)
    indptr, values = _csr_by_category(corpus.counts)
    uniq_n, mult_n = _unique_totals(corpus.row_totals)
    pargs = _prior_args(prior)
    alpha = np.exp(rng.normal(0.0, 1.0, K)) if init is None else np.array(init, dtype=float)
    log_alpha = np.log(alpha)
    data_ll = np.array([_kernels.data_term(alpha[k], indptr, values, k) for k in range(K)])
    prior_ll = np.array([_kernels.prior_log(alpha[k], *pargs) for k in range(K)])
    sig = np.full(K, float(sigma))
    rows, n_keep = _chunk_rows(T, burn_in, thin)
    out = np.empty((n_keep, K))
    accepted = np.zeros(K, dtype=np.int64)
    window = np.zeros(K, dtype=np.int64)
    chunk = max(1, min(T, 1_000_000 // K))
    t = 0
    while t < T:
        if adapt and t < burn_in:
            step = min(50, burn_in - t)
        elif t < burn_in:
            step = min(chunk, burn_in - t)
        else:
            step = min(chunk, T - t)
        normals = rng.normal(0.0, 1.0, (step, K))
        log_u = np.log(rng.uniform((step, K)))
        counting = t >= burn_in
        window[:] = 0
        _kernels.mwg_sweeps(
            alpha, log_alpha, data_ll, prior_ll, indptr, values, uniq_n, mult_n,
            *pargs, sig, normals, log_u, rows[t:t + step], out,
            accepted if counting else window, True,
        )
        if adapt and not counting:
            sig = _adapt(sig, window / step)
        t += step
    return PosteriorChain(out, accepted, seed, float(sigma), burn_in, T, thin, sig.copy(), False)


def homog_mh_sample(
    corpus,
    prior: PochhammerParams,
    T: int = 10_000,
    sigma: float = 0.5,
    burn_in: int = 2_000,
    seed: int = 0,
    adapt: bool = True,
    thin: int = 1,
) -> PosteriorChain:
    """Random-walk MH on ``log alpha`` for a concentration shared by all categories.

    The target is ``prod_s prod_k [alpha]^{n_sk} / [K alpha]^{N_s}`` times the
    prior. The returned draws are broadcast to one column per category.
    """
    corpus = _as_corpus(corpus)
    if T < 1 or burn_in < 0 or burn_in > T or thin < 1:
        raise ValueError("need T >= 1, 0 <= burn_in <= T and thin >= 1")
    K = corpus.K
    rng = rng_suite(seed)
    vals, mult = np.unique(corpus.counts[corpus.counts > 0], return_counts=True)
    uniq_n, mult_n = _unique_totals(corpus.row_totals)
    pargs = _prior_args(prior)
    state = np.exp(rng.normal(0.0, 1.0, 1))
    rows, n_keep = _chunk_rows(T, burn_in, thin)
    out = np.empty(n_keep)
    accepted = np.zeros(1, dtype=np.int64)
    window = np.zeros(1, dtype=np.int64)
    sig = float(sigma)
    t = 0
    while t < T:
        step = min(50, burn_in - t) if (adapt and t < burn_in) else (burn_in - t if t < burn_in else T - t)
        counting = t >= burn_in
        window[:] = 0
        _kernels.homog_steps(
            state, K, vals.astype(np.int64), mult.astype(np.float64), uniq_n, mult_n, *pargs, sig,
            rng.normal(0.0, 1.0, step), np.log(rng.uniform(step)), rows[t:t + step], out,
            accepted if counting else window, True,
        )
        if adapt and not counting:
            sig = float(_adapt(np.array([sig]), window / step)[0])
        t += step
    draws = np.broadcast_to(out[:, None], (n_keep, K))
    return PosteriorChain(draws, np.repeat(accepted, K), seed, float(sigma), burn_in, T, thin,
                          np.full(K, sig), True)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------


def effective_sample_size(x: np.ndarray) -> float:
    """Geyer initial-positive-sequence ESS of a one-dimensional chain."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4:
        return float(n)
    xc = x - x.mean()
    var = np.dot(xc, xc) / n
    if var == 0:
        return float(n)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n] / n
    rho = acov / acov[0]
    # pair sums Gamma_t = rho_{2t} + rho_{2t+1}; stop at the first non-positive
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    stop = np.argmax(pairs <= 0) if np.any(pairs <= 0) else len(pairs)
    pairs = np.minimum.accumulate(pairs[:stop])
    tau = -1.0 + 2.0 * pairs.sum()
    return float(n / max(tau, 1.0 / np.log10(max(n, 10))))


@dataclass(frozen=True)
class ChainSummary:
    """Posterior summaries of ``alpha_k`` and of ``pi_{sk}`` for each document."""

    alpha_mean: np.ndarray
    alpha_q025: np.ndarray
    alpha_q975: np.ndarray
    alpha_ess: np.ndarray
    alpha_mcse: np.ndarray
    pi_mean: np.ndarray
    pi_q025: np.ndarray
    pi_q975: np.ndarray
    acceptance_rate: np.ndarray
    pi_draws: str = "plugin"

    def as_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


def chain_summaries(
    chain: PosteriorChain,
    corpus,
    pi_draws: str = "plugin",
    max_draws: int = 2000,
    seed: int = 0,
) -> ChainSummary:
    """Posterior means and equal-tailed 95% intervals.

    Parameters
    ----------
    chain : PosteriorChain
        Draws of alpha.
    corpus : Corpus
        Counts used to form category probabilities.
    pi_draws : {"plugin", "dirichlet"}
        ``"plugin"`` maps each alpha draw to the additive-smoothing estimate
        ``(n_sk + alpha_k) / (N_s + A)``. ``"dirichlet"`` instead draws
        ``pi_sk`` from its conditional Beta marginal given alpha, so intervals
        reflect the full posterior of ``pi`` rather than of its conditional
        mean. Means are the additive-smoothing average in both cases.
    max_draws : int
        Number of evenly spaced draws used for the pi intervals.
    seed : int
        Seed for the Beta draws of the ``"dirichlet"`` mode.

    Raises
    ------
    ValueError
        If the chain holds no draws.
    """
    corpus = _as_corpus(corpus)
    draws = np.asarray(chain.draws)
    if draws.shape[0] == 0:
        raise ValueError("chain has no retained draws")
    if draws.shape[1] != corpus.K:
        raise ValueError("chain and corpus disagree on the number of categories")
    if pi_draws not in ("plugin", "dirichlet"):
        raise ValueError("pi_draws must be 'plugin' or 'dirichlet'")
    a_mean = draws.mean(axis=0)
    a_lo, a_hi = np.quantile(draws, [0.025, 0.975], axis=0)
    if chain.homogeneous:
        e = effective_sample_size(draws[:, 0])
        ess = np.full(corpus.K, e)
    else:
        ess = np.array([effective_sample_size(draws[:, k]) for k in range(corpus.K)])
    mcse = draws.std(axis=0, ddof=1) / np.sqrt(ess) if draws.shape[0] > 1 else np.zeros(corpus.K)
    idx = np.unique(np.linspace(0, draws.shape[0] - 1, min(max_draws, draws.shape[0])).round().astype(int))
    sub = draws[idx]
    A = draws.sum(axis=1)
    A_sub = sub.sum(axis=1)
    counts = corpus.counts.astype(float)
    totals = corpus.row_totals.astype(float)
    S, K = counts.shape
    pi_mean = np.empty((S, K))
    pi_lo = np.empty((S, K))
    pi_hi = np.empty((S, K))
    rng = rng_suite(seed, 1)
    for s in range(S):
        pi_mean[s] = ((counts[s][None, :] + draws) / (totals[s] + A)[:, None]).mean(axis=0)
        shape1 = counts[s][None, :] + sub
        if pi_draws == "plugin":
            samples = shape1 / (totals[s] + A_sub)[:, None]
        else:
            shape2 = (totals[s] + A_sub)[:, None] - shape1
            samples = np.zeros_like(shape1)
            ok = (shape1 > 0) & (shape2 > 0)
            samples[ok] = rng.beta(shape1[ok], shape2[ok])
            samples[(shape2 <= 0) & (shape1 > 0)] = 1.0
        pi_lo[s], pi_hi[s] = np.quantile(samples, [0.025, 0.975], axis=0)
    return ChainSummary(a_mean, a_lo, a_hi, ess, mcse, pi_mean, pi_lo, pi_hi, chain.acceptance_rate, pi_draws)
