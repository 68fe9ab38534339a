"""The Pochhammer (PH) and power-Pochhammer (PPH) distribution family.

A PH(m, a, b, c) variable has density proportional to ``[alpha]^m / [c alpha + a]^b``
on ``alpha >= 0``; the power variant multiplies by ``alpha^d``. The
normalizing constant, CDF and moments have closed forms through the residues
``gamma_i`` of the partial-fraction expansion over the poles
``-(a + i - 1) / c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import IntegrabilityError, MomentError
from .numeric import Precision, SignedLogReal, default_precision, mp_context, rng_suite, to_mpf
from .residues import (
    Block,
    RationalForm,
    ResidueExpansion,
    ResidueTerm,
    Scalar,
    as_scalar,
    run_policy,
)

__all__ = [
    "PochhammerParams",
    "Pochhammer",
    "DEFAULT_PRIOR",
    "HALF_HORSESHOE",
    "ph_residues",
    "pph_residues",
    "ph_moment",
    "ph_log_density",
    "ph_cdf",
    "ph_quantile",
    "ph_sample",
    "prior_mass_near_zero",
    "heavy_tail_check",
    "exponential_tail_check",
    "stirling_gamma_limit_experiment",
    "stirling_population_ks",
    "StirlingResult",
    "figure1_curves",
    "figure2_curves",
    "density_curve",
]


@dataclass(frozen=True)
class PochhammerParams:
    """Parameters ``(m, a, b, c, d)`` of a PH/PPH distribution.

    ``a`` and ``c`` accept integers, floats, ``Fraction`` objects or strings
    such as ``"3/2"``; integers and strings are kept as exact rationals so
    that pole coincidences can be detected exactly.

    Parameters
    ----------
    m : int
        Degree of the numerator rising factorial ``[alpha]^m``.
    a : rational or float
        Pole offset, positive. Zero is allowed only when ``m >= 1`` or
        ``d >= 1`` cancels the resulting pole at the origin.
    b : int
        Degree of the denominator ``[c alpha + a]^b``; needs ``b >= m + d + 2``.
    c : rational or float
        Pole scale, positive.
    d : int
        Power tilt ``alpha^d`` (0 for plain PH).
    """

    m: int = 0
    a: Scalar = Fraction(1)
    b: int = 2
    c: Scalar = Fraction(1)
    d: int = 0

    def __post_init__(self):
        for name in ("m", "b", "d"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")
            object.__setattr__(self, name, int(v))
        object.__setattr__(self, "a", as_scalar(self.a))
        object.__setattr__(self, "c", as_scalar(self.c))
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.a < 0 or (self.a == 0 and self.m == 0 and self.d == 0):
            raise ValueError("a must be positive (a = 0 needs m >= 1 or d >= 1)")
        if self.b < self.m + self.d + 2:
            raise IntegrabilityError(
                f"b = {self.b} < m + d + 2 = {self.m + self.d + 2}: density is not integrable"
            )

    @property
    def exact(self) -> bool:
        return isinstance(self.a, Fraction) and isinstance(self.c, Fraction)

    @property
    def form(self) -> RationalForm:
        return RationalForm(
            (Block(1, 0, self.m), Block(1, 0, self.d, step=0)),
            (Block(self.c, self.a, self.b),),
        )

    @property
    def max_moment(self) -> int:
        """Number of finite integer moments."""
        return self.b - (self.m + self.d + 2)

    def tilted(self, k: int) -> "PochhammerParams":
        return replace(self, d=self.d + k)

    def __str__(self):
        core = f"m={self.m}, a={self.a}, b={self.b}, c={self.c}"
        return f"PPH({core}, d={self.d})" if self.d else f"PH({core})"

    def as_dict(self) -> dict:
        return {"m": self.m, "a": str(self.a), "b": self.b, "c": str(self.c), "d": self.d}


DEFAULT_PRIOR = PochhammerParams(0, 1, 2, 1)
HALF_HORSESHOE = DEFAULT_PRIOR


def _ph_terms_double(p: PochhammerParams):
    a, c = float(p.a), float(p.c)
    i = np.arange(1, p.b + 1, dtype=float)
    base = 1.0 - a - i
    factors = [base] * p.d + [1.0 + (s - 1) * c - a - i for s in range(1, p.m + 1)]
    if factors:
        f = np.vstack(factors)
        alive = np.all(f != 0.0, axis=0)
        with np.errstate(divide="ignore"):
            lognum = np.log(np.abs(f)).sum(axis=0)
        negs = (f < 0).sum(axis=0)
    else:
        alive = np.ones(p.b, dtype=bool)
        lognum = np.zeros(p.b)
        negs = np.zeros(p.b, dtype=int)
    from scipy.special import gammaln

    logden = (p.m + p.d) * math.log(c) + gammaln(i) + gammaln(p.b - i + 1)
    logmag = lognum - logden
    signs = np.where((negs + (i.astype(int) - 1)) % 2 == 1, -1, 1)
    terms, norm_terms, res_terms = [], [], []
    lc = math.log(c)
    for k in np.flatnonzero(alive):
        off = p.a + int(i[k]) - 1
        g = SignedLogReal(int(signs[k]), float(logmag[k]))
        terms.append(ResidueTerm(p.c, off, 1, g))
        res_terms.append(SignedLogReal(g.sign, g.logmag - lc))
        lo = math.log(float(off))
        if lo != 0.0:
            norm_terms.append(SignedLogReal(-g.sign * (1 if lo > 0 else -1), g.logmag - lc + math.log(abs(lo))))
    return terms, norm_terms, res_terms


def _ph_terms_extended(p: PochhammerParams, bits: int):
    ctx = mp_context(bits)
    a, c = to_mpf(ctx, p.a), to_mpf(ctx, p.c)
    cpow = c ** (p.m + p.d)
    fact = [ctx.one]
    for k in range(1, p.b):
        fact.append(fact[-1] * k)
    terms, norm_terms, res_terms = [], [], []
    for i in range(1, p.b + 1):
        num = (1 - a - i) ** p.d
        for s in range(1, p.m + 1):
            num *= 1 + (s - 1) * c - a - i
        if num == 0:
            continue
        den = cpow * fact[i - 1] * fact[p.b - i]
        g = num / den if (i - 1) % 2 == 0 else -num / den
        off = p.a + i - 1
        terms.append(ResidueTerm(p.c, off, 1, SignedLogReal.from_mpf(ctx, g)))
        res_terms.append(SignedLogReal.from_mpf(ctx, g / c))
        norm_terms.append(SignedLogReal.from_mpf(ctx, -(g / c) * ctx.log(to_mpf(ctx, off))))
    return terms, norm_terms, res_terms


@lru_cache(maxsize=512)
def _cached_expansion(p: PochhammerParams, precision: Precision) -> ResidueExpansion:
    def compute(prec: Precision):
        if prec.is_extended:
            return _ph_terms_extended(p, prec.bits)
        return _ph_terms_double(p)

    return run_policy(p.form, compute, 1, precision)


def pph_residues(p: PochhammerParams, precision: Precision | None = None) -> ResidueExpansion:
    """Residue expansion of a power-Pochhammer density.

    The coefficient of ``1 / (c alpha + a + i - 1)`` is

    ``gamma_i = (1-a-i)^d prod_{s=1..m} (1 + (s-1)c - a - i) / (c^(m+d) prod_{k != i} (k - i))``

    and the normalizer is ``sum_i -(gamma_i / c) log(a + i - 1)``. Terms with a
    vanishing numerator (a cancelled pole) are dropped.
    """
    return _cached_expansion(p, precision or default_precision())


def ph_residues(p: PochhammerParams, precision: Precision | None = None) -> ResidueExpansion:
    """Residue expansion of a plain PH density (``d == 0``)."""
    if p.d != 0:
        raise ValueError("ph_residues needs d = 0; use pph_residues for tilted densities")
    return pph_residues(p, precision)


class Pochhammer:
    """Frozen PH/PPH distribution with scipy-like methods.

    Examples
    --------
    >>> dist = Pochhammer(PochhammerParams(0, 1, 2, 1))
    >>> round(dist.median(), 6)
    1.414214
    """

    def __init__(self, params: PochhammerParams, precision: Precision | None = None):
        self.params = params
        self.precision = precision or default_precision()
        self.expansion = pph_residues(params, self.precision)

    @property
    def log_norm_const(self) -> float:
        return self.expansion.log_norm_const

    def logpdf(self, x):
        return self.expansion.logpdf(x)

    def pdf(self, x):
        return self.expansion.pdf(x)

    def cdf(self, x):
        return self.expansion.cdf(x)

    def sf(self, x):
        return self.expansion.sf(x)

    def ppf(self, u):
        return self.expansion.ppf(u)

    def median(self) -> float:
        return self.ppf(0.5)

    def rvs(self, n: int, seed=0) -> np.ndarray:
        return self.expansion.rvs(n, seed)

    def moment(self, k: int) -> float:
        return ph_moment(self.params, k, self.precision)

    def mean(self) -> float:
        return self.moment(1)


def ph_moment(p: PochhammerParams, k: int, precision: Precision | None = None) -> float:
    """``E(alpha^k)`` as a ratio of tilted normalizers.

    Raises
    ------
    MomentError
        If ``k > b - (m + d + 2)``.
    """
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    if k > p.max_moment:
        raise MomentError(f"E(alpha^{k}) does not exist for {p}: at most {p.max_moment} moments")
    top = pph_residues(p.tilted(k), precision)
    base = pph_residues(p, precision)
    return math.exp(top.log_norm_const - base.log_norm_const)


def ph_log_density(p: PochhammerParams, alpha, precision: Precision | None = None):
    """Normalized log-density evaluated through log-gamma functions."""
    return pph_residues(p, precision).logpdf(alpha)


def ph_cdf(p: PochhammerParams, x, precision: Precision | None = None):
    return pph_residues(p, precision).cdf(x)


def ph_quantile(p: PochhammerParams, u, precision: Precision | None = None):
    return pph_residues(p, precision).ppf(u)


def ph_sample(p: PochhammerParams, n: int, seed=0, precision: Precision | None = None) -> np.ndarray:
    """``n`` inverse-CDF draws, deterministic under ``seed``."""
    return pph_residues(p, precision).rvs(n, seed)


def prior_mass_near_zero(p: PochhammerParams, eps: float) -> float:
    """Prior probability that ``alpha <= sqrt(eps)``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return float(ph_cdf(p, math.sqrt(eps)))


def heavy_tail_check(p: PochhammerParams, t: float, grid: Sequence[float], log: bool = False) -> np.ndarray:
    """``exp(t x) * P(alpha > x)`` on ``grid`` (its log when ``log=True``).

    A heavy right tail shows up as a sequence that eventually increases
    without bound for every ``t > 0``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    x = np.asarray(grid, dtype=float)
    with np.errstate(divide="ignore"):
        logs = t * x + np.log(pph_residues(p).sf(x))
    return logs if log else np.exp(logs)


def exponential_tail_check(rate: float, t: float, grid: Sequence[float], log: bool = False) -> np.ndarray:
    """The same statistic for an exponential law, as a light-tailed reference."""
    x = np.asarray(grid, dtype=float)
    logs = (t - rate) * x
    return logs if log else np.exp(logs)


@dataclass(frozen=True)
class StirlingResult:
    b: int
    n: int
    ks: float
    pvalue: float


def stirling_gamma_limit_experiment(
    b_grid: Sequence[int] = (10, 100, 1000), n: int = 100_000, seed: int = 0
) -> list[StirlingResult]:
    """KS distance between ``alpha * log(b)`` and Exp(1) for PH(0, 1, b, 1) draws."""
    out = []
    for idx, b in enumerate(b_grid):
        if b < 3:
            raise ValueError("b must be at least 3")
        draws = ph_sample(PochhammerParams(0, 1, int(b), 1), n, rng_suite(seed, idx))
        res = stats.kstest(draws * math.log(b), "expon")
        out.append(StirlingResult(int(b), n, float(res.statistic), float(res.pvalue)))
    return out


def stirling_population_ks(b: int, grid_size: int = 20_001) -> float:
    """Exact KS distance between the law of ``alpha * log(b)`` and Exp(1).

    Evaluated as the largest CDF gap on a dense grid, with no sampling noise,
    as a reference for :func:`stirling_gamma_limit_experiment`.
    """
    if b < 3:
        raise ValueError("b must be at least 3")
    y = np.concatenate([np.linspace(0.0, 12.0, grid_size)[1:], np.logspace(np.log10(12.0), 4, 2000)])
    exp = pph_residues(PochhammerParams(0, 1, int(b), 1))
    gap = np.abs(exp.cdf(y / math.log(b)) + np.expm1(-y))
    return float(gap.max())


def density_curve(p: PochhammerParams, grid: Sequence[float]) -> dict[str, np.ndarray]:
    """Columns ``alpha, density, cdf`` on ``grid``."""
    x = np.asarray(grid, dtype=float)
    exp = pph_residues(p)
    return {"alpha": x, "density": exp.pdf(x), "cdf": exp.cdf(x)}


FIG1_GRID = np.logspace(-3, 3, 400)


def figure1_params() -> dict[str, PochhammerParams]:
    """Baseline PH(0, 1.1, 2, 5) and one-parameter perturbations."""
    a, c = Fraction(11, 10), Fraction(5)
    return {
        "baseline": PochhammerParams(0, a, 2, c),
        "m1": PochhammerParams(1, a, 3, c),
        "a0.5": PochhammerParams(0, Fraction(1, 2), 2, c),
        "a2": PochhammerParams(0, 2, 2, c),
        "b5": PochhammerParams(0, a, 5, c),
        "c1": PochhammerParams(0, a, 2, 1),
        "c10": PochhammerParams(0, a, 2, 10),
    }


def figure1_curves(grid: Sequence[float] | None = None) -> dict[str, dict[str, np.ndarray]]:
    grid = FIG1_GRID if grid is None else grid
    return {name: density_curve(p, grid) for name, p in figure1_params().items()}


def figure2_curves(
    b_values: Sequence[int] = (5, 50, 500), grid: Sequence[float] | None = None
) -> dict[str, dict[str, np.ndarray]]:
    """PH(0, 1, b, 1) densities next to Gamma(1, rate log b) densities."""
    x = np.linspace(0.0, 3.0, 301) if grid is None else np.asarray(grid, dtype=float)
    out = {}
    for b in b_values:
        rate = math.log(b)
        out[f"b{b}"] = {
            "alpha": x,
            "density": pph_residues(PochhammerParams(0, 1, int(b), 1)).pdf(x),
            "gamma_density": rate * np.exp(-rate * x),
        }
    return out
