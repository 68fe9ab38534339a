"""Numerical building blocks shared by every other module.

Signed-log reals, rising factorials, an adaptive half-line quadrature used as
an independent oracle for normalizing constants, and seeded random streams.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import mpmath
import numpy as np
from scipy.special import gammaln

__all__ = [
    "SignedLogReal",
    "Precision",
    "SignedSum",
    "QuadratureError",
    "log_rising",
    "signed_rising",
    "signed_log_sum",
    "integrate_halfline",
    "log_integrate_halfline",
    "default_precision",
    "RandomStreams",
    "rng_suite",
    "derive_seed",
    "mp_context",
    "to_mpf",
    "RNG_VERSION",
]

RNG_VERSION = "numpy-pcg64/seedsequence-v1"

LN2 = math.log(2.0)
# digits we insist on keeping after cancellation, in nats (8 decimal digits)
_KEEP_NATS = 8 * math.log(10.0)


@lru_cache(maxsize=None)
def mp_context(bits: int) -> mpmath.ctx_mp.MPContext:
    """Private mpmath context at a fixed binary precision."""
    ctx = mpmath.MPContext()
    ctx.prec = bits
    return ctx


def to_mpf(ctx, x):
    """Convert ints, floats, Fractions and mpf values into ``ctx``."""
    if isinstance(x, Fraction):
        return ctx.mpf(x.numerator) / ctx.mpf(x.denominator)
    return ctx.mpf(x)


@dataclass(frozen=True)
class Precision:
    """Working precision for cancellation-prone sums.

    ``bits == 53`` is plain double precision; anything larger is an
    extended-precision mode backed by mpmath and must use at least 128 bits.
    """

    bits: int = 53

    def __post_init__(self):
        if self.bits != 53 and self.bits < 128:
            raise ValueError("extended precision needs at least 128 bits")

    @classmethod
    def double(cls) -> "Precision":
        return cls(53)

    @classmethod
    def extended(cls, bits: int = 256) -> "Precision":
        if bits < 128:
            raise ValueError("extended precision needs at least 128 bits")
        return cls(bits)

    @classmethod
    def parse(cls, text: str) -> "Precision":
        """Parse ``"double"``, ``"extended"`` or ``"extended:512"``."""
        text = text.strip().lower()
        if text in ("double", "53"):
            return cls.double()
        if text.startswith("extended"):
            _, _, bits = text.partition(":")
            return cls.extended(int(bits) if bits else 256)
        raise ValueError(f"unknown precision mode {text!r}")

    @property
    def is_extended(self) -> bool:
        return self.bits > 53

    @property
    def threshold(self) -> float:
        """Largest tolerated cancellation (nats) that still keeps 8 digits."""
        return self.bits * LN2 - _KEEP_NATS

    def __str__(self):
        return "double" if not self.is_extended else f"extended:{self.bits}"


def default_precision() -> Precision:
    """Starting precision, overridable through ``PHPRIOR_PRECISION``."""
    env = os.environ.get("PHPRIOR_PRECISION")
    return Precision.parse(env) if env else Precision.double()


@dataclass(frozen=True)
class SignedLogReal:
    """A real number stored as ``sign * exp(logmag)``.

    ``logmag`` is a float in double mode and may be an mpmath ``mpf`` when
    the value came out of an extended-precision computation.
    """

    sign: int
    logmag: float = -math.inf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or +1")

    @classmethod
    def zero(cls) -> "SignedLogReal":
        return cls(0, -math.inf)

    @classmethod
    def from_real(cls, x) -> "SignedLogReal":
        if isinstance(x, mpmath.mpf) or type(x).__name__ == "mpf":
            if x == 0:
                return cls.zero()
            return cls(1 if x > 0 else -1, mpmath.log(abs(x)))
        x = float(x)
        if x == 0.0:
            return cls.zero()
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_mpf(cls, ctx, x) -> "SignedLogReal":
        if x == 0:
            return cls.zero()
        return cls(1 if x > 0 else -1, ctx.log(abs(x)))

    def to_real(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(float(self.logmag))

    def to_mpf(self, ctx):
        if self.sign == 0:
            return ctx.zero
        return self.sign * ctx.exp(self.logmag)

    def __neg__(self):
        return SignedLogReal(-self.sign, self.logmag)

    def __mul__(self, other: "SignedLogReal") -> "SignedLogReal":
        if self.sign == 0 or other.sign == 0:
            return SignedLogReal.zero()
        return SignedLogReal(self.sign * other.sign, self.logmag + other.logmag)

    def __truediv__(self, other: "SignedLogReal") -> "SignedLogReal":
        if other.sign == 0:
            raise ZeroDivisionError("division by a signed-log zero")
        if self.sign == 0:
            return SignedLogReal.zero()
        return SignedLogReal(self.sign * other.sign, self.logmag - other.logmag)

    def __float__(self):
        return self.to_real()


@dataclass(frozen=True)
class SignedSum:
    """Result of :func:`signed_log_sum` together with its cancellation."""

    value: SignedLogReal
    cancellation: float
    precision: Precision

    @property
    def lossy(self) -> bool:
        return self.cancellation > self.precision.threshold


def log_rising(x, n):
    """Natural log of the rising factorial ``x (x+1) ... (x+n-1)``.

    Works elementwise on arrays. ``x`` must be positive unless ``n == 0``.
    """
    x_arr = np.asarray(x, dtype=float)
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise ValueError("n must be non-negative")
    x_b, n_b = np.broadcast_arrays(x_arr, n_arr)
    if np.any((x_b <= 0) & (n_b > 0)):
        raise ValueError("log_rising needs x > 0 when n >= 1; use signed_rising")
    nf = n_b.astype(float)
    with np.errstate(invalid="ignore"):
        out = np.where(n_b == 0, 0.0, gammaln(x_b + nf) - gammaln(np.where(x_b > 0, x_b, 1.0)))
    # gammaln differences lose absolute accuracy for large x; sum logs instead
    big = (x_b > 1e3) & (n_b > 0) & (n_b <= 64)
    if np.any(big):
        xs, ns = x_b[big], n_b[big]
        j = np.arange(int(ns.max()))
        terms = np.log(xs[:, None] + j[None, :])
        terms[j[None, :] >= ns[:, None]] = 0.0
        out = np.array(out, dtype=float)
        out[big] = terms.sum(axis=1)
    if np.ndim(out) == 0:
        return float(out)
    return out


def signed_rising(x, n: int) -> SignedLogReal:
    """Rising factorial at an arbitrary real ``x`` as a signed-log value."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return SignedLogReal(1, 0.0)
    if isinstance(x, Fraction) or isinstance(x, int):
        x = Fraction(x)
        if x <= 0 and x.denominator == 1 and -x < n:
            return SignedLogReal.zero()
        xf = float(x)
    else:
        xf = float(x)
        if xf <= 0 and xf == math.floor(xf) and -xf < n:
            return SignedLogReal.zero()
    if xf > 0:
        return SignedLogReal(1, float(log_rising(xf, n)))
    factors = xf + np.arange(n)
    negatives = int(np.count_nonzero(factors < 0))
    return SignedLogReal(-1 if negatives % 2 else 1, float(np.sum(np.log(np.abs(factors)))))


def signed_log_sum(terms: Iterable[SignedLogReal], precision: Precision | None = None) -> SignedSum:
    """Sum signed-log terms, reporting how many nats were lost to cancellation.

    The cancellation diagnostic is ``log max|term| - log|sum|`` (infinite for
    an exact zero). In double mode the shifted terms are summed with
    ``math.fsum``; extended modes use an mpmath context at the requested
    number of bits.
    """
    precision = precision or Precision.double()
    terms = [t for t in terms if t.sign != 0]
    if not terms:
        return SignedSum(SignedLogReal.zero(), 0.0, precision)
    if precision.is_extended:
        ctx = mp_context(precision.bits)
        logs = [ctx.mpf(t.logmag) for t in terms]
        top = max(logs)
        total = ctx.fsum(t.sign * ctx.exp(lg - top) for t, lg in zip(terms, logs))
        if total == 0:
            return SignedSum(SignedLogReal.zero(), math.inf, precision)
        value = SignedLogReal(1 if total > 0 else -1, top + ctx.log(abs(total)))
        return SignedSum(value, float(-ctx.log(abs(total))), precision)
    logs = [float(t.logmag) for t in terms]
    top = max(logs)
    total = math.fsum(t.sign * math.exp(lg - top) for t, lg in zip(terms, logs))
    if total == 0.0:
        return SignedSum(SignedLogReal.zero(), math.inf, precision)
    value = SignedLogReal(1 if total > 0 else -1, top + math.log(abs(total)))
    return SignedSum(value, -math.log(abs(total)), precision)


class QuadratureError(RuntimeError):
    """Adaptive quadrature ran out of its subdivision budget."""


# 7-point Gauss / 15-point Kronrod pair on [-1, 1]
_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
GK_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
GK_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, 7 from the edge)
_G_IDX = np.array([1, 3, 5, 7, 9, 11, 13])
G_WEIGHTS = np.concatenate([_WG[:-1], _WG[::-1]])


def _eval_log(f, x):
    out = f(x)
    if np.shape(out) != np.shape(x):
        out = np.array([f(float(v)) for v in x], dtype=float)
    return np.asarray(out, dtype=float)


def _adaptive_halfline(logf, tol, max_panels, scale, initial_panels):
    """Return ``(shift, total)`` with the integral equal to ``exp(shift) * total``."""
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    if scale <= 0:
        raise ValueError("scale must be positive")
    log_scale = math.log(scale)

    def log_integrand(lo, hi):
        half = 0.5 * (hi - lo)
        t = lo + half * (GK_NODES + 1.0)
        x = scale * t / (1.0 - t)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            lv = _eval_log(logf, x) + log_scale - 2.0 * np.log1p(-t)
        # endpoints map to x = 0 or inf where a finite integrand may be nan
        return half, np.where(np.isnan(lv), -np.inf, lv)

    edges = np.linspace(0.0, 1.0, initial_panels + 1)
    raw = [(lo, hi) + log_integrand(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    shift = max(float(np.max(r[3])) for r in raw)
    if not np.isfinite(shift):
        if shift == -np.inf:
            return -np.inf, 1.0
        raise QuadratureError("integrand overflow inside the domain")

    def finish(half, lv):
        vals = np.exp(lv - shift)
        if np.any(np.isinf(vals)):
            raise QuadratureError("integrand overflow inside the domain")
        k = half * float(np.dot(GK_WEIGHTS, vals))
        g = half * float(np.dot(G_WEIGHTS, vals[_G_IDX]))
        return k, abs(k - g)

    panels = [[lo, hi, *finish(half, lv)] for lo, hi, half, lv in raw]
    while True:
        total = math.fsum(p[2] for p in panels)
        err = math.fsum(p[3] for p in panels)
        if err <= tol * abs(total):
            return shift, total
        if len(panels) >= max_panels:
            raise QuadratureError(
                f"no convergence after {len(panels)} panels (relative error {err / abs(total):.3g})"
            )
        worst = max(range(len(panels)), key=lambda i: panels[i][3])
        lo, hi, _, _ = panels.pop(worst)
        mid = 0.5 * (lo + hi)
        for a, b in ((lo, mid), (mid, hi)):
            half, lv = log_integrand(a, b)
            panels.append([a, b, *finish(half, lv)])


def integrate_halfline(
    logf: Callable,
    tol: float = 1e-10,
    max_panels: int = 4000,
    scale: float = 1.0,
    initial_panels: int = 16,
) -> float:
    """Adaptive Gauss-Kronrod estimate of ``int_0^inf exp(logf(x)) dx``.

    The half line is mapped onto (0, 1) by ``x = scale * t / (1 - t)`` and the
    panel with the largest Kronrod-Gauss discrepancy is bisected until the
    summed error estimate falls below ``tol`` relative to the integral.
    ``logf`` should accept a numpy array; scalar-only callables also work.

    Raises
    ------
    QuadratureError
        If ``max_panels`` panels do not reach the requested tolerance.
    """
    shift, total = _adaptive_halfline(logf, tol, max_panels, scale, initial_panels)
    return math.exp(shift) * total if total > 0 else 0.0


def log_integrate_halfline(
    logf: Callable,
    tol: float = 1e-10,
    max_panels: int = 4000,
    scale: float = 1.0,
    initial_panels: int = 16,
) -> float:
    """Log of :func:`integrate_halfline`, safe for integrals far outside double range."""
    shift, total = _adaptive_halfline(logf, tol, max_panels, scale, initial_panels)
    if total <= 0:
        return -math.inf
    return shift + math.log(total)


def derive_seed(seed: int, *stream: int) -> np.random.SeedSequence:
    """Child seed sequence for a numbered stream below a top-level seed."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))


class RandomStreams:
    """Seeded generator with the distributions the samplers need.

    Thin wrapper over ``numpy.random.Generator`` (PCG64). Dirichlet draws are
    normalized gamma draws computed in log space so that tiny shape
    parameters do not underflow to an all-zero vector.
    """

    version = RNG_VERSION

    def __init__(self, seed=0, *stream: int):
        if isinstance(seed, np.random.Generator):
            self.gen = seed
        elif isinstance(seed, np.random.SeedSequence):
            self.gen = np.random.Generator(np.random.PCG64(seed))
        else:
            if int(seed) < 0 or int(seed) >= 2**64:
                raise ValueError("seed must be a 64-bit unsigned integer")
            self.gen = np.random.Generator(np.random.PCG64(derive_seed(seed, *stream)))

    def spawn(self, n: int) -> list["RandomStreams"]:
        """Independent child streams."""
        return [RandomStreams(g) for g in self.gen.spawn(n)]

    def uniform(self, size=None):
        return self.gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        if np.any(np.asarray(scale) < 0):
            raise ValueError("normal scale must be non-negative")
        return self.gen.normal(loc, scale, size)

    def gamma(self, shape, rate=1.0, size=None):
        if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(rate) <= 0):
            raise ValueError("gamma shape and rate must be positive")
        return self.gen.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size)

    def log_gamma(self, shape, size=None):
        """Logarithm of unit-rate gamma draws, accurate for tiny shapes."""
        shape = np.asarray(shape, dtype=float)
        if np.any(shape <= 0):
            raise ValueError("gamma shape must be positive")
        if size is None:
            size = shape.shape
        boosted = self.gen.gamma(shape + 1.0, 1.0, size)
        u = self.gen.random(size)
        # G(a) = G(a+1) * U^(1/a)
        return np.log(boosted) + np.log(u) / shape

    def beta(self, a, b, size=None):
        if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
            raise ValueError("beta parameters must be positive")
        return self.gen.beta(a, b, size)

    def dirichlet(self, alpha, size=None):
        """Dirichlet draws; zero entries of ``alpha`` give exact zeros."""
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha < 0) or not np.any(alpha > 0):
            raise ValueError("dirichlet needs non-negative weights with at least one positive")
        shape = alpha.shape if size is None else tuple(np.atleast_1d(size)) + alpha.shape
        live = alpha > 0
        out = np.zeros(shape)
        lg = self.log_gamma(np.broadcast_to(alpha[live], shape[:-1] + (int(live.sum()),)))
        lg -= lg.max(axis=-1, keepdims=True)
        w = np.exp(lg)
        out[..., live] = w / w.sum(axis=-1, keepdims=True)
        return out

    def multinomial(self, n, pvals, size=None):
        pvals = np.asarray(pvals, dtype=float)
        if np.any(pvals < 0):
            raise ValueError("multinomial probabilities must be non-negative")
        return self.gen.multinomial(n, pvals / pvals.sum(), size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def poisson(self, lam, size=None):
        return self.gen.poisson(lam, size)


def rng_suite(seed=0, *stream: int) -> RandomStreams:
    """Seeded generator; identical ``(seed, stream)`` give identical draws."""
    return RandomStreams(seed, *stream)


def logsumexp_signed(values: Sequence[float], signs: Sequence[int]) -> SignedLogReal:
    """Convenience: signed sum of ``sign * exp(value)`` pairs in double."""
    return signed_log_sum([SignedLogReal(int(s), float(v)) for v, s in zip(values, signs)]).value
