"""Partial-fraction (residue) expansions of Pochhammer rational densities.

A Pochhammer rational is a product of linear factors ``s * alpha + o`` with
``s > 0`` and ``o >= 0`` in both numerator and denominator. Consecutive factors
are grouped into :class:`Block` objects so that rising factorials like
``[c alpha + a]^b`` stay compact. :func:`expand` cancels common roots, computes
residues at the remaining poles (orders 1 and 2) and integrates the partial
fractions term by term to get the normalizing constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import IntegrabilityError, SizeBudgetError
from .numeric import (
    Precision,
    QuadratureError,
    SignedLogReal,
    SignedSum,
    default_precision,
    log_integrate_halfline,
    mp_context,
    rng_suite,
    signed_log_sum,
    to_mpf,
)

Scalar = Union[Fraction, float]

__all__ = [
    "Block",
    "RationalForm",
    "ResidueTerm",
    "ResidueExpansion",
    "as_scalar",
    "expand",
    "run_policy",
    "exact_partial_fractions",
    "exact_log_norm_const",
    "ROOT_RTOL",
    "DEFAULT_SIZE_BUDGET",
]

# relative tolerance for deciding that two floating-point roots coincide
ROOT_RTOL = 1e-12
# largest total denominator degree handled by residues before quadrature
DEFAULT_SIZE_BUDGET = 2000
# normalizer cancellation (nats) above which the closed-form CDF is not trusted
CDF_CANCELLATION_LIMIT = 10.0


def as_scalar(x) -> Scalar:
    """Normalize a numeric input: integers, rationals and strings become exact."""
    if isinstance(x, bool):
        raise TypeError("booleans are not numeric parameters")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse {x!r} as a rational number") from exc
    xf = float(x)
    if not math.isfinite(xf):
        raise ValueError("parameters must be finite")
    if xf == int(xf) and abs(xf) < 2**53:
        return Fraction(int(xf))
    return xf


@dataclass(frozen=True)
class Block:
    """Product of ``length`` linear factors ``scale*alpha + offset + step*j``.

    ``step=1`` gives the rising factorial ``[scale*alpha + offset]^length``;
    ``step=0`` gives the power ``(scale*alpha + offset)^length``.
    """

    scale: Scalar
    offset: Scalar
    length: int
    step: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scale", as_scalar(self.scale))
        object.__setattr__(self, "offset", as_scalar(self.offset))
        if self.scale <= 0:
            raise ValueError("block scale must be positive")
        if self.offset < 0:
            raise ValueError("block offset must be non-negative")
        if self.length < 0 or self.step not in (0, 1):
            raise ValueError("block length must be >= 0 and step 0 or 1")

    @property
    def exact(self) -> bool:
        return isinstance(self.scale, Fraction) and isinstance(self.offset, Fraction)

    def factors(self):
        for j in range(self.length):
            yield self.scale, self.offset + self.step * j

    def log_eval(self, alpha: np.ndarray) -> np.ndarray:
        """Log of the block at ``alpha`` (``-inf`` where a factor vanishes)."""
        if self.length == 0:
            return np.zeros_like(alpha)
        x = float(self.scale) * alpha + float(self.offset)
        with np.errstate(divide="ignore"):
            if self.step == 0:
                return self.length * np.log(x)
            from scipy.special import gammaln

            pos = x > 0
            out = np.full_like(alpha, -np.inf)
            xp = x[pos]
            big = xp > 1e6
            val = gammaln(xp + self.length) - gammaln(np.where(big, 1.0, xp))
            if np.any(big):
                j = np.arange(self.length, dtype=float)
                if self.length <= 64:
                    val[big] = np.log(xp[big, None] + j[None, :]).sum(axis=1)
                else:
                    val[big] = self.length * np.log(xp[big]) + np.log1p(j[None, :] / xp[big, None]).sum(axis=1)
            out[pos] = val
            return out

    def log_eval_at_zero(self):
        """``(zero_count, log of the remaining factors, log of zero-factor slopes)`` at alpha = 0."""
        if self.length == 0:
            return 0, 0.0, 0.0
        o = float(self.offset)
        ls = math.log(float(self.scale))
        if self.offset != 0:
            if self.step == 0:
                return 0, self.length * math.log(o), 0.0
            return 0, math.lgamma(o + self.length) - math.lgamma(o), 0.0
        if self.step == 0:
            return self.length, 0.0, self.length * ls
        return 1, math.lgamma(self.length), ls


@dataclass(frozen=True)
class RationalForm:
    """Unnormalized density ``prod(numerator) / prod(denominator)`` on alpha >= 0."""

    numerator: tuple[Block, ...]
    denominator: tuple[Block, ...]

    def __post_init__(self):
        object.__setattr__(self, "numerator", tuple(b for b in self.numerator if b.length > 0))
        object.__setattr__(self, "denominator", tuple(b for b in self.denominator if b.length > 0))

    @property
    def degree_num(self) -> int:
        return sum(b.length for b in self.numerator)

    @property
    def degree_den(self) -> int:
        return sum(b.length for b in self.denominator)

    @property
    def exact(self) -> bool:
        return all(b.exact for b in self.numerator + self.denominator)

    def tilt(self, k: int) -> "RationalForm":
        """Multiply by ``alpha**k``."""
        if k == 0:
            return self
        return RationalForm(self.numerator + (Block(1, 0, k, step=0),), self.denominator)

    def log_eval(self, alpha) -> np.ndarray:
        """Log of the unnormalized density, evaluated factor-block by block."""
        arr = np.atleast_1d(np.asarray(alpha, dtype=float))
        if np.any(arr < 0):
            raise ValueError("alpha must be non-negative")
        out = np.zeros_like(arr)
        for b in self.numerator:
            out += b.log_eval(arr)
        for b in self.denominator:
            out -= b.log_eval(arr)
        zero = arr == 0
        if np.any(zero):
            out[zero] = self._log_eval_at_zero()
        if np.ndim(alpha) == 0:
            return float(out[0])
        return out

    def _log_eval_at_zero(self) -> float:
        nz, nval, nslope = 0, 0.0, 0.0
        for b in self.numerator:
            z, v, s = b.log_eval_at_zero()
            nz, nval, nslope = nz + z, nval + v, nslope + s
        dz, dval, dslope = 0, 0.0, 0.0
        for b in self.denominator:
            z, v, s = b.log_eval_at_zero()
            dz, dval, dslope = dz + z, dval + v, dslope + s
        if nz > dz:
            return -math.inf
        if nz < dz:
            return math.inf
        return nval - dval + nslope - dslope


@dataclass(frozen=True)
class ResidueTerm:
    """One partial fraction ``coef / (scale*alpha + offset)**order``."""

    scale: Scalar
    offset: Scalar
    order: int
    coef: SignedLogReal

    @property
    def location(self) -> Scalar:
        """Root of the linear factor, a non-positive number."""
        return -self.offset / self.scale

    @property
    def value(self) -> float:
        return self.coef.to_real()


@dataclass(frozen=True)
class ResidueExpansion:
    """Residue expansion and normalizer of a Pochhammer rational density.

    Attributes
    ----------
    form : RationalForm
        The unnormalized density, used for direct log-density evaluation.
    terms : tuple of ResidueTerm
        Partial fractions, empty when ``numeric_fallback`` is set.
    log_norm_const : float
        Natural log of the integral of ``form`` over (0, inf).
    precision_used : Precision
        Precision in which the accepted normalizer was computed.
    cancellation : float
        Nats lost to cancellation in the normalizer sum.
    residue_sum : float
        ``|sum of order-1 coef/scale| / max |coef/scale|``; zero in exact arithmetic.
    numeric_fallback : bool
        True when the normalizer came from quadrature instead of residues.
    """

    form: RationalForm
    terms: tuple[ResidueTerm, ...]
    log_norm_const: float
    precision_used: Precision
    cancellation: float = 0.0
    residue_sum: float = 0.0
    numeric_fallback: bool = False
    max_order: int = 1
    notes: tuple[str, ...] = field(default_factory=tuple)

    # -- structure -------------------------------------------------------
    @property
    def poles(self) -> list[tuple[Scalar, int]]:
        """Distinct pole locations with their orders."""
        seen: dict = {}
        for t in self.terms:
            loc = t.location
            seen[loc] = max(seen.get(loc, 0), t.order)
        return sorted(seen.items(), key=lambda kv: -float(kv[0]))

    @property
    def coefficients(self) -> list[SignedLogReal]:
        return [t.coef for t in self.terms]

    def coefficient_values(self, order: int = 1) -> np.ndarray:
        return np.array([t.value for t in self.terms if t.order == order])

    @property
    def norm_const(self) -> float:
        return math.exp(self.log_norm_const)

    # -- density functions ----------------------------------------------
    def logpdf(self, x):
        return self.form.log_eval(x) - self.log_norm_const

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def residue_pdf(self, x, bits: int = 256):
        """Density from the partial-fraction sum (for consistency checks).

        The sum cancels heavily where the density is small relative to the
        coefficients, so it is carried out with ``bits``-bit coefficients.
        """
        if self.numeric_fallback:
            raise SizeBudgetError("no residue form: the normalizer came from quadrature")
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        terms = self.terms
        if self.precision_used.bits < bits:
            terms = expand(self.form, Precision.extended(bits), escalate=False, allow_fallback=False).terms
        ctx = mp_context(bits)
        coefs = [(to_mpf(ctx, t.scale), to_mpf(ctx, t.offset), t.order, t.coef.to_mpf(ctx)) for t in terms]
        out = np.empty_like(xs)
        for i, v in enumerate(xs):
            xv = ctx.mpf(float(v))
            total = ctx.fsum(c / (s * xv + o) ** k for s, o, k, c in coefs)
            out[i] = float(total) / self.norm_const
        return float(out[0]) if np.ndim(x) == 0 else out

    @property
    def closed_form_cdf_ok(self) -> bool:
        return (
            not self.numeric_fallback
            and not self.precision_used.is_extended
            and self.cancellation < CDF_CANCELLATION_LIMIT
            and len(self.terms) <= 200
        )

    def _residue_cdf_sf(self, xs: np.ndarray):
        c = self.norm_const
        lower = np.zeros_like(xs)
        upper = np.zeros_like(xs)
        # below 1e-200 the tail is the whole mass to double precision
        body = xs > 1e-200
        safe = np.where(body, xs, 1.0)
        xs = np.where(np.isfinite(xs), xs, 1.0)
        for t in self.terms:
            s, o = float(t.scale), float(t.offset)
            v = t.value / s
            if t.order == 1:
                lower += v * np.log1p(s * xs / o)
                # tail integral, using that the order-1 residues sum to zero
                upper -= v * np.log1p(o / (s * safe))
            else:
                lower += v * (1.0 / o - 1.0 / (s * xs + o))
                upper += v / (s * safe + o)
        upper = np.where(body, upper, c)
        return np.clip(lower / c, 0.0, 1.0), np.clip(upper / c, 0.0, 1.0)

    @cached_property
    def _table(self) -> "_CdfTable":
        return _CdfTable(self.form)

    def cdf(self, x):
        """Cumulative distribution function ``P(alpha <= x)``."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(xs < 0):
            raise ValueError("x must be non-negative")
        if self.closed_form_cdf_ok:
            lo, up = self._residue_cdf_sf(xs)
            out = np.where(lo <= 0.5, lo, 1.0 - up)
        else:
            out = self._table.cdf(xs)
        out = np.where(np.isinf(xs), 1.0, out)
        return float(out[0]) if np.ndim(x) == 0 else out

    def sf(self, x):
        """Survival function ``P(alpha > x)``."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(xs < 0):
            raise ValueError("x must be non-negative")
        if self.closed_form_cdf_ok:
            lo, up = self._residue_cdf_sf(xs)
            out = np.where(lo <= 0.5, 1.0 - lo, up)
        else:
            out = self._table.sf(xs)
        out = np.where(np.isinf(xs), 0.0, out)
        return float(out[0]) if np.ndim(x) == 0 else out

    def ppf(self, u, tol: float = 1e-12):
        """Quantile function via safeguarded Newton iterations on a bracket."""
        us = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any((us <= 0) | (us >= 1)):
            raise ValueError("u must lie strictly inside (0, 1)")
        out = _invert_cdf(self, us, tol)
        return float(out[0]) if np.ndim(u) == 0 else out

    def rvs(self, n: int, seed=0) -> np.ndarray:
        """Inverse-CDF samples, deterministic under ``seed``."""
        if n < 0:
            raise ValueError("n must be non-negative")
        if n == 0:
            return np.empty(0)
        rng = seed if hasattr(seed, "uniform") else rng_suite(seed)
        u = rng.uniform(n)
        u = np.clip(u, 1e-300, 1.0 - 2.0**-53)
        return self.ppf(u)


# ---------------------------------------------------------------------------
# numeric CDF table
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _t_edges() -> np.ndarray:
    inner = np.linspace(1.0 / 64, 1.0 - 1.0 / 64, 63)
    near0 = 2.0 ** -np.arange(60, 6, -1, dtype=float)
    near1 = 1.0 - 2.0 ** -np.arange(7, 52, dtype=float)
    return np.unique(np.concatenate([[0.0], near0, inner, near1, [1.0]]))


class _CdfTable:
    """Cumulative integrals of a log-density on a fixed panel grid in t = x/(1+x)."""

    def __init__(self, form: RationalForm):
        self.form = form
        self.edges = _t_edges()
        lo, hi = self.edges[:-1], self.edges[1:]
        half = 0.5 * (hi - lo)
        t = lo[:, None] + half[:, None] * (_GL_X[None, :] + 1.0)
        lv = self._log_integrand(t.ravel()).reshape(t.shape)
        self.shift = float(np.max(lv))
        vals = np.exp(lv - self.shift) * half[:, None]
        panel = vals @ _GL_W
        self.cum = np.concatenate([[0.0], np.cumsum(panel)])
        self.tail = np.concatenate([np.cumsum(panel[::-1])[::-1], [0.0]])
        self.total = self.cum[-1]
        self.log_total = self.shift + math.log(self.total)

    def _log_integrand(self, t: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            x = t / (1.0 - t)
            lv = self.form.log_eval(x) - 2.0 * np.log1p(-t)
        return np.where(np.isnan(lv), -np.inf, lv)

    def _partial(self, ts: np.ndarray):
        idx = np.clip(np.searchsorted(self.edges, ts, side="right") - 1, 0, len(self.edges) - 2)
        lo = self.edges[idx]
        half = 0.5 * (ts - lo)
        t = lo[:, None] + half[:, None] * (_GL_X[None, :] + 1.0)
        lv = self._log_integrand(t.ravel()).reshape(t.shape)
        part = (np.exp(lv - self.shift) @ _GL_W) * half
        return idx, part

    def cdf(self, xs: np.ndarray) -> np.ndarray:
        ts = np.where(np.isinf(xs), 1.0, xs / (1.0 + np.where(np.isinf(xs), 0.0, xs)))
        idx, part = self._partial(ts)
        return np.clip((self.cum[idx] + part) / self.total, 0.0, 1.0)

    def sf(self, xs: np.ndarray) -> np.ndarray:
        ts = np.where(np.isinf(xs), 1.0, xs / (1.0 + np.where(np.isinf(xs), 0.0, xs)))
        idx, part = self._partial(ts)
        return np.clip((self.tail[idx] - part) / self.total, 0.0, 1.0)


def _invert_cdf(exp: ResidueExpansion, us: np.ndarray, tol: float) -> np.ndarray:
    """Vectorized bracketed Newton solve of F(x) = u in t = x / (1 + x)."""
    lo = np.zeros_like(us)
    hi = np.ones_like(us)
    t = np.full_like(us, 0.5)
    out = np.empty_like(us)
    active = np.arange(len(us))
    upper_half = us > 0.5
    for _ in range(200):
        if active.size == 0:
            break
        tt = t[active]
        x = tt / (1.0 - tt)
        uu = us[active]
        up = upper_half[active]
        # residual F(x) - u, measured on the side with better resolution
        resid = np.empty_like(uu)
        if np.any(~up):
            resid[~up] = exp.cdf(x[~up]) - uu[~up]
        if np.any(up):
            resid[up] = (1.0 - uu[up]) - exp.sf(x[up])
        done = np.abs(resid) <= tol * np.minimum(uu, 1.0 - uu)
        too_high = resid > 0
        lo[active] = np.where(too_high, lo[active], tt)
        hi[active] = np.where(too_high, tt, hi[active])
        narrow = (hi[active] - lo[active]) <= 1e-16 * np.maximum(tt, 1e-300)
        finished = done | narrow
        out[active[finished]] = x[finished]
        keep = ~finished
        active, tt, x, resid = active[keep], tt[keep], x[keep], resid[keep]
        if active.size == 0:
            break
        dens = exp.pdf(x) / (1.0 - tt) ** 2  # dF/dt
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = tt - resid / dens
        ok = np.isfinite(newton) & (newton > lo[active]) & (newton < hi[active])
        t[active] = np.where(ok, newton, 0.5 * (lo[active] + hi[active]))
    if active.size:
        tt = t[active]
        out[active] = tt / (1.0 - tt)
    return out


# ---------------------------------------------------------------------------
# expansion engine
# ---------------------------------------------------------------------------


@dataclass
class _Cluster:
    root: Scalar
    n_num: int = 0
    n_den: int = 0
    scale: Scalar | None = None  # representative denominator scale


def _cluster_roots(form: RationalForm):
    """Group numerator and denominator roots, exactly when possible."""
    exact = form.exact
    entries = []
    log_lead = 0.0
    lead_parts = []  # (scale, power) pairs of the leading constant
    for sign, blocks in ((1, form.numerator), (-1, form.denominator)):
        for b in blocks:
            lead_parts.append((b.scale, sign * b.length))
            for s, o in b.factors():
                root = -o / s if exact else -float(o) / float(s)
                entries.append((root, sign, s))
    clusters: list[_Cluster] = []
    if exact:
        table: dict = {}
        for root, sign, s in entries:
            cl = table.get(root)
            if cl is None:
                cl = table[root] = _Cluster(root)
                clusters.append(cl)
            _tally(cl, sign, s)
    else:
        entries.sort(key=lambda e: e[0])
        for root, sign, s in entries:
            if clusters and abs(root - float(clusters[-1].root)) <= ROOT_RTOL * max(1.0, abs(root)):
                cl = clusters[-1]
            else:
                cl = _Cluster(root)
                clusters.append(cl)
            _tally(cl, sign, s)
    return clusters, lead_parts


def _tally(cl: _Cluster, sign: int, s):
    if sign > 0:
        cl.n_num += 1
    else:
        cl.n_den += 1
        if cl.scale is None:
            cl.scale = s


def _structure(form: RationalForm):
    clusters, lead = _cluster_roots(form)
    zeros = [(c.root, c.n_num - c.n_den) for c in clusters if c.n_num > c.n_den]
    poles = [(c.root, c.n_den - c.n_num, c.scale) for c in clusters if c.n_den > c.n_num]
    for root, _, _ in poles:
        if root >= 0 or abs(float(root)) <= ROOT_RTOL:
            raise IntegrabilityError(f"pole at alpha = {float(root):.6g} is not strictly negative")
    for root, _ in zeros:
        if float(root) > ROOT_RTOL:
            raise IntegrabilityError("numerator vanishes inside (0, inf); density would change sign")
    gap = sum(p[1] for p in poles) - sum(z[1] for z in zeros)
    if gap < 2:
        raise IntegrabilityError(
            f"denominator degree exceeds numerator degree by {gap} after cancellation; need at least 2"
        )
    return zeros, poles, lead


def _terms_double(zeros, poles, lead):
    log_lead = math.fsum(p * math.log(float(s)) for s, p in lead)
    zr = np.array([float(z[0]) for z in zeros])
    zm = np.array([z[1] for z in zeros], dtype=float)
    pr = np.array([float(p[0]) for p in poles])
    po = np.array([p[1] for p in poles], dtype=float)
    terms, norm_terms, res_terms = [], [], []
    for i, (root, order, scale) in enumerate(poles):
        p = pr[i]
        dz = p - zr
        dp = np.delete(p - pr, i)
        opo = np.delete(po, i)
        log_g = log_lead + float(np.dot(zm, np.log(np.abs(dz)))) - float(np.dot(opo, np.log(np.abs(dp))))
        neg = int(np.dot(zm, dz < 0) + np.dot(opo, dp < 0))
        sign_g = -1 if neg % 2 else 1
        s = float(scale)
        ls = math.log(s)
        lnp = math.log(-p)
        if order == 1:
            a1 = SignedLogReal(sign_g, log_g)
            terms.append(ResidueTerm(scale, -root * scale, 1, SignedLogReal(sign_g, log_g + ls)))
            res_terms.append(a1)
            _append_log_term(norm_terms, -sign_g, log_g, lnp)
        else:
            deriv = math.fsum(np.concatenate([zm / dz, -opo / dp]))
            terms.append(ResidueTerm(scale, -root * scale, 2, SignedLogReal(sign_g, log_g + 2 * ls)))
            norm_terms.append(SignedLogReal(sign_g, log_g - lnp))
            if deriv != 0.0:
                sign_1 = sign_g * (1 if deriv > 0 else -1)
                log_1 = log_g + math.log(abs(deriv))
                terms.append(ResidueTerm(scale, -root * scale, 1, SignedLogReal(sign_1, log_1 + ls)))
                res_terms.append(SignedLogReal(sign_1, log_1))
                _append_log_term(norm_terms, -sign_1, log_1, lnp)
    return terms, norm_terms, res_terms


def _append_log_term(bucket, sign, logmag, lnp):
    if lnp != 0:
        bucket.append(SignedLogReal(sign * (1 if lnp > 0 else -1), logmag + math.log(abs(lnp))))


def _terms_extended(zeros, poles, lead, bits):
    ctx = mp_context(bits)
    log_lead = ctx.fsum(p * ctx.log(to_mpf(ctx, s)) for s, p in lead)
    zr = [to_mpf(ctx, z[0]) for z in zeros]
    pr = [to_mpf(ctx, p[0]) for p in poles]
    terms, norm_terms, res_terms = [], [], []
    for i, (root, order, scale) in enumerate(poles):
        p = pr[i]
        num = ctx.fprod((p - z) ** m for z, (_, m) in zip(zr, zeros)) if zeros else ctx.one
        den = ctx.fprod((p - q) ** poles[j][1] for j, q in enumerate(pr) if j != i) if len(pr) > 1 else ctx.one
        g = ctx.exp(log_lead) * num / den
        s = to_mpf(ctx, scale)
        lnp = ctx.log(-p)
        if order == 1:
            a1 = g
            a2 = None
        else:
            deriv = ctx.fsum(
                [m / (p - z) for z, (_, m) in zip(zr, zeros)]
                + [-poles[j][1] / (p - q) for j, q in enumerate(pr) if j != i]
            )
            a1 = g * deriv
            a2 = g
        if a2 is not None:
            terms.append(ResidueTerm(scale, -root * scale, 2, SignedLogReal.from_mpf(ctx, a2 * s * s)))
            norm_terms.append(SignedLogReal.from_mpf(ctx, a2 / (-p)))
        if a1 != 0:
            terms.append(ResidueTerm(scale, -root * scale, 1, SignedLogReal.from_mpf(ctx, a1 * s)))
            res_terms.append(SignedLogReal.from_mpf(ctx, a1))
            norm_terms.append(SignedLogReal.from_mpf(ctx, -a1 * lnp))
    return terms, norm_terms, res_terms


def _relative_residue_sum(res_terms, precision: Precision) -> float:
    if not res_terms:
        return 0.0
    total = signed_log_sum(res_terms, precision)
    if total.value.sign == 0:
        return 0.0
    top = max(float(t.logmag) for t in res_terms)
    return math.exp(float(total.value.logmag) - top)


def _assemble(form, terms, norm_terms, res_terms, precision: Precision, max_order: int):
    norm = signed_log_sum(norm_terms, precision)
    return ResidueExpansion(
        form=form,
        terms=tuple(terms),
        log_norm_const=float(norm.value.logmag) if norm.value.sign > 0 else math.nan,
        precision_used=precision,
        cancellation=_effective_loss(norm, norm_terms),
        residue_sum=_relative_residue_sum(res_terms, precision),
        max_order=max_order,
    ), norm


def _quadrature_expansion(form: RationalForm, max_order: int, note: str) -> ResidueExpansion:
    try:
        log_c = log_integrate_halfline(form.log_eval, tol=1e-12, max_panels=20000)
    except QuadratureError:
        log_c = _CdfTable(form).log_total
    return ResidueExpansion(
        form=form,
        terms=(),
        log_norm_const=log_c,
        precision_used=Precision.double(),
        cancellation=math.nan,
        residue_sum=0.0,
        numeric_fallback=True,
        max_order=max_order,
        notes=(note,),
    )


def expand(
    form: RationalForm,
    precision: Precision | None = None,
    escalate: bool = True,
    size_budget: int = DEFAULT_SIZE_BUDGET,
    allow_fallback: bool = True,
) -> ResidueExpansion:
    """Residue expansion of a Pochhammer rational with escalating precision.

    Parameters
    ----------
    form : RationalForm
        Numerator and denominator factor blocks.
    precision : Precision, optional
        Starting precision; defaults to :func:`default_precision`.
    escalate : bool
        Retry in 256-bit precision when the normalizer loses too many digits,
        then fall back to quadrature.
    size_budget : int
        Largest denominator degree attempted with residues.
    allow_fallback : bool
        If False, raise instead of using quadrature.

    Returns
    -------
    ResidueExpansion

    Raises
    ------
    IntegrabilityError
        If a pole sits at or right of zero or the degree gap is below two.
    """
    precision = precision or default_precision()
    zeros, poles, lead = _structure(form)
    max_order = max(p[1] for p in poles)
    if max_order > 2:
        if not allow_fallback:
            raise SizeBudgetError(f"pole of order {max_order}; residues cover orders 1 and 2 only")
        return _quadrature_expansion(form, max_order, f"pole of order {max_order}; quadrature normalizer")
    if sum(p[1] for p in poles) > size_budget:
        if not allow_fallback:
            raise SizeBudgetError("expansion exceeds the size budget")
        return _quadrature_expansion(form, max_order, "size budget exceeded; quadrature normalizer")

    def compute(prec: Precision):
        if prec.is_extended:
            return _terms_extended(zeros, poles, lead, prec.bits)
        return _terms_double(zeros, poles, lead)

    return run_policy(form, compute, max_order, precision, escalate, allow_fallback)


def run_policy(form, compute, max_order, precision, escalate=True, allow_fallback=True):
    """Apply the precision policy to a coefficient routine.

    ``compute(precision)`` returns ``(terms, normalizer_terms, residue_terms)``.
    Double precision is tried first, then 256-bit arithmetic, then
    quadrature, each step taken only when the normalizer sum loses more
    digits than the current precision can spare.
    """

    def attempt(prec: Precision):
        parts = compute(prec)
        result, norm = _assemble(form, *parts, prec, max_order)
        return result, _healthy(norm, parts[1])

    result, ok = attempt(precision)
    if ok or not escalate:
        return result
    if not precision.is_extended or precision.bits < 256:
        result, ok = attempt(Precision.extended(max(256, precision.bits)))
        if ok:
            return result
    if not allow_fallback:
        return result
    return _quadrature_expansion(form, max_order, "cancellation beyond extended precision; quadrature normalizer")


def _effective_loss(norm: SignedSum, norm_terms) -> float:
    """Cancellation plus the log-magnitude error amplification of log-space terms."""
    live = [abs(float(t.logmag)) for t in norm_terms if t.sign != 0]
    if not live:
        return 0.0
    spread = max(live)
    return float(norm.cancellation) + math.log1p(spread)


def _healthy(norm: SignedSum, norm_terms) -> bool:
    return norm.value.sign > 0 and _effective_loss(norm, norm_terms) <= norm.precision.threshold


# ---------------------------------------------------------------------------
# exact oracle
# ---------------------------------------------------------------------------


def exact_partial_fractions(form: RationalForm) -> list[tuple[Fraction, int, Fraction]]:
    """Exact partial fractions for rational parameters.

    Returns ``(root, power, A)`` triples meaning ``A / (alpha - root)**power``.
    Intended as a test oracle; the cost is quadratic in the degree with
    big-integer rational arithmetic.
    """
    if not form.exact:
        raise ValueError("exact partial fractions need rational parameters")
    zeros, poles, lead = _structure(form)
    if max(p[1] for p in poles) > 2:
        raise SizeBudgetError("exact oracle covers pole orders 1 and 2")
    lead_c = Fraction(1)
    for s, p in lead:
        lead_c *= Fraction(s) ** p
    out = []
    for i, (p, order, _) in enumerate(poles):
        g = lead_c
        for z, m in zeros:
            g *= (p - z) ** m
        for j, (q, oq, _) in enumerate(poles):
            if j != i:
                g /= (p - q) ** oq
        if order == 1:
            out.append((p, 1, g))
        else:
            deriv = sum((Fraction(m) / (p - z) for z, m in zeros), Fraction(0))
            deriv -= sum((Fraction(oq) / (p - q) for j, (q, oq, _) in enumerate(poles) if j != i), Fraction(0))
            out.append((p, 2, g))
            out.append((p, 1, g * deriv))
    return out


def exact_log_norm_const(form: RationalForm, bits: int = 200) -> float:
    """Normalizer from :func:`exact_partial_fractions`, summed at high precision."""
    ctx = mp_context(bits)
    total = ctx.zero
    for root, power, a in exact_partial_fractions(form):
        av = to_mpf(ctx, a)
        r = to_mpf(ctx, -root)
        total += -av * ctx.log(r) if power == 1 else av / r
    return float(ctx.log(total))
