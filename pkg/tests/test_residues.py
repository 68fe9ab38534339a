"""The generic residue engine against sympy partial fractions and quadrature."""

import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pochhammer_priors.errors import IntegrabilityError, SizeBudgetError
from pochhammer_priors.numeric import Precision, log_integrate_halfline
from pochhammer_priors.residues import (
    Block,
    RationalForm,
    as_scalar,
    exact_log_norm_const,
    exact_partial_fractions,
    expand,
)

from oracles import exact_integral, partial_fraction_coefficients, rising, x


def _sym(form: RationalForm):
    """sympy expression of a RationalForm."""
    def block(b):
        s, o = sp.nsimplify(b.scale), sp.nsimplify(b.offset)
        if b.step == 0:
            return (s * x + o) ** b.length
        return rising(s * x + o, b.length)

    num = sp.prod([block(b) for b in form.numerator]) if form.numerator else sp.Integer(1)
    den = sp.prod([block(b) for b in form.denominator])
    return num / den


def _exact_norm(form):
    return float(sp.N(exact_integral(_sym(form)), 30))


class TestScalars:
    def test_exact_inputs(self):
        assert as_scalar(2) == Fraction(2)
        assert as_scalar("3/2") == Fraction(3, 2)
        assert as_scalar(2.0) == Fraction(2)
        assert isinstance(as_scalar(0.1), float)

    def test_rejects(self):
        with pytest.raises(ValueError):
            as_scalar("abc")
        with pytest.raises(ValueError):
            as_scalar(float("inf"))
        with pytest.raises(TypeError):
            as_scalar(True)


class TestBlock:
    def test_validation(self):
        with pytest.raises(ValueError):
            Block(0, 1, 2)
        with pytest.raises(ValueError):
            Block(1, -1, 2)
        with pytest.raises(ValueError):
            Block(1, 1, 2, step=2)

    def test_log_eval_matches_product(self):
        b = Block(Fraction(3, 2), Fraction(1, 3), 4)
        a = np.array([0.1, 1.0, 7.5, 2e6])
        direct = np.array([math.fsum(math.log(1.5 * v + 1 / 3 + j) for j in range(4)) for v in a])
        np.testing.assert_allclose(b.log_eval(a), direct, rtol=1e-13)

    def test_power_block(self):
        b = Block(2, 1, 3, step=0)
        assert b.log_eval(np.array([1.0]))[0] == pytest.approx(3 * math.log(3))


class TestExpand:
    def test_half_horseshoe(self):
        form = RationalForm((), (Block(1, 1, 2),))
        exp = expand(form)
        assert exp.log_norm_const == pytest.approx(math.log(math.log(2)), abs=1e-15)
        np.testing.assert_array_equal(exp.coefficient_values(), [1.0, -1.0])

    def test_double_pole(self):
        # 1 / ((a+1)^2 (a+2)) integrates to 1 - ln 2
        form = RationalForm((Block(1, 0, 1, step=0),), (Block(1, 0, 2), Block(1, 1, 2)))
        exp = expand(form)
        assert exp.max_order == 2
        assert exp.norm_const == pytest.approx(1 - math.log(2), rel=1e-13)
        assert not exp.numeric_fallback

    def test_cancellation_of_common_roots(self):
        # [a]^3 / ([a]^2 [a+1]^3) = (a+2) / ((a+1)^2 (a+2)(a+3)) after cancelling
        form = RationalForm((Block(1, 0, 3),), (Block(1, 0, 2), Block(1, 1, 3)))
        assert expand(form).norm_const == pytest.approx(_exact_norm(form), rel=1e-12)

    def test_coefficients_match_sympy(self):
        form = RationalForm((Block(1, 0, 2),), (Block(Fraction(3, 2), Fraction(1, 2), 5),))
        exp = expand(form)
        ref = partial_fraction_coefficients(_sym(form))
        for t in exp.terms:
            s, o = Fraction(t.scale), Fraction(t.offset)
            root = sp.Rational(o.numerator * s.denominator, o.denominator * s.numerator)
            A = ref[(root, t.order)] * sp.Rational(s.numerator, s.denominator) ** t.order
            assert t.value == pytest.approx(float(A), rel=1e-12)

    def test_integrability_errors(self):
        with pytest.raises(IntegrabilityError):
            expand(RationalForm((Block(1, 0, 1),), (Block(1, 1, 2),)))
        with pytest.raises(IntegrabilityError):
            expand(RationalForm((), (Block(1, 0, 2),)))

    def test_high_order_pole_uses_quadrature(self):
        form = RationalForm((), (Block(1, 1, 3, step=0), Block(1, 2, 1)))
        exp = expand(form)
        assert exp.numeric_fallback and exp.max_order == 3
        assert exp.norm_const == pytest.approx(_exact_norm(form), rel=1e-9)
        with pytest.raises(SizeBudgetError):
            expand(form, allow_fallback=False)

    def test_size_budget(self):
        form = RationalForm((), (Block(1, 1, 50),))
        exp = expand(form, size_budget=10)
        assert exp.numeric_fallback
        assert exp.log_norm_const == pytest.approx(exact_log_norm_const(form), rel=1e-9)

    @pytest.mark.parametrize("b", [10, 15, 20, 25, 30])
    def test_escalation_accuracy(self, b):
        form = RationalForm((Block(1, 0, 2),), (Block(1, 1, b),))
        exp = expand(form)
        assert exp.log_norm_const == pytest.approx(exact_log_norm_const(form), rel=1e-10)

    def test_escalation_happens(self):
        exp = expand(RationalForm((), (Block(1, 1, 25),)))
        assert exp.precision_used.is_extended

    def test_extended_request(self):
        form = RationalForm((), (Block(2, 1, 6),))
        e1 = expand(form, Precision.double())
        e2 = expand(form, Precision.extended(300))
        assert e2.precision_used.bits == 300
        assert e1.log_norm_const == pytest.approx(e2.log_norm_const, rel=1e-13)

    def test_very_large_b_falls_back(self):
        form = RationalForm((), (Block(1, 1, 400),))
        exp = expand(form)
        assert exp.numeric_fallback
        assert exp.log_norm_const == pytest.approx(exact_log_norm_const(form, bits=4000), rel=1e-9)


class TestExactOracle:
    def test_partial_fractions(self):
        out = exact_partial_fractions(RationalForm((Block(1, 0, 1),), (Block(1, 1, 3),)))
        assert out == [(Fraction(-1), 1, Fraction(-1, 2)), (Fraction(-2), 1, Fraction(2)),
                       (Fraction(-3), 1, Fraction(-3, 2))]

    def test_exact_log_norm_matches_sympy(self):
        form = RationalForm((Block(1, 0, 1),), (Block(1, 0, 2), Block(1, 1, 3)))
        assert math.exp(exact_log_norm_const(form)) == pytest.approx(_exact_norm(form), rel=1e-14)


class TestDistributionFunctions:
    def setup_method(self):
        self.exp = expand(RationalForm((), (Block(1, 1, 2),)))

    def test_cdf_closed_form(self):
        xs = np.array([0.0, 0.3, 2.0, 50.0, 1e8])
        ref = np.log(2 * (xs + 1) / (xs + 2)) / math.log(2)
        np.testing.assert_allclose(self.exp.cdf(xs), ref, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(self.exp.sf(xs), 1 - ref, rtol=1e-9, atol=1e-15)

    def test_ppf_roundtrip(self):
        u = np.array([1e-8, 0.01, 0.5, 0.99, 1 - 1e-9])
        np.testing.assert_allclose(self.exp.cdf(self.exp.ppf(u)), u, rtol=1e-10)

    def test_residue_pdf_equals_direct(self):
        xs = np.array([0.01, 0.1, 1, 10, 100])
        np.testing.assert_allclose(self.exp.residue_pdf(xs), self.exp.pdf(xs), rtol=1e-12)

    def test_numeric_cdf_table(self):
        form = RationalForm((), (Block(1, 1, 3, step=0), Block(1, 2, 1)))
        exp = expand(form)
        f = sp.lambdify(x, sp.integrate(_sym(form), (x, 0, x)) / exact_integral(_sym(form)), "mpmath")
        for v in (0.05, 0.7, 4.0, 90.0):
            assert exp.cdf(v) == pytest.approx(float(f(v)), rel=1e-9)

    def test_rvs_deterministic(self):
        np.testing.assert_array_equal(self.exp.rvs(50, seed=3), self.exp.rvs(50, seed=3))
        assert self.exp.rvs(0).size == 0

    def test_ppf_domain(self):
        with pytest.raises(ValueError):
            self.exp.ppf(1.0)


@st.composite
def random_forms(draw):
    """Small exact forms with integrable, strictly negative poles."""
    den = []
    for _ in range(draw(st.integers(1, 3))):
        s = Fraction(draw(st.integers(1, 4)), draw(st.integers(1, 3)))
        o = Fraction(draw(st.integers(1, 7)), draw(st.integers(1, 3)))
        den.append(Block(s, o, draw(st.integers(1, 4))))
    deg = sum(b.length for b in den)
    num = []
    room = deg - 2
    if room > 0:
        k = draw(st.integers(0, room))
        if k:
            num.append(Block(1, 0, k, step=draw(st.sampled_from([0, 1]))))
            if num[0].step == 1:
                # a rising factorial from 0 needs the zero root cancelled in the denominator
                num = [Block(1, 1, k)]
    if deg < 2:
        den.append(Block(1, 1, 2 - deg))
    return RationalForm(tuple(num), tuple(den))


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(random_forms())
    def test_normalizer_matches_exact(self, form):
        try:
            ref = exact_log_norm_const(form)
        except SizeBudgetError:
            return
        exp = expand(form)
        assert exp.log_norm_const == pytest.approx(ref, rel=1e-9, abs=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(random_forms())
    def test_normalizer_matches_quadrature(self, form):
        exp = expand(form)
        quad = log_integrate_halfline(lambda a: form.log_eval(a))
        assert exp.log_norm_const == pytest.approx(quad, rel=1e-8, abs=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(random_forms(), st.floats(0.0, 1e3))
    def test_cdf_bounded_and_monotone(self, form, t):
        exp = expand(form)
        xs = np.array([t, t * 1.5 + 0.1, t * 3 + 1])
        F = exp.cdf(xs)
        assert np.all((F >= 0) & (F <= 1))
        assert np.all(np.diff(F) >= -1e-12)
