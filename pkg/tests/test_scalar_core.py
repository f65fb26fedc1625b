"""Scalar layer: exact Gaussian rationals, enclosures, sigma functionals.

Derived expected values are frozen from independent oracles:
  * integer-square-root long division for sqrt(2);
  * mpmath.mp at 60 decimal digits for transcendental constants (a plain
    high-precision evaluator, independent of the interval code under test).
"""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpiso.errors import PEqualsTwoError
from lpiso.scalar_core import (
    CReal,
    DyadicInterval,
    GaussianRational,
    PExponent,
    abs_pow,
    approx_real,
    lamperti_constant,
    lamperti_objective,
    pow_enclosure,
    sigma1_scalar,
    sigma_scalar,
    signed_sigma1_scalar,
)

P1 = PExponent.from_fraction(1)
P32 = PExponent.from_fraction(Fraction(3, 2))
P3 = PExponent.from_fraction(3)
P4 = PExponent.from_fraction(4)


def gauss(re, im=0):
    return GaussianRational.of(Fraction(re), Fraction(im))


def hi_prec_oracle(expr_digits: str, k: int) -> Fraction:
    """Turn a frozen decimal-digit string into a Fraction good to 2**-k."""
    sign = -1 if expr_digits.startswith("-") else 1
    body = expr_digits.lstrip("-")
    intpart, frac = body.split(".")
    q = Fraction(int(intpart)) + Fraction(int(frac), 10 ** len(frac))
    assert 10 ** len(frac) > 2**k, "oracle digits too short for tolerance"
    return sign * q

# frozen from mpmath.mp (dps=60); see docstring
TWO_POW_3_4 = "1.681792830507429086062250952466429790080279987048327540"  # 2^(3/4)
C_1 = "0.853553390593273762200422181052424519642417968844237018294170"  # (2+sqrt 2)/4
C_3 = "0.603553390593273762200422181052424519642417968844237018294170"  # (1+sqrt 2)/4
F1_MID = "1.171572875253809902396622551580603842860656477860817597369510"  # 4-2 sqrt 2
F3_MID = "1.656854249492380195206754896838792314278687501507792533870240"  # 2 sqrt8 - 4


class TestApproxReal:
    def test_zero_constant(self):
        x = CReal.from_fraction(0)
        assert approx_real(x, 10) == 0

    def test_sqrt2_against_long_division(self):
        x = CReal.sqrt_of_fraction(2)
        q = approx_real(x, 4)
        # independent oracle: integer square root of 2 * 10^40
        digits = math.isqrt(2 * 10**40)
        truth = Fraction(digits, 10**20)
        assert abs(q - truth) < Fraction(1, 16) + Fraction(1, 10**18)

    def test_gamma_of_singleton_set(self):
        # gamma = sum over {1} of 2^-k = 1/2
        x = CReal.from_fraction(Fraction(1, 2))
        q = approx_real(x, 3)
        assert abs(q - Fraction(1, 2)) < Fraction(1, 8)

    def test_consistency_between_precisions(self):
        x = CReal.sqrt_of_fraction(5)
        for k in (2, 7, 13):
            for kp in (3, 11):
                assert abs(x.approx(k) - x.approx(kp)) < Fraction(1, 2**k) + Fraction(1, 2**kp)


class TestAbsPow:
    def test_zero(self):
        assert abs_pow(GaussianRational.zero(), P32, 20) == DyadicInterval.point(0)

    def test_integer_power_exact(self):
        box = abs_pow(gauss(2), P3, 20)
        assert box.is_point() and box.lo == 8

    def test_complex_fractional_power(self):
        box = abs_pow(gauss(1, 1), P32, 30)
        truth = hi_prec_oracle(TWO_POW_3_4, 40)
        assert box.contains(truth)
        assert box.width <= Fraction(1, 2**30)

    def test_even_power_of_complex_is_exact(self):
        box = abs_pow(gauss(Fraction(1, 2), Fraction(1, 3)), P4, 10)
        assert box.is_point()
        assert box.lo == (Fraction(1, 4) + Fraction(1, 9)) ** 2

    def test_refinement_is_monotone(self):
        coarse = abs_pow(gauss(3, 2), P32, 8)
        fine = abs_pow(gauss(3, 2), P32, 24)
        assert coarse.encloses(fine)


class TestSigma1:
    def test_vanishes_iff_product_zero(self):
        box = sigma1_scalar(gauss(1), gauss(0), P32, 30)
        assert box.contains(0) and box.width <= Fraction(1, 2**30)

    def test_p1_equal_units(self):
        box = sigma1_scalar(gauss(1), gauss(1), P1, 20)
        assert box.is_point() and box.lo == 2

    def test_p1_quarter(self):
        box = sigma1_scalar(gauss(Fraction(1, 4)), gauss(1), P1, 20)
        assert box.is_point() and box.lo == Fraction(1, 2)

    @given(
        re1=st.integers(-4, 4), im1=st.integers(-4, 4),
        re2=st.integers(-4, 4), im2=st.integers(-4, 4),
    )
    @settings(max_examples=40, deadline=None)
    def test_zero_exactly_on_disjoint_scalars(self, re1, im1, re2, im2):
        z, w = gauss(re1, im1), gauss(re2, im2)
        box = sigma1_scalar(z, w, P32, 35)
        if z.is_zero() or w.is_zero():
            assert box.contains(0)
        else:
            # refinement separates from zero
            refined = sigma1_scalar(z, w, P32, 60)
            assert refined.lo > 0


class TestLampertiConstant:
    def test_p1(self):
        box = lamperti_constant(P1, 30)
        assert box.contains(hi_prec_oracle(C_1, 40))
        assert box.width <= Fraction(1, 2**30)

    def test_p3(self):
        box = lamperti_constant(P3, 30)
        assert box.contains(hi_prec_oracle(C_3, 40))

    def test_p2_rejected(self):
        with pytest.raises(PEqualsTwoError):
            lamperti_constant(PExponent.from_fraction(2), 10)

    def test_creal_p_near_two_rejected(self):
        p = PExponent.from_creal(CReal.from_fraction(2))
        with pytest.raises(PEqualsTwoError):
            lamperti_constant(p, 10)


class TestSigmaScalar:
    def test_disjoint(self):
        box = sigma_scalar(gauss(1), gauss(0), P3, 25)
        assert box.contains(0)

    def test_p1_equal_units(self):
        box = sigma_scalar(gauss(1), gauss(1), P1, 30)
        truth = 2 * hi_prec_oracle(C_1, 40)
        assert box.contains(truth)

    def test_p1_quarter_below_half(self):
        # the distance-bound counterexample needs 2*sigma(x, 1) < 1 at x = 1/4
        box = sigma_scalar(gauss(Fraction(1, 4)), gauss(1), P1, 30)
        assert box.hi * 2 < 1
        assert box.contains(hi_prec_oracle(C_1, 40) / 2)


class TestLampertiObjective:
    def test_p1_theta0_t1(self):
        box = lamperti_objective(0, 1, P1, 20)
        assert box.is_point() and box.lo == 2

    def test_p1_mid_angle(self):
        box = lamperti_objective(Fraction(1, 2), 1, P1, 30)
        assert box.contains(hi_prec_oracle(F1_MID, 40))

    def test_p3_mid_angle(self):
        box = lamperti_objective(Fraction(1, 2), 1, P3, 30)
        assert box.contains(hi_prec_oracle(F3_MID, 40))

    def test_t_below_one_rejected(self):
        with pytest.raises(ValueError):
            lamperti_objective(0, Fraction(1, 2), P1, 10)

    def test_p2_rejected(self):
        with pytest.raises(PEqualsTwoError):
            lamperti_objective(0, 1, PExponent.from_fraction(2), 10)


@st.composite
def gaussian_rationals(draw):
    num = st.integers(-8, 8)
    den = st.integers(1, 6)
    return GaussianRational.of(
        Fraction(draw(num), draw(den)), Fraction(draw(num), draw(den))
    )


class TestLampertiInequality:
    """min{|z|^p, |w|^p} <= sigma(z, w) plus the per-branch sign claim."""

    @given(z=gaussian_rationals(), w=gaussian_rationals())
    @settings(max_examples=30, deadline=None)
    def test_min_below_sigma(self, z, w):
        for p in (P1, P32, P3, P4):
            s = sigma_scalar(z, w, p, 40)
            m = abs_pow(z, p, 40).min_with(abs_pow(w, p, 40))
            assert m.lo <= s.hi + Fraction(1, 2**38)

    @given(z=gaussian_rationals(), w=gaussian_rationals())
    @settings(max_examples=30, deadline=None)
    def test_sign_claim(self, z, w):
        for p in (P1, P32):
            box = signed_sigma1_scalar(z, w, p, 40)
            assert box.hi >= 0  # never strictly below zero
        for p in (P3, P4):
            box = signed_sigma1_scalar(z, w, p, 40)
            assert box.lo <= 0


class TestIntervalBasics:
    def test_outward_containment_through_arithmetic(self):
        a = DyadicInterval.of(Fraction(1, 3), Fraction(1, 2))
        b = DyadicInterval.of(Fraction(-1, 7), Fraction(2, 7))
        assert (a + b).contains(Fraction(1, 3) + Fraction(-1, 7))
        assert (a * b).contains(Fraction(1, 2) * Fraction(2, 7))
        assert (a - b).contains(Fraction(1, 3) - Fraction(2, 7))

    def test_reciprocal_needs_separation(self):
        with pytest.raises(ZeroDivisionError):
            DyadicInterval.of(-1, 1).reciprocal()

    def test_pow_enclosure_monotone_in_k(self):
        base = DyadicInterval.point(Fraction(7, 5))
        coarse = pow_enclosure(base, P32, 10)
        fine = pow_enclosure(base, P32, 30)
        assert coarse.encloses(fine)

    def test_parse_roundtrip(self):
        for text in ("1/1", "-1/2+1/2i", "i", "-i", "2i", "1/4-3i", "0"):
            z = GaussianRational.parse(text)
            again = GaussianRational.parse(str(z))
            assert z == again


class TestIrrationalExponent:
    """Nothing may assume the exponent has a rational fast path."""

    def setup_method(self):
        half_sqrt2 = CReal.sqrt_of_fraction(Fraction(1, 2))
        self.p = PExponent.from_creal(
            CReal(lambda k: 1 + half_sqrt2.approx(k), "1+sqrt(1/2)")
        )

    def test_certified_below_two(self):
        assert self.p.side_of_two() == -1

    def test_abs_pow_and_sigma(self):
        z = GaussianRational.of(Fraction(3, 2), Fraction(-1, 3))
        w = GaussianRational.of(Fraction(1, 4))
        box = abs_pow(z, self.p, 30)
        assert box.width <= Fraction(1, 2**30) and box.lo > 0
        s = sigma_scalar(z, w, self.p, 25)
        assert s.width <= Fraction(1, 2**25)
        m = abs_pow(z, self.p, 30).min_with(abs_pow(w, self.p, 30))
        assert m.lo <= s.hi + Fraction(1, 2**23)  # the inequality still certifies

    def test_enclosure_monotone(self):
        z = GaussianRational.of(Fraction(7, 5), Fraction(2, 9))
        assert abs_pow(z, self.p, 10).encloses(abs_pow(z, self.p, 26))
