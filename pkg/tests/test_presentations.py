"""Presentation layer: norm oracles, enumerated sets, computable vectors."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpiso.errors import NoBackdoorError, ZeroInCeSetError
from lpiso.lp_vectors import FinSuppVector, norm_p
from lpiso.presentations import (
    CeSet,
    ComputableVector,
    GenCombo,
    OracleAdapter,
    RotatedPresentation,
    StandardPresentation,
    adversarial_norm,
    build_adversarial,
    norm_approx,
    presentation_from_descriptor,
    sigma1_oracle,
    transparent_eval,
    vector_approx,
)
from lpiso.scalar_core import GaussianRational, PExponent

P1 = PExponent.from_fraction(1)
P32 = PExponent.from_fraction(Fraction(3, 2))


def combo(*coeffs):
    return GenCombo({j: GaussianRational.of(Fraction(c)) for j, c in enumerate(coeffs)})


@st.composite
def small_combos(draw, max_index=4):
    size = draw(st.integers(1, 3))
    entries = {}
    for _ in range(size):
        idx = draw(st.integers(0, max_index))
        re = Fraction(draw(st.integers(-5, 5)), draw(st.integers(1, 3)))
        im = Fraction(draw(st.integers(-5, 5)), draw(st.integers(1, 3)))
        entries[idx] = GaussianRational.of(re, im)
    return GenCombo(entries)


class TestCeSet:
    def test_enumeration_order_is_first_appearance(self):
        ce = CeSet.explicit([5, 2, 9], stages=[[5], [5, 2], [5, 2, 9]])
        assert ce.elements_prefix(3) == [5, 2, 9]

    def test_gamma_exact_for_finite(self):
        ce = CeSet.explicit([1])
        box = ce.gamma_enclosure(10)
        assert box.is_point() and box.lo == Fraction(1, 2)

    def test_gamma_two_sided_for_decidable_infinite(self):
        ce = CeSet.from_json({"kind": "named", "name": "odds"})
        box = ce.gamma_enclosure(12)
        assert box.contains(Fraction(2, 3))  # sum over odd n of 2^-n
        assert box.width <= Fraction(1, 2**12)

    def test_gamma_lower_monotone(self):
        ce = CeSet.explicit([1, 3], stages=[[1], [1, 3]])
        assert ce.gamma_lower(0) <= ce.gamma_lower(1) <= ce.gamma_lower(5)
        assert ce.gamma_lower(5) == Fraction(5, 8)

    def test_gamma_strictly_inside_unit_interval(self):
        for ce in (CeSet.explicit([1]), CeSet.explicit([2, 7]), CeSet.from_json({"kind": "named", "name": "odds"})):
            box = ce.gamma_enclosure(20)
            assert 0 < box.lo and box.hi < 1


class TestStandardAndRotated:
    def test_standard_norm(self):
        pres = StandardPresentation(P1)
        q = norm_approx(pres, combo(1, 1), 8)
        assert abs(q - 2) < Fraction(1, 2**8)

    def test_rotated_norm_bitwise_equal_to_standard(self):
        std = StandardPresentation(P1)
        rot = RotatedPresentation(P1, GaussianRational.of(0, 1))
        for k in (3, 9, 17):
            c = combo(1, 1)
            assert std.norm_approx(c, k) == rot.norm_approx(c, k)

    def test_rotated_backdoor_applies_zeta(self):
        rot = RotatedPresentation(P1, GaussianRational.of(0, 1))
        v = transparent_eval(rot, combo(1), 10)
        assert v == FinSuppVector({0: GaussianRational.of(0, 1)})

    def test_descriptor_roundtrip(self):
        for desc in (
            {"type": "standard", "p": "3/2"},
            {"type": "rotated", "zeta": "i", "p": "1"},
            {"type": "adversarial", "p": "1", "ce": {"kind": "explicit", "elements": [1, 3]}},
        ):
            pres = presentation_from_descriptor(desc)
            assert pres.descriptor()["type"] == desc["type"]


class TestAdversarialNorm:
    def test_f0_has_unit_norm(self):
        ce = CeSet.explicit([1])
        q = adversarial_norm(ce, P1, [GaussianRational.one()], 10)
        assert q == 1

    def test_lemma_combination(self):
        ce = CeSet.explicit([1])
        q = adversarial_norm(
            ce, P1, [GaussianRational.one(), GaussianRational.of(Fraction(-1, 2))], 10
        )
        assert abs(q - Fraction(1, 2)) < Fraction(1, 2**10)

    def test_pure_tail_generator(self):
        ce = CeSet.explicit([1])
        q = adversarial_norm(
            ce, P32, [GaussianRational.zero(), GaussianRational.of(Fraction(3, 4))], 10
        )
        assert abs(q - Fraction(3, 4)) < Fraction(1, 2**10)

    def test_finite_set_degenerate_terms(self):
        # coefficient far beyond the single element of C: no f_0 overlap
        ce = CeSet.explicit([1])
        c = GenCombo({0: GaussianRational.one(), 5: GaussianRational.of(2)})
        pres = build_adversarial(ce, P1)
        q = pres.norm_approx(c, 10)
        assert abs(q - 3) < Fraction(1, 2**10)

    def test_zero_in_c_rejected(self):
        with pytest.raises(ZeroInCeSetError):
            build_adversarial(CeSet.explicit([0, 1]), P1)


class TestAdversarialBackdoor:
    def test_f0_vector_p1(self):
        pres = build_adversarial(CeSet.explicit([1]), P1)
        v = pres.f0_vector(12)
        assert v[0] == GaussianRational.of(Fraction(1, 2))
        assert v[1] == GaussianRational.of(Fraction(1, 2))

    def test_f0_vector_p32_head(self):
        pres = build_adversarial(CeSet.explicit([1]), P32)
        v = pres.f0_vector(20)
        # (1/2)^(2/3) = 0.6299605249...
        truth = Fraction(62996052494743658238, 10**20)
        assert abs(v[0].re - truth) < Fraction(1, 2**16)

    def test_transparent_eval_cancellation(self):
        pres = build_adversarial(CeSet.explicit([1]), P1)
        c = GenCombo({0: GaussianRational.one(), 1: GaussianRational.of(Fraction(-1, 2))})
        v = transparent_eval(pres, c, 10)
        assert v == FinSuppVector({0: GaussianRational.of(Fraction(1, 2))})

    def test_opaque_presentation_refuses_backdoor(self):
        stages = [frozenset([1]), frozenset([1, 4])]
        ce = CeSet(lambda t: stages[min(t, 1)], decide=None, complete_size=2)
        pres = build_adversarial(ce, P1)
        with pytest.raises(NoBackdoorError):
            transparent_eval(pres, combo(1), 4)

    @given(c=small_combos())
    @settings(max_examples=15, deadline=None)
    def test_oracle_consistent_with_backdoor(self, c):
        pres = build_adversarial(CeSet.explicit([1, 3]), P1)
        k = 12
        q = pres.norm_approx(c, k)
        v = pres.transparent_eval(c, k + 2)
        box = norm_p(v, P1, k + 2)
        # |oracle - ||transparent||| < 2^-k + transparent eval error
        assert abs(q - box.mid) < Fraction(1, 2 ** (k - 1))

    def test_e0_combo_close_to_e0(self):
        for p, kk in ((P1, 8), (P32, 8)):
            pres = build_adversarial(CeSet.explicit([1, 2]), p)
            g = pres.e0_combo(kk)
            v = pres.transparent_eval(g, kk + 3)
            diff = v - FinSuppVector.basis(0)
            box = norm_p(diff, p, kk + 3)
            assert box.hi < Fraction(1, 2**kk) + Fraction(1, 2 ** (kk + 2))


class TestOracleProperties:
    @given(c=small_combos(), d=small_combos())
    @settings(max_examples=10, deadline=None)
    def test_triangle_inequality_within_tolerance(self, c, d):
        pres = build_adversarial(CeSet.explicit([2]), P32)
        k = 10
        tol = Fraction(3, 2**k)
        assert pres.norm_approx(c + d, k) <= pres.norm_approx(c, k) + pres.norm_approx(d, k) + tol

    @given(c=small_combos())
    @settings(max_examples=10, deadline=None)
    def test_homogeneity_within_tolerance(self, c):
        pres = StandardPresentation(P32)
        k = 10
        tol = Fraction(5, 2**k)
        doubled = c.scale(GaussianRational.of(2))
        assert abs(pres.norm_approx(doubled, k) - 2 * pres.norm_approx(c, k)) <= tol

    def test_sigma1_oracle_matches_vector_sigma1(self):
        pres = StandardPresentation(P1)
        box = sigma1_oracle(pres, combo(1), combo(0, 1), 12)
        assert box.contains(0)
        box2 = sigma1_oracle(pres, combo(1), combo(1), 12)
        assert box2.contains(2)


class TestComputableVector:
    def test_constant(self):
        pres = StandardPresentation(P1)
        v = ComputableVector.constant(combo(1, 2), pres)
        assert vector_approx(v, 3) == combo(1, 2)
        assert vector_approx(v, 30) == combo(1, 2)

    def test_geometric_tail_truncation(self):
        pres = StandardPresentation(P1)

        def approx(k):
            # tail sum_{n > k} 2^-n = 2^-k, so truncate one step further
            return GenCombo(
                {n: GaussianRational.of(Fraction(1, 2**n)) for n in range(k + 2)}
            )

        v = ComputableVector(approx, pres, "geometric")
        c3 = vector_approx(v, 3)
        assert c3.max_index() >= 3
        box = v.norm_enclosure(6)
        assert box.contains(2)  # sum 2^-n = 2

    def test_f0_expansion_over_standard(self):
        adv = build_adversarial(CeSet.explicit([1, 3]), P1)
        std = StandardPresentation(P1)

        def approx(k):
            return GenCombo(adv.f0_vector(k).entries)

        v = ComputableVector(approx, std, "f0-over-E")
        box = v.norm_enclosure(10)
        assert box.contains(1)  # ||f_0|| = 1

    def test_scale_gauss(self):
        pres = StandardPresentation(P1)
        v = ComputableVector.constant(combo(1), pres).scale_gauss(GaussianRational.of(3))
        assert v.approx(4) == combo(3)


class TestOracleAdapter:
    def test_transparent_membership(self):
        oracle = OracleAdapter(CeSet.explicit([1, 3]), "transparent")
        assert oracle.is_member(3) and not oracle.is_member(2)
        assert not oracle.provisional

    def test_staged_is_provisional(self):
        ce = CeSet.explicit([1, 3], stages=[[1], [1, 3]])
        oracle = OracleAdapter(ce, "staged", stage_budget=0)
        assert oracle.provisional
        assert oracle.is_member(1) and not oracle.is_member(3)  # not yet enumerated

    def test_staged_gamma_is_one_sided(self):
        ce = CeSet.explicit([1, 3], stages=[[1], [1, 3]])
        oracle = OracleAdapter(ce, "staged", stage_budget=0)
        box = oracle.gamma_enclosure(10)
        assert box.lo == Fraction(1, 2) and box.hi == 1


class TestEnumerationStall:
    def test_norm_query_beyond_available_elements(self):
        # an incomplete enumeration that stops revealing elements: a norm
        # query that needs more of them fails loudly instead of guessing
        from lpiso.errors import EnumerationStalledError

        ce = CeSet(lambda t: frozenset([1]), decide=None, complete_size=None,
                   label="stalled", max_stage=128)
        pres = build_adversarial(ce, P1)
        wide = GenCombo({0: GaussianRational.one(), 3: GaussianRational.one()})
        with pytest.raises(EnumerationStalledError):
            pres.norm_approx(wide, 6)


class TestNonTrivialRotation:
    def test_three_four_five_zeta(self):
        zeta = GaussianRational.of(Fraction(3, 5), Fraction(4, 5))
        rot = RotatedPresentation(P1, zeta)
        std = StandardPresentation(P1)
        c = combo(1, Fraction(1, 2))
        assert rot.norm_approx(c, 12) == std.norm_approx(c, 12)
        v = rot.transparent_eval(GenCombo.single(0), 8)
        assert v[0] == zeta
        # encode then evaluate round-trips exactly for unimodular zeta
        back = rot.encode_vector(v, 8)
        assert back == GenCombo.single(0)


class TestInfiniteDecidableSet:
    def test_e0_over_odds(self):
        ce = CeSet.from_json({"kind": "named", "name": "odds"})
        pres = build_adversarial(ce, P1)
        g = pres.e0_combo(8)
        v = pres.transparent_eval(g, 12)
        diff = v - FinSuppVector({0: GaussianRational.one()})
        assert norm_p(diff, P1, 12).hi < Fraction(1, 2**8)

    @given(c=small_combos(max_index=3))
    @settings(max_examples=10, deadline=None)
    def test_oracle_consistency_p32(self, c):
        pres = build_adversarial(CeSet.explicit([1, 3]), P32)
        k = 10
        q = pres.norm_approx(c, k)
        v = pres.transparent_eval(c, k + 2)
        box = norm_p(v, P32, k + 2)
        assert abs(q - box.mid) < Fraction(1, 2 ** (k - 1))
