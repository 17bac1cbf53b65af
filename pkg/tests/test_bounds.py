"""Bound algebra: scalars, normal forms, classification, interval evaluation."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from loopbound.bounds import (
    AsymptoticClass, BConst, BVar, B_OMEGA, B_ONE, B_ZERO, Scalar,
    bconst, bexp, blog, bmax, bpow, bprod, bsum, bound_at_least,
    classify, dominates, interval_eval, is_omega, least_rational_upper_log2,
    poly_to_bound, simplify, substitute,
)
from loopbound.expr import parse_poly

X, Y = BVar("x"), BVar("y")


def float_eval(b, state):
    """Independent floating-point reference for interval_eval."""
    from loopbound import bounds as m

    if isinstance(b, m.BConst):
        v = b.value
        assert not v.infinite
        return float(v.rat) + float(v.rad) * math.sqrt(v.radicand)
    if isinstance(b, m.BVar):
        return float(state[b.name])
    if isinstance(b, m.BSum):
        return sum(float_eval(p, state) for p in b.parts)
    if isinstance(b, m.BProd):
        out = 1.0
        for p in b.parts:
            out *= float_eval(p, state)
        return out
    if isinstance(b, m.BMax):
        return max(float_eval(p, state) for p in b.parts)
    if isinstance(b, m.BPow):
        return float_eval(b.base, state) ** float(b.exponent)
    if isinstance(b, m.BExp):
        return float(b.base) ** float_eval(b.exponent, state)
    return math.log(max(1.0, float_eval(b.arg, state)), float(b.base))


def bound_exprs(depth=3):
    leaves = st.one_of(
        st.sampled_from([X, Y, B_ONE]),
        st.fractions(min_value=0, max_value=4, max_denominator=3).map(bconst),
    )
    if depth == 0:
        return leaves
    sub = bound_exprs(depth - 1)
    return st.one_of(
        leaves,
        st.lists(sub, min_size=2, max_size=3).map(bsum),
        st.lists(sub, min_size=2, max_size=2).map(bprod),
        st.lists(sub, min_size=2, max_size=2).map(bmax),
        st.tuples(sub, st.sampled_from([Fraction(2), Fraction(1, 2), Fraction(3)])).map(
            lambda t: bpow(*t)),
        sub.map(lambda e: blog(2, e)),
        sub.map(lambda e: blog(Fraction(3, 2), e)),
    )


def small_states():
    return st.fixed_dictionaries(
        {"x": st.integers(0, 9), "y": st.integers(0, 9)}
    )


class TestScalar:
    def test_root_normalization(self):
        assert Scalar.root(Fraction(10)) == Scalar(Fraction(0), Fraction(1), 10)
        assert Scalar.root(Fraction(9, 4)) == Scalar(Fraction(3, 2))
        assert Scalar.root(Fraction(8)) == Scalar(Fraction(0), Fraction(2), 2)
        assert Scalar.root(Fraction(0)) == Scalar(Fraction(0))

    def test_arithmetic(self):
        r10 = Scalar.root(Fraction(10))
        two = Scalar.of(2)
        s = two.add(r10)
        assert str(s) == "2+sqrt(10)"
        assert r10.mul(r10) == Scalar.of(10)
        assert Scalar.root(Fraction(2)).mul(Scalar.root(Fraction(5))) == r10
        # incompatible radicands cannot be merged into one scalar
        assert Scalar.root(Fraction(2)).add(Scalar.root(Fraction(3))) is None

    def test_comparisons(self):
        r10 = Scalar.root(Fraction(10))
        assert r10.cmp(Scalar.of(3)) > 0
        assert r10.cmp(Scalar.of(4)) < 0
        assert Scalar.of(2).add(r10).cmp(Scalar.of(5)) > 0
        assert Scalar.root(Fraction(2)).cmp(Scalar.root(Fraction(3))) < 0
        assert Scalar.root(Fraction(2)).cmp(Scalar.root(Fraction(2))) == 0
        assert Scalar(Fraction(0), infinite=True).cmp(Scalar.of(10 ** 12)) > 0


class TestConstruction:
    def test_neutral_elements(self):
        assert bsum([B_ZERO, X]) == X
        assert bprod([B_ONE, X]) == X
        assert bprod([B_ZERO, X]) == B_ZERO
        assert bsum([]) == B_ZERO
        assert bprod([]) == B_ONE

    def test_omega_saturates(self):
        assert is_omega(bsum([X, B_OMEGA]))
        assert is_omega(bprod([X, B_OMEGA]))
        assert is_omega(bmax([X, B_OMEGA]))
        assert bprod([B_ZERO, B_OMEGA]) == B_ZERO

    def test_constant_folding(self):
        assert bexp(2, bconst(5)) == bconst(32)
        assert blog(2, bconst(8)) == bconst(3)
        assert blog(2, bconst(1)) == B_ZERO
        assert bpow(bconst(Fraction(9, 4)), Fraction(1, 2)) == bconst(Fraction(3, 2))
        assert bpow(X, 0) == B_ONE and bpow(X, 1) == X

    def test_max_folds_constants_and_dominated(self):
        assert bmax([bconst(2), bconst(5)]) == bconst(5)
        assert bmax([X, bsum([bconst(1), X])]) == bsum([bconst(1), X])
        m = bmax([X, bprod([bconst(2), Y])])
        assert str(m) == "max{x, 2*y}"

    def test_poly_to_bound_takes_absolute_coefficients(self):
        b = poly_to_bound(parse_poly("x3^2 - 2*x3^5 - 2*x5"))
        assert str(b) == "x3^2 + 2*x3^5 + 2*x5"


class TestSimplify:
    def test_collects_like_terms(self):
        r10x = bprod([BConst(Scalar.root(Fraction(10))), X])
        twox = bprod([bconst(2), X])
        assert str(simplify(bsum([r10x, twox]))) == "(2+sqrt(10))*x"

    def test_merges_powers(self):
        assert simplify(bprod([X, X])) == bpow(X, 2)
        assert simplify(bprod([bpow(X, 2), bpow(X, Fraction(1, 2))])) == bpow(
            X, Fraction(5, 2))

    @given(bound_exprs(), )
    @settings(max_examples=80, deadline=None)
    def test_idempotent(self, b):
        s = simplify(b)
        assert simplify(s) == s

    @given(bound_exprs(2), small_states())
    @settings(max_examples=80, deadline=None)
    def test_preserves_value(self, b, sigma):
        lo, hi = interval_eval(b, sigma, 40)
        ref = float_eval(simplify(b), sigma)
        assert float(lo) - 1e-6 <= ref <= float(hi) + 1e-6


class TestIntervalEval:
    @given(bound_exprs(2), small_states())
    @settings(max_examples=100, deadline=None)
    def test_encloses_float_reference(self, b, sigma):
        lo, hi = interval_eval(b, sigma, 40)
        assert lo <= hi
        ref = float_eval(b, sigma)
        assert float(lo) - 1e-6 <= ref <= float(hi) + 1e-6

    def test_precision_gives_tight_widths(self):
        u = poly_to_bound(parse_poly("x3^2 + 2*x3^5 + 2*x5"))
        b = bsum([bconst(3), bprod([bconst(3), blog(2, u)])])
        lo, hi = interval_eval(b, {"x3": 2, "x5": 10}, 32)
        assert hi - lo < Fraction(1, 100)
        assert Fraction(2237, 100) <= lo and hi <= Fraction(2239, 100)

    def test_bound_at_least(self):
        b = blog(2, X)
        assert bound_at_least(b, {"x": 1024}, 10)
        assert not bound_at_least(b, {"x": 1024}, 11)
        assert bound_at_least(B_OMEGA, {}, 10 ** 9)


class TestClassify:
    def test_basic_classes(self):
        assert str(classify(bconst(7))) == "Const"
        assert str(classify(X)) == "Poly(1)"
        assert str(classify(bprod([X, X, Y]))) == "Poly(3)"
        assert str(classify(blog(2, X))) == "Polylog(1)"
        assert str(classify(bprod([X, blog(2, X)]))) == "Poly(1)*Polylog(1)"
        assert str(classify(bexp(2, X))) == "Exp"
        assert str(classify(blog(2, bexp(2, X)))) == "Poly(1)"
        assert str(classify(B_OMEGA)) == "Infinite"

    def test_fractional_degrees_round_up(self):
        b = bprod([bpow(X, Fraction(62, 13)), X])
        assert str(classify(b)) == "Poly(6)"

    def test_order(self):
        assert AsymptoticClass.poly(1) < AsymptoticClass.poly(1, 1)
        assert AsymptoticClass.poly(3) < AsymptoticClass.exp()
        assert AsymptoticClass.exp() < AsymptoticClass.unbounded()
        assert AsymptoticClass.const() < AsymptoticClass.poly(0, 1)


class TestDominance:
    def test_poly_cases(self):
        assert dominates(bsum([bconst(1), X]), X)
        assert not dominates(X, bsum([bconst(1), X]))
        assert dominates(bprod([bconst(3), X]), bprod([bconst(2), X]))
        assert dominates(blog(2, bsum([X, Y])), blog(2, X))

    @given(bound_exprs(2), bound_exprs(2), small_states())
    @settings(max_examples=80, deadline=None)
    def test_dominance_is_sound(self, a, b, sigma):
        if dominates(a, b):
            assert float_eval(a, sigma) >= float_eval(b, sigma) - 1e-6


class TestSubstitute:
    def test_substitution(self):
        b = bsum([X, blog(2, Y)])
        got = substitute(b, {"x": bprod([bconst(2), Y]), "y": bconst(8)})
        assert got == bsum([bprod([bconst(2), Y]), bconst(3)])


class TestRationalRounding:
    def test_exponent_presentation_values(self):
        # least rational above 3*log2(3) with denominator <= 16
        assert least_rational_upper_log2(Fraction(3), Fraction(3), 16) == Fraction(62, 13)
        # least rational above log2(2)/log2(32/19) is handled by the caller
        # via coeff=1, arg=2 base-change; the exact-power path:
        assert least_rational_upper_log2(Fraction(1), Fraction(8), 1) == 3

    def test_upper_property(self):
        for coeff, arg, den in [(Fraction(3), Fraction(3), 16),
                                (Fraction(2), Fraction(5, 3), 7),
                                (Fraction(1, 2), Fraction(7), 4)]:
            r = least_rational_upper_log2(coeff, arg, den)
            target = float(coeff) * math.log2(float(arg))
            assert r.denominator <= den
            assert float(r) >= target - 1e-12
            # minimality: the largest p/q below r undershoots the target
            for q in range(1, den + 1):
                cand = Fraction((r.numerator * q) // r.denominator, q)
                if cand < r:
                    assert float(cand) < target + 1e-9
