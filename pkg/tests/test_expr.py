"""Core arithmetic: polynomials over Q(i), atoms, formulas."""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from loopbound.expr import (
    AnalysisError, Gaussian, G_I, G_ONE, Polynomial, TRUE, FALSE,
    cmp_eq, cmp_ge, cmp_gt, cmp_le, cmp_lt, cmp_ne, dnf, f_and, f_or,
    formula_atoms, formula_eval, formula_substitute, formula_variables,
    mono_of, parse_poly, var_key,
)

VARS = ["x1", "x2", "x3"]


def small_gaussians():
    fr = st.fractions(min_value=-4, max_value=4, max_denominator=3)
    return st.builds(Gaussian.of, fr, fr)


def small_polys():
    mono = st.lists(
        st.tuples(st.sampled_from(VARS), st.integers(1, 3)), max_size=2
    ).map(lambda ps: mono_of(*ps))
    term = st.tuples(mono, st.integers(-5, 5))
    return st.lists(term, max_size=4).map(
        lambda ts: sum((Polynomial({m: c}) for m, c in ts), Polynomial.zero())
    )


def states():
    return st.fixed_dictionaries({v: st.integers(-6, 6) for v in VARS})


class TestGaussian:
    def test_field_identities(self):
        a = Gaussian.of(Fraction(1, 2), Fraction(3, 2))
        assert a * a.conj() == Gaussian.of(a.abs_square())
        assert (a / a) == G_ONE
        assert G_I * G_I == Gaussian.of(-1)
        assert a ** 3 == a * a * a

    @given(small_gaussians(), small_gaussians(), small_gaussians())
    def test_ring_axioms(self, a, b, c):
        assert a * (b + c) == a * b + a * c
        assert (a + b) + c == a + (b + c)
        assert a * b == b * a

    def test_rational_projection(self):
        assert Gaussian.of(7).rational() == 7
        with pytest.raises(AnalysisError):
            G_I.rational()


class TestPolynomial:
    @given(small_polys(), small_polys(), small_polys())
    @settings(max_examples=60)
    def test_ring_axioms(self, p, q, r):
        assert p * (q + r) == p * q + p * r
        assert (p - p) == Polynomial.zero()
        assert p * q == q * p

    @given(small_polys(), small_polys(), states())
    @settings(max_examples=60)
    def test_evaluate_is_homomorphism(self, p, q, sigma):
        assert (p + q).evaluate(sigma) == p.evaluate(sigma) + q.evaluate(sigma)
        assert (p * q).evaluate(sigma) == p.evaluate(sigma) * q.evaluate(sigma)

    @given(small_polys(), small_polys(), states())
    @settings(max_examples=60)
    def test_substitute_then_evaluate(self, p, q, sigma):
        # p[x1/q] evaluated = p evaluated at x1 -> q(sigma)
        sub = p.substitute({"x1": q})
        inner = dict(sigma)
        inner["x1"] = q.evaluate(sigma)
        assert sub.evaluate(sigma) == p.evaluate(inner)

    def test_parse_examples(self):
        p = parse_poly("x4^2 - x3^5")
        assert p.degree() == 5
        assert str(parse_poly("3*x1 + 2*x2")) == "3*x1 + 2*x2"
        assert parse_poly("(x1+1)^2") == parse_poly("x1^2 + 2*x1 + 1")
        assert parse_poly("-x1*-x2") == parse_poly("x1*x2")

    def test_parse_rejects_unknown_variable(self):
        with pytest.raises(AnalysisError, match="unbound variable"):
            parse_poly("x1 + y7", allowed=["x1"])

    def test_parse_rejects_garbage(self):
        with pytest.raises(AnalysisError, match="parse error"):
            parse_poly("x1 + + 2 4")

    def test_linear_parts(self):
        coeffs, off = parse_poly("3*x1 - x2 + 7").linear_parts()
        assert coeffs == {"x1": 3, "x2": -1} and off == 7
        with pytest.raises(ValueError):
            parse_poly("x1*x2").linear_parts()

    def test_absolute_and_denominators(self):
        p = Polynomial({mono_of(("x1", 1)): Fraction(-3, 2), (): Fraction(1, 6)})
        assert p.absolute() == Polynomial(
            {mono_of(("x1", 1)): Fraction(3, 2), (): Fraction(1, 6)}
        )
        assert p.denominator_lcm() == 6

    def test_display_is_deterministic(self):
        p = parse_poly("x3^2 + 2*x3^5 + 2*x5")
        assert str(p) == "2*x3^5 + x3^2 + 2*x5"

    def test_var_key_orders_naturally(self):
        names = sorted(["x10", "x2", "x1"], key=var_key)
        assert names == ["x1", "x2", "x10"]


class TestFormulas:
    def test_comparison_encodings(self):
        x = Polynomial.var("x1")
        for val in (-2, -1, 0, 1, 2):
            sigma = {"x1": val}
            assert formula_eval(cmp_gt(x, 0), sigma) == (val > 0)
            assert formula_eval(cmp_ge(x, 0), sigma) == (val >= 0)
            assert formula_eval(cmp_lt(x, 1), sigma) == (val < 1)
            assert formula_eval(cmp_le(x, 1), sigma) == (val <= 1)
            assert formula_eval(cmp_eq(x, 0), sigma) == (val == 0)
            assert formula_eval(cmp_ne(x, 0), sigma) == (val != 0)

    def test_connective_shortcuts(self):
        a = cmp_gt(Polynomial.var("x1"), 0)
        assert f_and([a, TRUE]) == a
        assert f_and([a, FALSE]) == FALSE
        assert f_or([a, FALSE]) == a
        assert f_or([a, TRUE]) == TRUE

    @given(states())
    def test_dnf_preserves_semantics(self, sigma):
        x1, x2 = Polynomial.var("x1"), Polynomial.var("x2")
        f = f_and([f_or([cmp_gt(x1, 0), cmp_lt(x2, -1)]),
                   f_or([cmp_le(x1, 3), cmp_eq(x2, 0)]),
                   cmp_ne(x1, x2)])
        expect = formula_eval(f, sigma)
        got = any(all(formula_eval(a, sigma) for a in clause) for clause in dnf(f))
        assert got == expect

    def test_substitute_and_atoms(self):
        f = cmp_lt(parse_poly("x4^2 - x3^5"), Polynomial.var("x5"))
        g = formula_substitute(f, {"x5": parse_poly("2*y1 + y2")})
        assert formula_variables(g) == {"x3", "x4", "y1", "y2"}
        assert len(formula_atoms(g)) == 1
