"""Closed forms of solvable updates as poly-exponential expressions.

A poly-exponential expression is a finite sum of p(vars) * n^a * b^n
summands with a natural exponent a and a Gaussian rational base b.  Closed
forms of triangular updates are computed by exact summation (undetermined
coefficients); solvable updates are first conjugated into triangular shape
through the Jordan basis of each variable block.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, lcm
from typing import Mapping, Optional, Sequence

from .bounds import (
    Bound, BVar, Scalar, BConst, bconst, bexp, bpow, bprod, bsum, simplify,
)
from .expr import (
    AnalysisError, G_ONE, G_ZERO, Gaussian, Polynomial, as_gaussian, var_key,
)
from .linalg import Matrix
from .loops import (
    Automorphism, Loop, build_automorphism, conjugate_update,
    strongly_connected_components,
)


@dataclass(frozen=True)
class PolyExp:
    """Sum of poly * n^a * b^n summands, normalized and ordered by (b, a).

    0^0 counts as 1, so a summand with base 0 only contributes at n = 0.
    """

    summands: tuple  # tuple[(Polynomial, int, Gaussian), ...]

    @staticmethod
    def of(items: "Sequence[tuple[Polynomial, int, Gaussian]]") -> "PolyExp":
        merged: dict = {}
        for poly, a, b in items:
            key = (a, b)
            merged[key] = merged.get(key, Polynomial.zero()) + poly
        out = [(p, a, b) for (a, b), p in merged.items() if p]
        out.sort(key=lambda t: (t[2].re, t[2].im, t[1]))
        return PolyExp(tuple(out))

    @staticmethod
    def const(poly: Polynomial) -> "PolyExp":
        return PolyExp.of([(poly, 0, G_ONE)])

    @staticmethod
    def zero() -> "PolyExp":
        return PolyExp(())

    def __add__(self, other: "PolyExp") -> "PolyExp":
        return PolyExp.of(self.summands + other.summands)

    def __sub__(self, other: "PolyExp") -> "PolyExp":
        return self + other.scale(-1)

    def scale(self, c) -> "PolyExp":
        g = as_gaussian(c)
        return PolyExp.of([(p.scale(g), a, b) for p, a, b in self.summands])

    def __mul__(self, other: "PolyExp") -> "PolyExp":
        out: list = []
        for p1, a1, b1 in self.summands:
            for p2, a2, b2 in other.summands:
                out.append((p1 * p2, a1 + a2, b1 * b2))
        return PolyExp.of(out)

    def __pow__(self, k: int) -> "PolyExp":
        result = PolyExp.const(Polynomial.one())
        for _ in range(k):
            result = result * self
        return result

    def substitute_vars(self, mapping: "Mapping[str, Polynomial]") -> "PolyExp":
        return PolyExp.of(
            [(p.substitute(mapping), a, b) for p, a, b in self.summands])

    def shift_down(self) -> "tuple[PolyExp, int]":
        """The expression at n-1 as an expression at n, for n >= 1.

        Base-0 summands cannot be shifted exactly; they are dropped and the
        returned start offset (2) accounts for them vanishing at n-1 >= 1.
        """
        out: list = []
        start = 1
        for p, a, b in self.summands:
            if not b:
                start = 2
                continue
            inv = G_ONE / b
            for k in range(a + 1):
                coeff = as_gaussian(comb(a, k) * (-1) ** (a - k))
                out.append((p.scale(coeff * inv), k, b))
        return PolyExp.of(out), start

    def evaluate(self, state: "Mapping[str, object]", n: int) -> Gaussian:
        return self.at(n).evaluate(state)

    def at(self, n: int) -> Polynomial:
        """The value at a fixed index as a polynomial in the variables."""
        out = Polynomial.zero()
        for p, a, b in self.summands:
            if not b:
                if n == 0 and a == 0:
                    out = out + p
                continue
            out = out + p.scale(as_gaussian(n ** a) * b ** n)
        return out

    def variables(self) -> "set[str]":
        out: set = set()
        for p, _, _ in self.summands:
            out |= p.variables()
        return out

    @property
    def is_rational(self) -> bool:
        return all(b.is_rational and p.is_rational for p, _, b in self.summands)

    def as_polynomial(self) -> "Optional[Polynomial]":
        """The underlying polynomial when no n dependence remains."""
        poly = Polynomial.zero()
        for p, a, b in self.summands:
            if a != 0 or b != G_ONE:
                return None
            poly = poly + p
        return poly

    def denominator_lcm(self) -> int:
        out = 1
        for p, _, b in self.summands:
            out = lcm(out, p.denominator_lcm(), b.re.denominator, b.im.denominator)
        return out

    def __str__(self) -> str:
        if not self.summands:
            return "0"
        chunks: list = []
        for p, a, b in self.summands:
            bits = [f"({p})"]
            if a:
                bits.append("n" if a == 1 else f"n^{a}")
            if b != G_ONE:
                bits.append(f"({b})^n")
            chunks.append("*".join(bits))
        return " + ".join(chunks)


def _faulhaber(a: int) -> Polynomial:
    """Q with Q(n) = sum_(k=0)^(n-1) k^a, degree a+1, exact coefficients."""
    nvar = Polynomial.var("n")
    # undetermined coefficients: Q(n) = sum c_d n^d, fit on a+2 points
    points = [(m, sum(k ** a for k in range(m))) for m in range(a + 2)]
    rows = [[Fraction(m) ** d for d in range(a + 2)] for m, _ in points]
    rhs = [as_gaussian(val) for _, val in points]
    sol = _solve_rational(rows, rhs)
    poly = Polynomial.zero()
    for d, c in enumerate(sol):
        poly = poly + (nvar ** d).scale(c)
    # safety: the fit must reproduce further points exactly
    for m in (a + 2, a + 3):
        if poly.evaluate({"n": m}).rational() != sum(k ** a for k in range(m)):
            raise AnalysisError("summation reduction failed")
    return poly


def _solve_rational(rows, rhs):
    from .linalg import solve

    m = Matrix.from_rows(rows)
    sol = solve(m, rhs)
    if sol is None:
        raise AnalysisError("summation reduction failed")
    return sol


def geometric_power_sum(c: Gaussian, b: Gaussian, a: int) -> "tuple[PolyExp, int]":
    """Closed form of S(n) = sum_(m=1)^n c^(n-m) * (m-1)^a * b^(m-1).

    Returns the poly-exponential expression (with coefficient polynomials
    constant in the program variables) and its start value.
    """
    nvar = Polynomial.var("n")
    one = Polynomial.one()
    if not c:
        # only m = n contributes (0^(n-m) with n >= m), for n >= 1
        if not b:
            # (n-1)^a * 0^(n-1): vanishes for n >= 2
            return PolyExp.zero(), 2
        shifted = PolyExp.of([(one, a, b)]).shift_down()[0]
        return shifted, 1
    if not b:
        # only m = 1 contributes: c^(n-1) * 0^a
        if a != 0:
            return PolyExp.zero(), 1
        return PolyExp.of([(one.scale(G_ONE / c), 0, c)]), 1
    if c == b:
        # c^(n-1) * sum_(k=0)^(n-1) k^a
        q = _faulhaber(a)
        inv = G_ONE / c
        summands = []
        for mono, coeff in q.terms.items():
            deg = mono[0][1] if mono else 0
            summands.append((Polynomial.const(coeff * inv), deg, c))
        return PolyExp.of(summands), 0
    # distinct nonzero bases: S(n) = alpha*c^n + R(n)*b^n with deg R <= a
    # from the recurrence S(n+1) = c*S(n) + n^a*b^n:  b*R(n+1) - c*R(n) = n^a
    unknowns = a + 1
    rows = []
    rhs = []
    for power in range(unknowns):
        row = []
        for d in range(unknowns):
            # coefficient of n^power in b*(n+1)^d - c*n^d
            coeff = b * comb(d, power) if power <= d else G_ZERO
            if d == power:
                coeff = coeff - c
            row.append(coeff)
        rows.append(row)
        rhs.append(G_ONE if power == a else G_ZERO)
    sol = _solve_rational(rows, rhs)
    r_poly_terms = [(d, sol[d]) for d in range(unknowns)]
    r_at_1 = G_ZERO
    for _, coeff in r_poly_terms:
        r_at_1 = r_at_1 + coeff
    s1 = G_ONE if a == 0 else G_ZERO
    alpha = (s1 - b * r_at_1) / c
    summands = [(Polynomial.const(alpha), 0, c)]
    for d, coeff in r_poly_terms:
        if coeff:
            summands.append((Polynomial.const(coeff), d, b))
    pe = PolyExp.of(summands)
    # verify on a few points against the defining sum
    for n in (0, 1, 2, 3, 4):
        direct = G_ZERO
        for m in range(1, n + 1):
            direct = direct + c ** (n - m) * as_gaussian((m - 1) ** a) * b ** (m - 1)
        if pe.evaluate({}, n) != direct:
            raise AnalysisError("summation reduction failed")
    return pe, 0


def twn_order(update: "Mapping[str, Polynomial]") -> "Optional[list[str]]":
    """Order variables so each update is c*v + tail(earlier), or None."""
    names = sorted(update, key=var_key)
    graph = {v: sorted((update[v].variables() & set(names)) - {v}, key=var_key)
             for v in names}
    comps = list(reversed(strongly_connected_components(graph)))
    order: list = []
    for comp in comps:
        if len(comp) != 1:
            return None
        (v,) = comp
        # v may appear only as a linear self-term
        for mono, _ in update[v].terms.items():
            degree_in_v = sum(e for w, e in mono if w == v)
            if degree_in_v == 0:
                continue
            if degree_in_v > 1 or len(mono) > 1:
                return None
        order.append(v)
    return order


@dataclass(frozen=True)
class ClosedForm:
    """Closed forms per variable with a common start value."""

    forms: dict  # dict[str, PolyExp]
    start: int

    def __getitem__(self, var: str) -> PolyExp:
        return self.forms[var]


def closed_form_twn(update: "Mapping[str, Polynomial]") -> ClosedForm:
    """Closed form of a triangular weakly non-linear update over Q(i)."""
    order = twn_order(update)
    if order is None:
        raise AnalysisError("update is not triangular")
    forms: dict = {}
    starts: dict = {}
    for v in order:
        poly = update[v]
        c = G_ZERO
        tail = Polynomial.zero()
        for mono, coeff in poly.terms.items():
            if mono and any(w == v for w, _ in mono):
                c = coeff
            else:
                tail = tail + Polynomial({mono: coeff})
        tail_pe = PolyExp.zero()
        tail_start = 0
        if tail:
            tail_pe = poly_to_pe(tail, forms)
            tail_start = max([starts[w] for w in tail.variables()] + [0])
        cl, start = _solve_recurrence(v, c, tail, tail_pe, tail_start, update)
        forms[v] = cl
        starts[v] = start
    start = max(starts.values(), default=0)
    return ClosedForm(forms, start)


def poly_to_pe(poly: Polynomial, forms: "Mapping[str, PolyExp]") -> PolyExp:
    result = PolyExp.zero()
    for mono, coeff in poly.sorted_terms():
        term = PolyExp.const(Polynomial.const(coeff))
        for w, e in mono:
            base = forms.get(w)
            if base is None:
                base = PolyExp.const(Polynomial.var(w))
            term = term * base ** e
        result = result + term
    return result


def _solve_recurrence(v: str, c: Gaussian, tail: Polynomial, tail_pe: PolyExp,
                      tail_start: int, update: "Mapping[str, Polynomial]"):
    """cl(n) for x(n+1) = c*x(n) + tail(state at step n), x(0) = v."""
    if not tail:
        # with c = 0 the base-0 summand is exact even at n = 0
        return PolyExp.of([(Polynomial.var(v), 0, c)]), 0
    if not c:
        # x(n) = tail evaluated at step n-1; valid once the tail form is
        shifted, shift_start = tail_pe.shift_down()
        start = max(shift_start, tail_start + 1)
        return shifted, start
    parts = [PolyExp.of([(Polynomial.var(v), 0, c)])]
    start = tail_start
    for p, a, b in tail_pe.summands:
        s_pe, s_start = geometric_power_sum(c, b, a)
        parts.append(s_pe * PolyExp.const(p))
        start = max(start, s_start)
    total = parts[0]
    for extra in parts[1:]:
        total = total + extra
    if tail_start > 0:
        # the PE form of the tail is only valid from tail_start on; patch the
        # first tail_start summation terms with exact symbolic iterates
        correction = Polynomial.zero()
        inv = G_ONE / c
        acc = {w: Polynomial.var(w) for w in update}
        for m in range(1, tail_start + 1):
            true_val = tail.substitute(acc)  # tail at step m-1
            correction = correction + (true_val - tail_pe.at(m - 1)).scale(inv ** m)
            acc = {w: update[w].substitute(acc) for w in acc}
        if correction:
            total = total + PolyExp.of([(correction, 0, c)])
    return total, start


# ---------------------------------------------------------------------------
# Solvable updates: conjugation through the Jordan basis.


def closed_form_solvable(loop: Loop):
    """Closed form for a solvable loop, conjugating blocks when needed.

    Returns (closed_form, automorphism, triangular_update) or raises when
    the update is not solvable or needs eigenvalues outside Q(i).
    """
    structure = loop.solvable_structure()
    if structure is None:
        raise AnalysisError("update is not solvable")
    theta = build_automorphism(structure)
    eta_t = conjugate_update(loop.update, theta)
    cl_t = closed_form_twn(eta_t)
    forms: dict = {}
    for v in loop.variables:
        pe = poly_to_pe(theta.backward[v], cl_t.forms)
        forms[v] = pe.substitute_vars(theta.forward)
    return ClosedForm(forms, cl_t.start), theta, eta_t


# ---------------------------------------------------------------------------
# Norm of a poly-exponential expression as a bound in the variable n.


def _ceil_sqrt(q: Fraction) -> int:
    """Least integer at or above the square root of a nonnegative rational."""
    from math import isqrt

    c = isqrt(q.numerator // q.denominator)
    while c * c * q.denominator < q.numerator:
        c += 1
    return c


def pe_norm_bound(pe: PolyExp, nvar: str = "n") -> Bound:
    """||pe||: absolute coefficients and |b|^n factors, weakly monotone.

    Base moduli outside {0, 1} are rounded up to the next integer so the
    result stays a bound expression with rational exponential bases; moduli
    of at most one contribute no exponential factor.
    """
    n = BVar(nvar)
    terms: list = []
    for p, a, b in pe.summands:
        mag2 = b.abs_square()
        if not mag2 and a:
            continue  # n^a * 0^n vanishes everywhere
        factors: list = []
        coeff_terms: list = []
        for mono, coeff in p.sorted_terms():
            if coeff.is_rational:
                scalar = Scalar.of(abs(coeff.re))
            else:
                scalar = Scalar.root(coeff.abs_square())
            mono_factors = [BConst(scalar)]
            for w, e in mono:
                mono_factors.append(bpow(BVar(w), e))
            coeff_terms.append(bprod(mono_factors))
        factors.append(bsum(coeff_terms))
        if a:
            factors.append(bpow(n, a))
        if mag2 > 1:
            factors.append(bexp(_ceil_sqrt(mag2), n))
        terms.append(bprod(factors))
    return simplify(bsum(terms))
