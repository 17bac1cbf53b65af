"""Exact arithmetic core: Gaussian rationals, polynomials, atoms, formulas.

Everything downstream (closed forms, bounds, ranking functions) is built on
the types in this module.  All arithmetic is exact; floats never appear.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union


class AnalysisError(Exception):
    """Raised for user-visible analysis failures (parse errors, missing data)."""


Rat = Union[int, Fraction]


def _frac(x: Rat) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class Gaussian:
    """A Gaussian rational a + b*i with exact rational components."""

    re: Fraction
    im: Fraction

    @staticmethod
    def of(re: Rat, im: Rat = 0) -> "Gaussian":
        return Gaussian(_frac(re), _frac(im))

    def __add__(self, other: "GaussianLike") -> "Gaussian":
        o = as_gaussian(other)
        return Gaussian(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other: "GaussianLike") -> "Gaussian":
        o = as_gaussian(other)
        return Gaussian(self.re - o.re, self.im - o.im)

    def __rsub__(self, other: "GaussianLike") -> "Gaussian":
        return as_gaussian(other) - self

    def __mul__(self, other: "GaussianLike") -> "Gaussian":
        o = as_gaussian(other)
        return Gaussian(self.re * o.re - self.im * o.im,
                        self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other: "GaussianLike") -> "Gaussian":
        o = as_gaussian(other)
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return Gaussian((self.re * o.re + self.im * o.im) / d,
                        (self.im * o.re - self.re * o.im) / d)

    def __rtruediv__(self, other: "GaussianLike") -> "Gaussian":
        return as_gaussian(other) / self

    def __neg__(self) -> "Gaussian":
        return Gaussian(-self.re, -self.im)

    def __pow__(self, k: int) -> "Gaussian":
        if k < 0:
            return G_ONE / self ** (-k)
        result = G_ONE
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __bool__(self) -> bool:
        return self.re != 0 or self.im != 0

    def conj(self) -> "Gaussian":
        return Gaussian(self.re, -self.im)

    def abs_square(self) -> Fraction:
        """|z|^2, always rational."""
        return self.re * self.re + self.im * self.im

    @property
    def is_rational(self) -> bool:
        return self.im == 0

    @property
    def is_integer(self) -> bool:
        return self.im == 0 and self.re.denominator == 1

    def rational(self) -> Fraction:
        if self.im != 0:
            raise AnalysisError("rational closed form required")
        return self.re

    def __str__(self) -> str:
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}*i)"


GaussianLike = Union[Gaussian, Fraction, int]


def as_gaussian(x: GaussianLike) -> Gaussian:
    if isinstance(x, Gaussian):
        return x
    return Gaussian(_frac(x), Fraction(0))


G_ZERO = Gaussian(Fraction(0), Fraction(0))
G_ONE = Gaussian(Fraction(1), Fraction(0))
G_I = Gaussian(Fraction(0), Fraction(1))


# A monomial maps variables to positive exponents, stored as a sorted tuple.
Monomial = tuple  # tuple[tuple[str, int], ...]

MONO_ONE: Monomial = ()

_VAR_KEY_RE = re.compile(r"(\d+)")


def var_key(name: str):
    """Sort key with numeric suffixes ordered naturally (x2 before x10)."""
    parts = _VAR_KEY_RE.split(name)
    return tuple(int(p) if p.isdigit() else p for p in parts)


def mono_of(*pairs: "tuple[str, int]") -> Monomial:
    merged: dict = {}
    for v, e in pairs:
        if e:
            merged[v] = merged.get(v, 0) + e
    return tuple(sorted(merged.items(), key=lambda it: var_key(it[0])))


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    return mono_of(*a, *b)


def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


class Polynomial:
    """Multivariate polynomial with Gaussian rational coefficients.

    Terms are kept in a normalized dict keyed by monomial; zero
    coefficients are dropped on construction.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, GaussianLike] = ()):  # type: ignore[assignment]
        norm: dict = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for mono, coeff in items:
            g = as_gaussian(coeff)
            if not g:
                continue
            cur = norm.get(mono)
            g = g if cur is None else cur + g
            if g:
                norm[mono] = g
            elif mono in norm:
                del norm[mono]
        self.terms = norm

    @staticmethod
    def const(c: GaussianLike) -> "Polynomial":
        return Polynomial({MONO_ONE: c})

    @staticmethod
    def var(name: str) -> "Polynomial":
        return Polynomial({mono_of((name, 1)): 1})

    @staticmethod
    def zero() -> "Polynomial":
        return Polynomial()

    @staticmethod
    def one() -> "Polynomial":
        return Polynomial.const(1)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Polynomial) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __add__(self, other: "PolyLike") -> "Polynomial":
        o = as_poly(other)
        merged = dict(self.terms)
        for mono, c in o.terms.items():
            cur = merged.get(mono, G_ZERO) + c
            if cur:
                merged[mono] = cur
            else:
                merged.pop(mono, None)
        out = Polynomial()
        out.terms = merged
        return out

    __radd__ = __add__

    def __sub__(self, other: "PolyLike") -> "Polynomial":
        return self + (-as_poly(other))

    def __rsub__(self, other: "PolyLike") -> "Polynomial":
        return as_poly(other) - self

    def __neg__(self) -> "Polynomial":
        out = Polynomial()
        out.terms = {m: -c for m, c in self.terms.items()}
        return out

    def __mul__(self, other: "PolyLike") -> "Polynomial":
        o = as_poly(other)
        acc: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in o.terms.items():
                m = mono_mul(m1, m2)
                c = acc.get(m, G_ZERO) + c1 * c2
                if c:
                    acc[m] = c
                else:
                    acc.pop(m, None)
        out = Polynomial()
        out.terms = acc
        return out

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative polynomial power")
        result = Polynomial.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def scale(self, c: GaussianLike) -> "Polynomial":
        g = as_gaussian(c)
        out = Polynomial()
        if g:
            out.terms = {m: cc * g for m, cc in self.terms.items()}
        return out

    def variables(self) -> "set[str]":
        return {v for m in self.terms for v, _ in m}

    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(mono_degree(m) for m in self.terms)

    @property
    def is_constant(self) -> bool:
        return all(m == MONO_ONE for m in self.terms)

    def constant_value(self) -> Gaussian:
        if not self.is_constant:
            raise ValueError("not a constant polynomial")
        return self.terms.get(MONO_ONE, G_ZERO)

    @property
    def is_linear(self) -> bool:
        return self.degree() <= 1

    @property
    def is_rational(self) -> bool:
        return all(c.is_rational for c in self.terms.values())

    @property
    def is_integer(self) -> bool:
        return all(c.is_integer for c in self.terms.values())

    def coeff(self, mono: Monomial) -> Gaussian:
        return self.terms.get(mono, G_ZERO)

    def linear_parts(self) -> "tuple[dict[str, Fraction], Fraction]":
        """Decompose a linear rational polynomial into coefficients and offset."""
        coeffs: dict = {}
        offset = Fraction(0)
        for mono, c in self.terms.items():
            if mono == MONO_ONE:
                offset = c.rational()
            elif mono_degree(mono) == 1:
                coeffs[mono[0][0]] = c.rational()
            else:
                raise ValueError("polynomial is not linear")
        return coeffs, offset

    def substitute(self, mapping: Mapping[str, "Polynomial"]) -> "Polynomial":
        """Replace each variable by a polynomial; untouched variables remain."""
        result = Polynomial.zero()
        for mono, c in self.terms.items():
            term = Polynomial.const(c)
            for v, e in mono:
                factor = mapping.get(v)
                if factor is None:
                    factor = Polynomial.var(v)
                term = term * factor ** e
            result = result + term
        return result

    def evaluate(self, state: Mapping[str, GaussianLike]) -> Gaussian:
        total = G_ZERO
        for mono, c in self.terms.items():
            val = c
            for v, e in mono:
                if v not in state:
                    raise AnalysisError(f"unbound variable: {v}")
                val = val * as_gaussian(state[v]) ** e
            total = total + val
        return total

    def conj(self) -> "Polynomial":
        out = Polynomial()
        out.terms = {m: c.conj() for m, c in self.terms.items()}
        return out

    def absolute(self) -> "Polynomial":
        """Coefficient-wise absolute value; requires rational coefficients."""
        out = Polynomial()
        out.terms = {m: as_gaussian(abs(c.rational())) for m, c in self.terms.items()}
        return out

    def denominator_lcm(self) -> int:
        """Least common multiple of all coefficient denominators."""
        from math import lcm

        dens = [1]
        for c in self.terms.values():
            dens.append(c.re.denominator)
            dens.append(c.im.denominator)
        return lcm(*dens)

    def sorted_terms(self) -> "list[tuple[Monomial, Gaussian]]":
        def key(item):
            mono, _ = item
            return (-mono_degree(mono), tuple((var_key(v), -e) for v, e in mono))

        return sorted(self.terms.items(), key=key)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        chunks: list = []
        for mono, coeff in self.sorted_terms():
            body = "*".join(v if e == 1 else f"{v}^{e}" for v, e in mono)
            if coeff.is_rational:
                c = coeff.re
                sign = "-" if c < 0 else "+"
                mag = abs(c)
                if not body:
                    text = str(mag)
                elif mag == 1:
                    text = body
                else:
                    text = f"{mag}*{body}"
            else:
                sign = "+"
                text = f"{coeff}*{body}" if body else str(coeff)
            chunks.append((sign, text))
        first_sign, first = chunks[0]
        out = first if first_sign == "+" else f"-{first}"
        for sign, text in chunks[1:]:
            out += f" {sign} {text}"
        return out

    __repr__ = __str__


PolyLike = Union[Polynomial, Gaussian, Fraction, int]


def as_poly(x: PolyLike) -> Polynomial:
    if isinstance(x, Polynomial):
        return x
    return Polynomial.const(x)


# ---------------------------------------------------------------------------
# Formulas.  An atom means "poly > 0"; non-strict and equality comparisons
# are encoded through integer tightening (p >= 0  iff  p + 1 > 0 over Z).


@dataclass(frozen=True)
class Atom:
    poly: Polynomial

    def __str__(self) -> str:
        return f"{self.poly} > 0"


@dataclass(frozen=True)
class And:
    parts: tuple

    def __str__(self) -> str:
        if not self.parts:
            return "true"
        return " && ".join(_paren(p) for p in self.parts)


@dataclass(frozen=True)
class Or:
    parts: tuple

    def __str__(self) -> str:
        if not self.parts:
            return "false"
        return " || ".join(_paren(p) for p in self.parts)


Formula = Union[Atom, And, Or]

TRUE = And(())
FALSE = Or(())


def _paren(f: Formula) -> str:
    text = str(f)
    if isinstance(f, (And, Or)) and len(f.parts) > 1:
        return f"({text})"
    return text


def f_and(parts: Iterable[Formula]) -> Formula:
    flat: list = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.parts)
        elif p == FALSE:
            return FALSE
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def f_or(parts: Iterable[Formula]) -> Formula:
    flat: list = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.parts)
        elif p == TRUE:
            return TRUE
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def cmp_gt(a: PolyLike, b: PolyLike) -> Formula:
    return Atom(as_poly(a) - as_poly(b))


def cmp_lt(a: PolyLike, b: PolyLike) -> Formula:
    return Atom(as_poly(b) - as_poly(a))


def cmp_ge(a: PolyLike, b: PolyLike) -> Formula:
    return Atom(as_poly(a) - as_poly(b) + 1)


def cmp_le(a: PolyLike, b: PolyLike) -> Formula:
    return Atom(as_poly(b) - as_poly(a) + 1)


def cmp_eq(a: PolyLike, b: PolyLike) -> Formula:
    return f_and([cmp_ge(a, b), cmp_le(a, b)])


def cmp_ne(a: PolyLike, b: PolyLike) -> Formula:
    return f_or([cmp_lt(a, b), cmp_gt(a, b)])


def formula_atoms(f: Formula) -> "list[Atom]":
    """All atoms in syntactic order."""
    if isinstance(f, Atom):
        return [f]
    out: list = []
    for p in f.parts:
        out.extend(formula_atoms(p))
    return out


def formula_substitute(f: Formula, mapping: Mapping[str, Polynomial]) -> Formula:
    if isinstance(f, Atom):
        return Atom(f.poly.substitute(mapping))
    if isinstance(f, And):
        return And(tuple(formula_substitute(p, mapping) for p in f.parts))
    return Or(tuple(formula_substitute(p, mapping) for p in f.parts))


def formula_eval(f: Formula, state: Mapping[str, GaussianLike]) -> bool:
    if isinstance(f, Atom):
        return f.poly.evaluate(state).rational() > 0
    if isinstance(f, And):
        return all(formula_eval(p, state) for p in f.parts)
    return any(formula_eval(p, state) for p in f.parts)


def formula_variables(f: Formula) -> "set[str]":
    return {v for a in formula_atoms(f) for v in a.poly.variables()}


def dnf(f: Formula) -> "list[list[Atom]]":
    """Disjunctive normal form as a list of conjunctions of atoms."""
    if isinstance(f, Atom):
        return [[f]]
    if isinstance(f, Or):
        out: list = []
        for p in f.parts:
            out.extend(dnf(p))
        return out
    clauses: list = [[]]
    for p in f.parts:
        clauses = [c + d for c in clauses for d in dnf(p)]
    return clauses


# ---------------------------------------------------------------------------
# A tiny polynomial term parser shared by the program format and the tests.
# Grammar: expr := term (('+'|'-') term)* ; term := factor ('*' factor)* ;
# factor := atom ('^' nat)? ; atom := nat | var | '(' expr ')' | '-' factor.

_TOKEN_RE = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def _tokenize(text: str) -> "list[str]":
    tokens: list = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            break
        num, ident, sym = m.groups()
        if num is not None:
            tokens.append(num)
        elif ident is not None:
            tokens.append(ident)
        elif not sym.isspace():
            tokens.append(sym)
        pos = m.end()
    tokens.append("$")
    return tokens


class _PolyParser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.text = text

    def peek(self) -> str:
        return self.tokens[self.pos]

    def take(self) -> str:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, why: str):
        raise AnalysisError(f"parse error: {why} in {self.text!r}")

    def expr(self) -> Polynomial:
        if self.peek() == "-":
            self.take()
            result = -self.term()
        else:
            result = self.term()
        while self.peek() in "+-":
            op = self.take()
            rhs = self.term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term(self) -> Polynomial:
        result = self.factor()
        while self.peek() == "*":
            self.take()
            result = result * self.factor()
        return result

    def factor(self) -> Polynomial:
        base = self.atom()
        if self.peek() == "^":
            self.take()
            exp = self.take()
            if not exp.isdigit():
                self.fail("exponent must be a natural number")
            return base ** int(exp)
        return base

    def atom(self) -> Polynomial:
        tok = self.take()
        if tok == "(":
            inner = self.expr()
            if self.take() != ")":
                self.fail("missing closing parenthesis")
            return inner
        if tok == "-":
            return -self.factor()
        if tok.isdigit():
            return Polynomial.const(int(tok))
        if re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", tok):
            return Polynomial.var(tok)
        self.fail(f"unexpected token {tok!r}")
        raise AssertionError  # unreachable


def parse_poly(text: str, allowed: "Sequence[str] | None" = None) -> Polynomial:
    parser = _PolyParser(text)
    poly = parser.expr()
    if parser.peek() != "$":
        parser.fail(f"trailing input at token {parser.peek()!r}")
    if allowed is not None:
        extra = sorted(poly.variables() - set(allowed), key=var_key)
        if extra:
            raise AnalysisError(f"unbound variable: {extra[0]}")
    return poly
