"""Weakly monotone symbolic bounds and their asymptotic classification.

A bound is a nonnegative, weakly monotonically increasing expression over
variables that are themselves evaluated at nonnegative integers (absolute
values of program states).  The grammar consists of scalar constants
(rationals, single square roots, infinity), variables, sums, products,
rational powers, exponentials with rational base > 1, logarithms with
rational base > 1 (applied to max(1, arg) so they stay total and
nonnegative), and finite maxima.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import Decimal, ROUND_CEILING, ROUND_FLOOR, localcontext
from fractions import Fraction
from math import ceil, isqrt, lcm, log
from typing import Mapping, Optional, Sequence, Union

from .expr import AnalysisError, Monomial, Polynomial, Rat, _frac, var_key


def _squarefree_split(m: int) -> "tuple[int, int]":
    """Write m = s^2 * r with r squarefree (best effort for huge m)."""
    s, r = 1, 1
    p = 2
    while p * p <= m and p < 1_000_000:
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            s *= p ** (e // 2)
            if e % 2:
                r *= p
        p += 1 if p == 2 else 2
    return s, r * m


@dataclass(frozen=True)
class Scalar:
    """rat + rad * sqrt(radicand), or infinity."""

    rat: Fraction
    rad: Fraction = Fraction(0)
    radicand: int = 1
    infinite: bool = False

    @staticmethod
    def of(q: Rat) -> "Scalar":
        return Scalar(_frac(q))

    @staticmethod
    def root(q: Rat) -> "Scalar":
        """sqrt(q) for rational q >= 0, kept exact."""
        q = _frac(q)
        if q < 0:
            raise ValueError("square root of a negative rational")
        if q == 0:
            return Scalar(Fraction(0))
        s, r = _squarefree_split(q.numerator * q.denominator)
        coeff = Fraction(s, q.denominator)
        if r == 1:
            return Scalar(coeff)
        return Scalar(Fraction(0), coeff, r)

    def __bool__(self) -> bool:
        return self.infinite or self.rat != 0 or self.rad != 0

    @property
    def is_rational(self) -> bool:
        return not self.infinite and self.rad == 0

    def add(self, other: "Scalar") -> "Optional[Scalar]":
        """Exact sum, or None when radicands are incompatible."""
        if self.infinite or other.infinite:
            return OMEGA
        if self.rad == 0:
            return Scalar(self.rat + other.rat, other.rad, other.radicand)
        if other.rad == 0:
            return Scalar(self.rat + other.rat, self.rad, self.radicand)
        if self.radicand != other.radicand:
            return None
        rad = self.rad + other.rad
        return Scalar(self.rat + other.rat, rad, self.radicand if rad else 1)

    def mul(self, other: "Scalar") -> "Optional[Scalar]":
        if self.infinite or other.infinite:
            if not self or not other:
                return Scalar(Fraction(0))
            return OMEGA
        # (a + b*sqrt(r)) * (c + d*sqrt(s))
        a, b, r = self.rat, self.rad, self.radicand
        c, d, s = other.rat, other.rad, other.radicand
        if b == 0 or d == 0:
            rad = a * d + b * c
            return Scalar(a * c, rad, max(r, s) if rad else 1)
        if r == s:
            rad = a * d + b * c
            return Scalar(a * c + b * d * r, rad, r if rad else 1)
        if a == 0 and c == 0:
            sq, rr = _squarefree_split(r * s)
            coeff = b * d * sq
            if rr == 1:
                return Scalar(coeff)
            return Scalar(Fraction(0), coeff, rr)
        return None

    def scaled(self, q: Rat) -> "Scalar":
        if self.infinite:
            return OMEGA if q else Scalar(Fraction(0))
        q = _frac(q)
        rad = self.rad * q
        return Scalar(self.rat * q, rad, self.radicand if rad else 1)

    def cmp(self, other: "Scalar") -> int:
        if self.infinite or other.infinite:
            if self.infinite and other.infinite:
                return 0
            return 1 if self.infinite else -1
        a = self.add(other.scaled(-1))
        if a is not None:
            if a.rad == 0:
                return (a.rat > 0) - (a.rat < 0)
            # sign of q + b*sqrt(r) decided by comparing q^2 with b^2 r
            q, b, r = a.rat, a.rad, a.radicand
            if q >= 0 and b >= 0:
                return 1
            if q <= 0 and b <= 0:
                return -1
            lhs, rhs = q * q, b * b * r
            if q > 0:  # q against -b*sqrt(r) with b < 0
                return (lhs > rhs) - (lhs < rhs)
            return (rhs > lhs) - (rhs < lhs)
        # distinct radicands: refine decimal enclosures until separated
        prec = 40
        while prec <= 640:
            lo1, hi1 = self._enclose(prec)
            lo2, hi2 = other._enclose(prec)
            if lo1 > hi2:
                return 1
            if hi1 < lo2:
                return -1
            prec *= 2
        raise AnalysisError("scalar comparison did not converge")

    def _enclose(self, prec: int) -> "tuple[Fraction, Fraction]":
        if self.infinite:
            raise ValueError("cannot enclose omega")
        lo = _dir_eval_scalar(self, prec, ROUND_FLOOR)
        hi = _dir_eval_scalar(self, prec, ROUND_CEILING)
        return lo, hi

    def __str__(self) -> str:
        if self.infinite:
            return "omega"
        if self.rad == 0:
            return str(self.rat)
        root = f"sqrt({self.radicand})"
        if self.rad == 1:
            radpart = root
        elif self.rad == -1:
            radpart = f"-{root}"
        else:
            radpart = f"{self.rad}*{root}"
        if self.rat == 0:
            return radpart
        if self.rad > 0:
            return f"{self.rat}+{radpart}"
        return f"{self.rat}{radpart}"


OMEGA = Scalar(Fraction(0), infinite=True)
S_ZERO = Scalar(Fraction(0))
S_ONE = Scalar(Fraction(1))


def _dir_div(num: Fraction, prec: int, rounding: str) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = prec
        ctx.rounding = rounding
        return Decimal(num.numerator) / Decimal(num.denominator)


def _dir_eval_scalar(s: Scalar, prec: int, rounding: str) -> Fraction:
    with localcontext() as ctx:
        ctx.prec = prec
        ctx.rounding = rounding
        total = Decimal(s.rat.numerator) / Decimal(s.rat.denominator)
        if s.rad:
            anti = ROUND_FLOOR if rounding == ROUND_CEILING else ROUND_CEILING
            mode = rounding if s.rad > 0 else anti
            with localcontext() as inner:
                inner.prec = prec
                inner.rounding = mode
                root = Decimal(s.radicand).sqrt()
                part = (Decimal(s.rad.numerator) / Decimal(s.rad.denominator)) * root
            total += part
        return Fraction(total)


# ---------------------------------------------------------------------------
# Bound expressions.


@dataclass(frozen=True)
class BConst:
    value: Scalar

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class BVar:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class BSum:
    parts: tuple

    def __str__(self) -> str:
        return " + ".join(_pstr(p, self) for p in self.parts)


@dataclass(frozen=True)
class BProd:
    parts: tuple

    def __str__(self) -> str:
        return "*".join(_pstr(p, self) for p in self.parts)


@dataclass(frozen=True)
class BPow:
    base: "Bound"
    exponent: Fraction

    def __str__(self) -> str:
        e = self.exponent
        etxt = str(e) if e.denominator == 1 else f"({e})"
        return f"{_pstr(self.base, self)}^{etxt}"


@dataclass(frozen=True)
class BExp:
    base: Fraction
    exponent: "Bound"

    def __str__(self) -> str:
        b = self.base
        btxt = str(b) if b.denominator == 1 else f"({b})"
        return f"{btxt}^({self.exponent})"


@dataclass(frozen=True)
class BLog:
    base: Fraction
    arg: "Bound"

    def __str__(self) -> str:
        b = self.base
        btxt = str(b) if b.denominator == 1 else f"[{b}]"
        return f"log{btxt}({self.arg})"


@dataclass(frozen=True)
class BMax:
    parts: tuple

    def __str__(self) -> str:
        inner = ", ".join(str(p) for p in self.parts)
        return f"max{{{inner}}}"


Bound = Union[BConst, BVar, BSum, BProd, BPow, BExp, BLog, BMax]

_PREC = {BMax: 0, BSum: 1, BProd: 2, BPow: 3, BExp: 3, BLog: 4, BConst: 5, BVar: 5}


def _pstr(child: Bound, parent: Bound) -> str:
    text = str(child)
    child_prec = _PREC[type(child)]
    parent_prec = _PREC[type(parent)]
    if child_prec < parent_prec or (isinstance(parent, BPow) and child is parent.base
                                    and not isinstance(child, (BVar, BConst))):
        return f"({text})"
    if isinstance(child, BConst) and not child.value.is_rational and isinstance(parent, (BProd, BPow)):
        return f"({text})"
    if isinstance(child, BConst) and child.value.rat.denominator != 1 and isinstance(parent, (BProd, BPow)):
        return f"({text})"
    return text


B_ZERO = BConst(S_ZERO)
B_ONE = BConst(S_ONE)
B_OMEGA = BConst(OMEGA)


def bconst(q: Rat) -> BConst:
    return BConst(Scalar.of(q))


def is_omega(b: Bound) -> bool:
    return isinstance(b, BConst) and b.value.infinite


def _atom_key(b: Bound):
    if isinstance(b, BVar):
        return (1, var_key(b.name))
    return _skey(b)


def _skey(b: Bound):
    """Deterministic structural sort key."""
    if isinstance(b, BConst):
        v = b.value
        if v.infinite:
            return (9,)
        return (0, v.rat, v.rad, v.radicand)
    if isinstance(b, BVar):
        return (2, _atom_key(b), Fraction(1))
    if isinstance(b, BPow):
        return (2, _atom_key(b.base), b.exponent)
    if isinstance(b, BProd):
        return (3, tuple(_skey(p) for p in b.parts))
    if isinstance(b, BSum):
        return (4, tuple(_skey(p) for p in b.parts))
    if isinstance(b, BLog):
        return (5, b.base, _skey(b.arg))
    if isinstance(b, BExp):
        return (6, b.base, _skey(b.exponent))
    return (7, tuple(_skey(p) for p in b.parts))


def _term_atoms(body: Bound):
    """Sorted (atom-key, exponent) factors of a product-shaped bound."""
    if body == B_ONE:
        return ()
    parts = body.parts if isinstance(body, BProd) else (body,)
    merged: dict = {}
    for p in parts:
        ff = _factor_form(p)
        if ff is None:
            return None
        for key, e in ff:
            merged[key] = merged.get(key, Fraction(0)) + e
    return tuple(sorted(merged.items()))


def _sum_term_key(p: Bound):
    """Order sum terms like polynomial monomials: constants first, then by
    variable grouping, with unstructured terms last."""
    scalar, body = _split_scalar(p)
    atoms = _term_atoms(body)
    stail = (scalar.rat, scalar.rad, scalar.radicand)
    if atoms is not None:
        return (0, atoms, stail)
    return (1, _skey(body), stail)


def bsum(parts: Sequence[Bound]) -> Bound:
    flat: list = []
    const = S_ZERO
    for p in parts:
        if isinstance(p, BSum):
            flat.extend(p.parts)
        else:
            flat.append(p)
    rest: list = []
    for p in flat:
        if isinstance(p, BConst):
            merged = const.add(p.value)
            if merged is not None:
                const = merged
                continue
        rest.append(p)
    if const.infinite:
        return B_OMEGA
    if const:
        rest.append(BConst(const))
    rest.sort(key=_sum_term_key)
    if not rest:
        return B_ZERO
    if len(rest) == 1:
        return rest[0]
    if any(is_omega(p) for p in rest):
        return B_OMEGA
    return BSum(tuple(rest))


def bprod(parts: Sequence[Bound]) -> Bound:
    flat: list = []
    const = S_ONE
    for p in parts:
        if isinstance(p, BProd):
            flat.extend(p.parts)
        else:
            flat.append(p)
    rest: list = []
    for p in flat:
        if isinstance(p, BConst):
            merged = const.mul(p.value)
            if merged is not None:
                const = merged
                continue
        rest.append(p)
    if not const and not const.infinite:
        return B_ZERO
    if const.infinite:
        return B_OMEGA
    if any(is_omega(p) for p in rest):
        return B_OMEGA
    if const.cmp(S_ONE) != 0:
        rest.append(BConst(const))
    rest.sort(key=_skey)
    if not rest:
        return B_ONE
    if len(rest) == 1:
        return rest[0]
    return BProd(tuple(rest))


def bpow(base: Bound, exponent: Rat) -> Bound:
    e = _frac(exponent)
    if e < 0:
        raise ValueError("negative exponent in bound")
    if e == 0:
        return B_ONE
    if e == 1:
        return base
    if is_omega(base):
        return B_OMEGA
    if isinstance(base, BConst) and base.value.is_rational:
        q = base.value.rat
        if e.denominator == 1:
            return bconst(q ** e.numerator)
        exact = _rational_root(q ** e.numerator, e.denominator)
        if exact is not None:
            return bconst(exact)
    if isinstance(base, BPow):
        return bpow(base.base, base.exponent * e)
    return BPow(base, e)


def _rational_root(q: Fraction, k: int) -> "Optional[Fraction]":
    def iroot(n: int) -> "Optional[int]":
        if n < 0:
            return None
        r = round(n ** (1.0 / k))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c ** k == n:
                return c
        return None

    num = iroot(q.numerator)
    den = iroot(q.denominator)
    if num is None or den is None:
        return None
    return Fraction(num, den)


def bexp(base: Rat, exponent: Bound) -> Bound:
    b = _frac(base)
    if b <= 1:
        raise ValueError("exponential base must be greater than 1")
    if is_omega(exponent):
        return B_OMEGA
    if isinstance(exponent, BConst) and exponent.value.is_rational:
        e = exponent.value.rat
        if e.denominator == 1 and e >= 0:
            return bconst(b ** e.numerator)
    return BExp(b, exponent)


def blog(base: Rat, arg: Bound) -> Bound:
    b = _frac(base)
    if b <= 1:
        raise ValueError("logarithm base must be greater than 1")
    if is_omega(arg):
        return B_OMEGA
    if isinstance(arg, BConst) and arg.value.is_rational:
        q = arg.value.rat
        if q <= 1:
            return B_ZERO
        # exact only when q is an integer power of the base
        e = 0
        acc = Fraction(1)
        while acc < q and e < 512:
            acc *= b
            e += 1
        if acc == q:
            return bconst(e)
    return BLog(b, arg)


def bmax(parts: Sequence[Bound]) -> Bound:
    flat: list = []
    for p in parts:
        if isinstance(p, BMax):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if any(is_omega(p) for p in flat):
        return B_OMEGA
    best_const: "Optional[Scalar]" = None
    rest: list = []
    for p in flat:
        if isinstance(p, BConst):
            if best_const is None or p.value.cmp(best_const) > 0:
                best_const = p.value
        else:
            rest.append(p)
    if best_const is not None:
        rest.append(BConst(best_const))
    pruned: list = []
    for p in rest:
        if any(dominates(q, p) for q in pruned):
            continue
        pruned = [q for q in pruned if not dominates(p, q)] + [p]
    pruned.sort(key=_skey)
    if not pruned:
        raise ValueError("empty maximum")
    if len(pruned) == 1:
        return pruned[0]
    return BMax(tuple(pruned))


def bound_variables(b: Bound) -> "set[str]":
    if isinstance(b, BVar):
        return {b.name}
    if isinstance(b, BConst):
        return set()
    if isinstance(b, BPow):
        return bound_variables(b.base)
    if isinstance(b, BExp):
        return bound_variables(b.exponent)
    if isinstance(b, BLog):
        return bound_variables(b.arg)
    out: set = set()
    for p in b.parts:
        out |= bound_variables(p)
    return out


def substitute(b: Bound, mapping: "Mapping[str, Bound]") -> Bound:
    if isinstance(b, BConst):
        return b
    if isinstance(b, BVar):
        return mapping.get(b.name, b)
    if isinstance(b, BSum):
        return bsum([substitute(p, mapping) for p in b.parts])
    if isinstance(b, BProd):
        return bprod([substitute(p, mapping) for p in b.parts])
    if isinstance(b, BPow):
        return bpow(substitute(b.base, mapping), b.exponent)
    if isinstance(b, BExp):
        return bexp(b.base, substitute(b.exponent, mapping))
    if isinstance(b, BLog):
        return blog(b.base, substitute(b.arg, mapping))
    return bmax([substitute(p, mapping) for p in b.parts])


def poly_to_bound(p: Polynomial) -> Bound:
    """||p||: coefficient-wise absolute value as a weakly monotone bound."""
    terms: list = []
    for mono, coeff in p.sorted_terms():
        if coeff.is_rational:
            scalar = Scalar.of(abs(coeff.re))
        else:
            scalar = Scalar.root(coeff.abs_square())
        factors: list = [BConst(scalar)]
        for v, e in mono:
            factors.append(bpow(BVar(v), e))
        terms.append(bprod(factors))
    return bsum(terms)


def mono_to_bound(mono: Monomial) -> Bound:
    return bprod([bpow(BVar(v), e) for v, e in mono])


# ---------------------------------------------------------------------------
# Normal form and conservative dominance.


def poly_form(b: Bound) -> "Optional[dict]":
    """View a bound as {monomial-key: Scalar} when it is polynomial-shaped.

    The key is a frozenset of (factor-key, exponent) pairs where factor-key
    is either a variable name or the structural key of a log/exp factor.
    Returns None when the bound is not a sum of scalar multiples of such
    factor products (e.g. when it contains max).
    """
    if isinstance(b, BMax):
        return None
    if isinstance(b, BConst):
        return {frozenset(): b.value} if b.value else {}
    if isinstance(b, (BVar, BPow, BExp, BLog)):
        factored = _factor_form(b)
        if factored is None:
            return None
        return {factored: S_ONE}
    if isinstance(b, BProd):
        scalar = S_ONE
        powers: dict = {}
        for p in b.parts:
            if isinstance(p, BConst):
                merged = scalar.mul(p.value)
                if merged is None:
                    return None
                scalar = merged
                continue
            factored = _factor_form(p)
            if factored is None:
                return None
            for key, e in factored:
                powers[key] = powers.get(key, Fraction(0)) + e
        key = frozenset((k, e) for k, e in powers.items() if e)
        return {key: scalar}
    if isinstance(b, BSum):
        acc: dict = {}
        for p in b.parts:
            sub = poly_form(p)
            if sub is None:
                return None
            for key, scalar in sub.items():
                if key in acc:
                    merged = acc[key].add(scalar)
                    if merged is None:
                        return None
                    acc[key] = merged
                else:
                    acc[key] = scalar
        return acc
    return None


def _factor_form(b: Bound):
    """A single factor as frozenset of (atom-key, exponent)."""
    if isinstance(b, BVar):
        return frozenset({(("v", b.name), Fraction(1))})
    if isinstance(b, BPow):
        inner = _factor_form(b.base)
        if inner is not None and len(inner) == 1:
            (key, e), = inner
            return frozenset({(key, e * b.exponent)})
        return frozenset({(("s", _skey(b.base)), b.exponent)})
    if isinstance(b, (BLog, BExp)):
        return frozenset({(("s", _skey(b)), Fraction(1))})
    return None


def dominates(a: Bound, b: Bound) -> bool:
    """Conservative syntactic check that a >= b pointwise on nonneg inputs."""
    if a == b or is_omega(a):
        return True
    if isinstance(b, BMax):
        return all(dominates(a, p) for p in b.parts)
    if isinstance(a, BMax):
        return any(dominates(p, b) for p in a.parts)
    if isinstance(a, BLog) and isinstance(b, BLog) and a.base <= b.base:
        # a smaller base makes the logarithm pointwise larger on args >= 1
        return dominates(a.arg, b.arg)
    if isinstance(a, BExp) and isinstance(b, BExp) and a.base == b.base:
        return dominates(a.exponent, b.exponent)
    fa, fb = poly_form(a), poly_form(b)
    if fa is not None and fb is not None:
        for key, coeff in fb.items():
            mine = fa.get(key)
            if mine is None or mine.cmp(coeff) < 0:
                return False
        return True
    return False


def simplify(b: Bound) -> Bound:
    """Canonical form: rebuilt through the smart constructors, with sums of
    collected like terms.  Deterministic; used for report output."""
    if isinstance(b, (BConst, BVar)):
        return b
    if isinstance(b, BPow):
        return bpow(simplify(b.base), b.exponent)
    if isinstance(b, BExp):
        return bexp(b.base, simplify(b.exponent))
    if isinstance(b, BLog):
        return blog(b.base, simplify(b.arg))
    if isinstance(b, BMax):
        return bmax([simplify(p) for p in b.parts])
    if isinstance(b, BProd):
        parts = [simplify(p) for p in b.parts]
        merged = _merge_prod_powers(parts)
        # push a plain scalar into a sum or max so like terms can collect
        spread = [p for p in merged if isinstance(p, (BSum, BMax))]
        scalars = [p for p in merged if isinstance(p, BConst)]
        if len(spread) == 1 and len(scalars) + len(spread) == len(merged):
            inner = spread[0]
            combined = [simplify(bprod(scalars + [q])) for q in inner.parts]
            return simplify(bsum(combined)) if isinstance(inner, BSum) \
                else bmax(combined)
        return bprod(merged)
    parts = [simplify(p) for p in b.parts]
    summed = bsum(parts)
    if not isinstance(summed, BSum):
        return summed
    collected = _collect_sum(summed.parts)
    return collected if collected is not None else summed


def _merge_prod_powers(parts: "list[Bound]") -> "list[Bound]":
    flat: list = []
    for p in parts:
        if isinstance(p, BProd):
            flat.extend(p.parts)
        else:
            flat.append(p)
    powers: "list[tuple[Bound, Fraction]]" = []
    out: list = []
    for p in flat:
        base, e = (p.base, p.exponent) if isinstance(p, BPow) else (p, Fraction(1))
        if isinstance(p, BConst):
            out.append(p)
            continue
        for idx, (b0, e0) in enumerate(powers):
            if b0 == base:
                powers[idx] = (b0, e0 + e)
                break
        else:
            powers.append((base, e))
    out.extend(bpow(b0, e0) for b0, e0 in powers)
    return out


def _split_scalar(p: Bound) -> "tuple[Scalar, Bound]":
    if isinstance(p, BConst):
        return p.value, B_ONE
    if isinstance(p, BProd):
        scalar = S_ONE
        rest: list = []
        for q in p.parts:
            if isinstance(q, BConst):
                merged = scalar.mul(q.value)
                if merged is not None:
                    scalar = merged
                    continue
            rest.append(q)
        return scalar, bprod(rest)
    return S_ONE, p


def _collect_sum(parts: tuple) -> "Optional[Bound]":
    groups: "list[tuple[Bound, Scalar]]" = []
    for p in parts:
        scalar, body = _split_scalar(p)
        for idx, (b0, s0) in enumerate(groups):
            if b0 == body:
                merged = s0.add(scalar)
                if merged is not None:
                    groups[idx] = (b0, merged)
                    break
        else:
            groups.append((body, scalar))
    rebuilt = [bprod([BConst(s0), b0]) for b0, s0 in groups]
    return bsum(rebuilt)


# ---------------------------------------------------------------------------
# Asymptotic classification.


class Growth(enum.Enum):
    POLY = "poly"
    EXP = "exp"
    INFINITE = "infinite"


@dataclass(frozen=True)
class AsymptoticClass:
    """Growth class; degrees are exact fractions, displayed rounded up."""

    kind: Growth
    degree: Fraction = Fraction(0)
    logdegree: Fraction = Fraction(0)

    @staticmethod
    def const() -> "AsymptoticClass":
        return AsymptoticClass(Growth.POLY)

    @staticmethod
    def poly(degree: Rat, logdegree: Rat = 0) -> "AsymptoticClass":
        return AsymptoticClass(Growth.POLY, _frac(degree), _frac(logdegree))

    @staticmethod
    def exp(degree: Rat = 1) -> "AsymptoticClass":
        return AsymptoticClass(Growth.EXP, _frac(degree))

    @staticmethod
    def unbounded() -> "AsymptoticClass":
        return AsymptoticClass(Growth.INFINITE)

    def _rank(self):
        order = {Growth.POLY: 0, Growth.EXP: 1, Growth.INFINITE: 2}
        return (order[self.kind], ceil(self.degree), ceil(self.logdegree))

    def __le__(self, other: "AsymptoticClass") -> bool:
        return self._rank() <= other._rank()

    def __lt__(self, other: "AsymptoticClass") -> bool:
        return self._rank() < other._rank()

    def join(self, other: "AsymptoticClass") -> "AsymptoticClass":
        return self if other <= self else other

    def times(self, other: "AsymptoticClass") -> "AsymptoticClass":
        kind = Growth.INFINITE if Growth.INFINITE in (self.kind, other.kind) else (
            Growth.EXP if Growth.EXP in (self.kind, other.kind) else Growth.POLY)
        if kind == Growth.EXP:
            deg = max(self.degree if self.kind == Growth.EXP else Fraction(0),
                      other.degree if other.kind == Growth.EXP else Fraction(0))
            return AsymptoticClass(Growth.EXP, deg)
        return AsymptoticClass(kind, self.degree + other.degree,
                               self.logdegree + other.logdegree)

    def power(self, e: Fraction) -> "AsymptoticClass":
        if self.kind != Growth.POLY:
            return self
        return AsymptoticClass(Growth.POLY, self.degree * e, self.logdegree * e)

    def __str__(self) -> str:
        if self.kind == Growth.INFINITE:
            return "Infinite"
        if self.kind == Growth.EXP:
            return "Exp"
        d, l = ceil(self.degree), ceil(self.logdegree)
        if d == 0 and l == 0:
            return "Const"
        if d == 0:
            return "Polylog(1)" if l == 1 else f"Polylog({l})"
        if l == 0:
            return f"Poly({d})"
        return f"Poly({d})*Polylog({l})"


def classify(b: Bound) -> AsymptoticClass:
    """Growth of the bound when all its variables grow like n."""
    if isinstance(b, BConst):
        if b.value.infinite:
            return AsymptoticClass.unbounded()
        return AsymptoticClass.const()
    if isinstance(b, BVar):
        return AsymptoticClass.poly(1)
    if isinstance(b, (BSum, BMax)):
        out = AsymptoticClass.const()
        for p in b.parts:
            out = out.join(classify(p))
        return out
    if isinstance(b, BProd):
        out = AsymptoticClass.const()
        for p in b.parts:
            out = out.times(classify(p))
        return out
    if isinstance(b, BPow):
        return classify(b.base).power(b.exponent)
    if isinstance(b, BExp):
        inner = classify(b.exponent)
        if inner.kind == Growth.INFINITE:
            return inner
        if inner.kind == Growth.EXP:
            return AsymptoticClass.unbounded()
        if inner.degree == 0 and inner.logdegree == 0:
            return AsymptoticClass.const()
        return AsymptoticClass.exp(inner.degree if inner.degree else Fraction(1))
    inner = classify(b.arg)
    if inner.kind == Growth.INFINITE:
        return inner
    if inner.kind == Growth.EXP:
        return AsymptoticClass.poly(inner.degree)
    if inner.degree == 0 and inner.logdegree == 0:
        return AsymptoticClass.const()
    return AsymptoticClass.poly(0, 1)


# ---------------------------------------------------------------------------
# Certified interval evaluation with decimal endpoints.


class _OmegaValue(Exception):
    pass


def _eval_dir(b: Bound, state: "Mapping[str, Rat]", prec: int, upper: bool) -> Decimal:
    rounding = ROUND_CEILING if upper else ROUND_FLOOR
    with localcontext() as ctx:
        ctx.prec = prec
        ctx.rounding = rounding

        def conv(q: Fraction) -> Decimal:
            return Decimal(q.numerator) / Decimal(q.denominator)

        def go(node: Bound) -> Decimal:
            if isinstance(node, BConst):
                if node.value.infinite:
                    raise _OmegaValue
                return conv(_dir_eval_scalar(node.value, prec, rounding))
            if isinstance(node, BVar):
                if node.name not in state:
                    raise AnalysisError(f"unbound variable: {node.name}")
                v = _frac(state[node.name])
                if v < 0:
                    raise ValueError("bounds are evaluated on nonnegative states")
                return conv(v)
            if isinstance(node, BSum):
                return sum((go(p) for p in node.parts), Decimal(0))
            if isinstance(node, BProd):
                acc = Decimal(1)
                for p in node.parts:
                    acc *= go(p)
                return acc
            if isinstance(node, BMax):
                return max(go(p) for p in node.parts)
            if isinstance(node, BPow):
                base = go(node.base)
                e = node.exponent
                if e.denominator == 1:
                    return base ** e.numerator
                if base == 0:
                    return Decimal(0)
                return (e.numerator * base.ln() / e.denominator).exp()
            if isinstance(node, BExp):
                e = go(node.exponent)
                return (e * conv(node.base).ln()).exp()
            arg = go(node.arg)
            if arg <= 1:
                return Decimal(0)
            # directed rounding for a quotient of logs needs opposite modes
            anti = ROUND_FLOOR if upper else ROUND_CEILING
            num = arg.ln()
            with localcontext() as inner:
                inner.prec = prec
                inner.rounding = anti
                den = (Decimal(node.base.numerator) / Decimal(node.base.denominator)).ln()
            return num / den

        return go(b)


def interval_eval(b: Bound, state: "Mapping[str, Rat]", prec: int = 32):
    """Certified enclosure (lo, hi) as exact fractions, or None for omega."""
    try:
        lo = _eval_dir(b, state, prec, upper=False)
        hi = _eval_dir(b, state, prec, upper=True)
    except _OmegaValue:
        return None
    return Fraction(lo), Fraction(hi)


def bound_at_least(b: Bound, state: "Mapping[str, Rat]", value: Rat,
                   max_prec: int = 512) -> bool:
    """Decide bound >= value at the given state, escalating precision."""
    target = _frac(value)
    prec = 32
    while prec <= max_prec:
        enclosure = interval_eval(b, state, prec)
        if enclosure is None:
            return True
        lo, hi = enclosure
        if lo >= target:
            return True
        if hi < target:
            return False
        prec *= 2
    raise AnalysisError("bound comparison did not converge")


def exact_log2(arg: Fraction) -> "Optional[int]":
    """log2(arg) when it is an integer, else None (it is never a non-integer
    rational for rational arg)."""
    n, d = arg.numerator, arg.denominator
    if n & (n - 1) == 0 and d & (d - 1) == 0 and n > 0:
        return n.bit_length() - d.bit_length()
    return None


def least_rational_upper_log2(coeff: Fraction, arg: Fraction, max_den: int) -> Fraction:
    """Least p/q >= coeff * log2(arg) with 1 <= q <= max_den.

    Used to present exponential-of-logarithm bounds with a rational exponent
    slightly above the exact irrational one.
    """
    if arg <= 0:
        raise ValueError("logarithm of a nonpositive rational")
    k = exact_log2(arg)
    if k is not None:
        target = coeff * k
        best = None
        for q in range(1, max_den + 1):
            p = -((-target.numerator * q) // target.denominator)  # ceil
            cand = Fraction(p, q)
            if best is None or cand < best:
                best = cand
        return best

    def ceil_mult(q: int) -> int:
        # exact ceil(q * coeff * log2(arg)) for irrational log2(arg)
        prec = 40
        while True:
            with localcontext() as ctx:
                ctx.prec = prec
                ctx.rounding = ROUND_FLOOR
                num = (Decimal(arg.numerator) / Decimal(arg.denominator)).ln()
                two = Decimal(2).ln()
            with localcontext() as ctx:
                ctx.prec = prec
                ctx.rounding = ROUND_CEILING
                num_hi = (Decimal(arg.numerator) / Decimal(arg.denominator)).ln()
                two_hi = Decimal(2).ln()
            c = coeff * q
            vals = [Fraction(n_) / Fraction(d_) * c
                    for n_ in (num, num_hi) for d_ in (two, two_hi)]
            lo, hi = min(vals), max(vals)
            clo = -((-lo.numerator) // lo.denominator)
            chi = -((-hi.numerator) // hi.denominator)
            if clo == chi:
                return clo
            prec *= 2
            if prec > 4096:
                raise AnalysisError("logarithm rounding did not converge")

    best = None
    for q in range(1, max_den + 1):
        cand = Fraction(ceil_mult(q), q)
        if best is None or cand < best:
            best = cand
    return best


def _exact_log_ratio(arg: Fraction, base: Fraction) -> "Optional[Fraction]":
    """log_base(arg) when it is rational with a small denominator, else None."""
    try:
        approx = log(float(arg)) / log(float(base))
    except (OverflowError, ValueError):
        return None
    for q in range(1, 65):
        centre = round(approx * q)
        for p in (centre - 1, centre, centre + 1):
            if 0 <= p <= 4096 and base ** p == arg ** q:
                return Fraction(p, q)
    return None


def least_rational_upper_log(coeff: Fraction, arg: Fraction, base: Fraction,
                             max_den: int) -> Fraction:
    """Least p/q >= coeff * log_base(arg) with 1 <= q <= max_den.

    Requires arg > 1, base > 1 and coeff > 0; used to flatten an
    exponential of a logarithm into a power with a printable rational
    exponent."""
    if arg <= 1 or base <= 1:
        raise ValueError("logarithm rewriting needs arguments above 1")
    if coeff <= 0:
        raise ValueError("logarithm rewriting needs a positive coefficient")
    exact = _exact_log_ratio(arg, base)

    def ceil_mult(q: int) -> int:
        if exact is not None:
            t = coeff * exact * q
            return -((-t.numerator) // t.denominator)
        prec = 40
        while True:
            encl = []
            for rounding in (ROUND_FLOOR, ROUND_CEILING):
                with localcontext() as ctx:
                    ctx.prec = prec
                    ctx.rounding = rounding
                    encl.append((Decimal(arg.numerator)
                                 / Decimal(arg.denominator)).ln())
                    encl.append((Decimal(base.numerator)
                                 / Decimal(base.denominator)).ln())
            c = coeff * q
            vals = [Fraction(n_) / Fraction(d_) * c
                    for n_ in (encl[0], encl[2]) for d_ in (encl[1], encl[3])]
            lo, hi = min(vals), max(vals)
            clo = -((-lo.numerator) // lo.denominator)
            chi = -((-hi.numerator) // hi.denominator)
            if clo == chi:
                return clo
            prec *= 2
            if prec > 4096:
                raise AnalysisError("logarithm rounding did not converge")

    best = None
    for q in range(1, max_den + 1):
        cand = Fraction(ceil_mult(q), q)
        if best is None or cand < best:
            best = cand
    return best


def least_rational_upper_invlog2(arg: Fraction, max_den: int) -> Fraction:
    """Least p/q >= 1/log2(arg) with 1 <= q <= max_den, for arg > 1.

    The base-change factor when rewriting log_arg(x) as a multiple of
    log2(x)."""
    if arg <= 1:
        raise ValueError("base-change factor needs an argument above 1")
    k = exact_log2(arg)

    def ceil_mult(q: int) -> int:
        if k is not None:
            return -((-q) // k)
        # exact ceil(q / log2(arg)); log2(arg) is irrational here
        prec = 40
        while True:
            encl = []
            for rounding in (ROUND_FLOOR, ROUND_CEILING):
                with localcontext() as ctx:
                    ctx.prec = prec
                    ctx.rounding = rounding
                    encl.append((Decimal(arg.numerator)
                                 / Decimal(arg.denominator)).ln())
                    encl.append(Decimal(2).ln())
            vals = [Fraction(two) * q / Fraction(num)
                    for num in (encl[0], encl[2]) for two in (encl[1], encl[3])]
            lo, hi = min(vals), max(vals)
            clo = -((-lo.numerator) // lo.denominator)
            chi = -((-hi.numerator) // hi.denominator)
            if clo == chi:
                return clo
            prec *= 2
            if prec > 4096:
                raise AnalysisError("logarithm rounding did not converge")

    best = None
    for q in range(1, max_den + 1):
        cand = Fraction(ceil_mult(q), q)
        if best is None or cand < best:
            best = cand
    return best
