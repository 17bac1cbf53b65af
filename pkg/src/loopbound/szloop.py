"""Size bounds for solvable loops.

A size bound for a variable caps its absolute value over the whole run,
including the initial state, as a weakly monotone expression in the
absolute values of the initial state.  For a solvable update the closed
form makes this mechanical: take coefficient moduli of the closed form
and substitute a runtime bound for the step counter.  Steps below the
validity threshold of a defective closed form are covered separately by
iterating the coefficient-modulus update map.

Two routes exist.  When every eigenvalue is a Gaussian integer the
closed form of the loop itself is used; radical constants such as
sqrt(10) appear and the bound is tight.  Otherwise the loop is chained
by its spectrum period first, which makes every eigenvalue rational at
the price of a coarser bound.  States between chained steps are then
covered by composing the chained bounds with short iterates of the
modulus map, not by taking a flat maximum with them: a plain iterate
only sees the initial state, and for a rotating orbit the peak may
occur many steps later.
"""

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .bounds import (B_OMEGA, B_ONE, BConst, BExp, BLog, BMax, BPow, BProd,
                     BSum, BVar, Bound, bconst, bexp, blog, bmax, bpow, bprod,
                     bsum, bound_variables, is_omega, least_rational_upper_log,
                     poly_to_bound, simplify, substitute)
from .closedform import ClosedForm, closed_form_solvable, pe_norm_bound
from .expr import AnalysisError, Polynomial, var_key
from .loops import Loop, classify_loop

norm_pe = pe_norm_bound


class SizePath(enum.Enum):
    """Which route produced the size bounds."""

    GAUSSIAN_EXACT = "GaussianExact"
    CHAINED_FALLBACK = "ChainedFallback"


@dataclass(frozen=True)
class LoopSizeResult:
    sb: "Mapping[str, Bound]"
    path: SizePath

    def __str__(self) -> str:
        lines = [f"path: {self.path.value}"]
        for v in sorted(self.sb, key=var_key):
            lines.append(f"sb({v}) = {self.sb[v]}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Exponential-of-logarithm flattening.


def collapse_exponentials(b: Bound, max_den: int = 16) -> Bound:
    """Rewrite factors c^(a + d*log_k(t) + ...) into c^a * max{1,t}^e.

    The exponent e is the least rational above d*log_k(c) with
    denominator at most max_den.  The max with 1 mirrors the clamped
    logarithm, which reads as 0 below 1; without it the power would
    undershoot at small arguments.  Shapes that do not match are kept
    as they are."""
    if isinstance(b, (BConst, BVar)):
        return b
    if isinstance(b, BSum):
        return bsum([collapse_exponentials(p, max_den) for p in b.parts])
    if isinstance(b, BProd):
        return bprod([collapse_exponentials(p, max_den) for p in b.parts])
    if isinstance(b, BMax):
        return bmax([collapse_exponentials(p, max_den) for p in b.parts])
    if isinstance(b, BPow):
        return bpow(collapse_exponentials(b.base, max_den), b.exponent)
    if isinstance(b, BLog):
        return blog(b.base, collapse_exponentials(b.arg, max_den))
    expo = collapse_exponentials(b.exponent, max_den)
    parts = expo.parts if isinstance(expo, BSum) else (expo,)
    factors = [_power_factor(b.base, part, max_den) for part in parts]
    return simplify(bprod(factors))


def _power_factor(base: Fraction, part: Bound, max_den: int) -> Bound:
    """base^part for one summand of an exponent."""
    if isinstance(part, BConst) and part.value.is_rational:
        e = part.value.rat
        if e >= 0:
            return bpow(bconst(base), e)
    if isinstance(part, BMax):
        # base > 1, so the exponential is monotone and passes through max
        return bmax([_power_factor(base, p, max_den) for p in part.parts])
    coeff, logpart = _coefficient_and_log(part)
    if logpart is not None:
        if coeff <= 0:
            return B_ONE
        try:
            e = least_rational_upper_log(coeff, base, logpart.base, max_den)
        except AnalysisError:
            return BExp(base, part)
        return bpow(bmax([B_ONE, logpart.arg]), e)
    return BExp(base, part)


def _coefficient_and_log(part: Bound):
    """Split a rational multiple of a single logarithm, else (None, None)."""
    if isinstance(part, BLog):
        return Fraction(1), part
    if isinstance(part, BProd):
        coeff = Fraction(1)
        logpart = None
        for p in part.parts:
            if isinstance(p, BConst) and p.value.is_rational:
                coeff *= p.value.rat
            elif isinstance(p, BLog) and logpart is None:
                logpart = p
            else:
                return None, None
        return coeff, logpart
    return None, None


# ---------------------------------------------------------------------------
# Size bounds.


def _modulus_map(loop: Loop) -> "dict[str, Polynomial]":
    return {v: loop.update[v].absolute() for v in loop.variables}


def _iterated_modulus(mmap: "Mapping[str, Polynomial]", v: str, k: int) -> Polynomial:
    q = Polynomial.var(v)
    for _ in range(k):
        q = q.substitute(mmap)
    return q


def _norm_at_runtime(pe, rb: Bound, nvar: str, max_den: int) -> Bound:
    norm = pe_norm_bound(pe, nvar)
    if nvar not in bound_variables(norm):
        return norm
    if is_omega(rb):
        return B_OMEGA
    return collapse_exponentials(substitute(norm, {nvar: rb}), max_den)


def _direct_bounds(loop: Loop, cl: ClosedForm, rb: Bound, nvar: str,
                   max_den: int) -> "dict[str, Bound]":
    mmap = _modulus_map(loop)
    out = {}
    for v in loop.variables:
        parts = [_norm_at_runtime(cl.forms[v], rb, nvar, max_den)]
        for k in range(cl.start):
            parts.append(poly_to_bound(_iterated_modulus(mmap, v, k)))
        out[v] = simplify(bmax(parts))
    return out


def _chained_bounds(loop: Loop, period: int, rb: Bound, nvar: str,
                    max_den: int) -> "dict[str, Bound]":
    chained = loop if period == 1 else loop.chained(period)
    cl, _, _ = closed_form_solvable(chained)
    mmap = _modulus_map(loop)
    whole = {}
    for v in loop.variables:
        parts = [_norm_at_runtime(cl.forms[v], rb, nvar, max_den)]
        for j in range(cl.start):
            parts.append(poly_to_bound(_iterated_modulus(mmap, v, period * j)))
        whole[v] = simplify(bmax(parts))
    if period == 1:
        return whole
    out = {}
    for v in loop.variables:
        parts = [whole[v]]
        for k in range(1, period):
            step = poly_to_bound(_iterated_modulus(mmap, v, k))
            parts.append(substitute(step, whole))
        out[v] = simplify(bmax(parts))
    return out


def loop_size_bound(loop: Loop, rb: Bound, allow_gaussian: bool = True,
                    max_den: int = 16) -> LoopSizeResult:
    """Size bounds for every variable of a solvable loop.

    rb must be a runtime bound for the loop; the unbounded constant is
    allowed and yields finite sizes exactly for the variables whose
    closed-form norm does not mention the step counter.  allow_gaussian
    turns the exact route off, forcing the chained fallback."""
    shape = classify_loop(loop)
    if not shape.is_solvable:
        raise AnalysisError("update is not solvable")
    nvar = "n"
    while nvar in loop.variables:
        nvar += "_"
    if allow_gaussian:
        try:
            cl, _, _ = closed_form_solvable(loop)
        except AnalysisError:
            pass
        else:
            return LoopSizeResult(_direct_bounds(loop, cl, rb, nvar, max_den),
                                  SizePath.GAUSSIAN_EXACT)
    if shape.period is None:
        raise AnalysisError("spectrum is not periodic")
    return LoopSizeResult(_chained_bounds(loop, shape.period, rb, nvar, max_den),
                          SizePath.CHAINED_FALLBACK)
