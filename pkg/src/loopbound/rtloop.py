"""Runtime bounds for loops whose update has a periodic rational spectrum.

The pipeline: make the update solvable by variable elimination, drop
variables the guard can never see, classify, certify termination through an
external oracle, chain the loop by the spectrum period, conjugate into
triangular form, bound the stabilization threshold of every guard atom's
closed form, and transform the step count back to the original loop.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Callable, Optional, Sequence

from .bounds import (B_ONE, B_ZERO, Bound, bconst, blog, bmax, bprod, bsum,
                     classify, Growth, least_rational_upper_invlog2,
                     poly_to_bound, simplify, substitute)
from .closedform import (ClosedForm, PolyExp, closed_form_twn, poly_to_pe,
                         twn_order)
from .expr import (AnalysisError, Atom, Polynomial, Rat, _frac,
                   formula_atoms, formula_eval, formula_variables, mono_of)
from .loops import (Automorphism, Loop, build_automorphism, classify_loop,
                    conjugate, eliminate_unsolvable, identity_automorphism)

TerminationOracle = Callable[[Loop, ClosedForm, Automorphism], Optional[bool]]


# ---------------------------------------------------------------------------
# Monotonicity thresholds.


@dataclass(frozen=True)
class ThresholdQuery:
    """From which n on does n^a1 * b1^n stay above k * n^a2 * b2^n?"""

    b1: Rat
    a1: int
    b2: Rat
    a2: int
    k: int = 1


def _term_at(b: Fraction, a: int, n: int) -> Fraction:
    # 0^0 = 1, so at n = 0 only the exponent-free part survives
    if n == 0:
        return Fraction(1 if a == 0 else 0)
    return Fraction(n) ** a * b ** n


def monotonicity_threshold(query: ThresholdQuery) -> int:
    """Exact minimal n0 with n^a1*b1^n > k*n^a2*b2^n for every n >= n0."""
    b1, a1 = _frac(query.b1), query.a1
    b2, a2 = _frac(query.b2), query.a2
    k = query.k
    if k < 1:
        raise AnalysisError("threshold factor must be positive")
    if b2 < 0 or (b1, a1) <= (b2, a2):
        raise AnalysisError("threshold query is not lexicographically ordered")
    if b1 == 0:
        # both sides vanish for n >= 1, nothing ever dominates
        raise AnalysisError("dominance never holds")

    def holds(n: int) -> bool:
        return _term_at(b1, a1, n) > k * _term_at(b2, a2, n)

    if b2 == 0:
        # the right side is zero for all n >= 1
        return 0 if holds(0) else 1

    if a1 >= a2:
        nstar = 1
    else:
        # beyond nstar the ratio of adjacent quotient values is >= 1
        ratio, d = b1 / b2, a2 - a1
        nstar = 1
        while ratio < Fraction(nstar + 1, nstar) ** d:
            nstar += 1

    n = nstar
    while not holds(n):
        n += 1
    while n > 0 and holds(n - 1):
        n -= 1
    return n


# ---------------------------------------------------------------------------
# Joining polynomials into a common nonnegative over-approximation.


def _join_poly(polys: "Sequence[Polynomial]") -> Polynomial:
    coeffs: dict = {}
    for p in polys:
        for mono, c in p.sorted_terms():
            if not c.is_rational:
                raise AnalysisError("rational coefficients required")
            a = abs(c.re)
            if a > coeffs.get(mono, Fraction(0)):
                coeffs[mono] = a
    return Polynomial(coeffs)


def overapprox_join(polys: "Sequence[Polynomial]") -> Bound:
    """Monomial-wise maximum of absolute coefficients."""
    return poly_to_bound(_join_poly(polys))


# ---------------------------------------------------------------------------
# Stabilization-threshold bounds for poly-exponential expressions.


def ordered_summands(pe: PolyExp) -> "list[tuple[Polynomial, int, Fraction]]":
    """Summands with rational base > 0, ascending by (base, degree).

    A base-0 summand only contributes at n = 0 and the returned bounds are
    at least 1 whenever any summand remains, so dropping it is sound.
    """
    out = []
    for poly, a, b in pe.summands:
        if not b.is_rational:
            raise AnalysisError("rational bases required")
        base = b.rational()
        if base < 0:
            raise AnalysisError("nonnegative bases required")
        for _, c in poly.sorted_terms():
            if not c.is_rational or c.re.denominator != 1:
                raise AnalysisError("integer coefficients required")
        if base != 0:
            out.append((poly, a, base))
    return out


def _stability_offsets(s: "list[tuple[Polynomial, int, Fraction]]") -> "list[int]":
    """The N_j constants shared by both threshold lemmas, for j = 2..l."""
    out = []
    for j in range(2, len(s) + 1):
        if j == 2:
            out.append(1)
            continue
        _, a_prev, b_prev = s[j - 2]
        _, a_two, b_two = s[j - 3]
        lead = monotonicity_threshold(
            ThresholdQuery(b_prev, a_prev, b_two, a_two, k=j - 2))
        if j == 3:
            out.append(lead)
            continue
        rest = max(monotonicity_threshold(
            ThresholdQuery(b_two, a_two, s[i][2], s[i][1]))
            for i in range(j - 3))
        out.append(max(lead, rest))
    return out


def sth_bound_poly(pe: PolyExp) -> Bound:
    """Polynomial bound on the index past which the sign stays fixed."""
    s = ordered_summands(pe)
    if not s:
        return B_ZERO
    if len(s) == 1:
        # the sign is that of the single coefficient polynomial
        return B_ONE
    ms = []
    for j in range(2, len(s) + 1):
        _, a_j, b_j = s[j - 1]
        _, a_prev, b_prev = s[j - 2]
        if b_j == b_prev:
            ms.append(0)
        else:
            ms.append(monotonicity_threshold(
                ThresholdQuery(b_j, a_j, b_prev, a_prev + 1)))
    c = max([1] + ms + _stability_offsets(s))
    join2 = _join_poly([p for p, _, _ in s[:-1]]).scale(2)
    return simplify(bmax([bconst(c), poly_to_bound(join2)]))


def _sth_log_parts(pe: PolyExp):
    """(C, [(base, argument)]) of the logarithmic lemma, or None."""
    s = ordered_summands(pe)
    if not s:
        return 0, []
    if len(s) == 1:
        return 1, []
    for j in range(1, len(s)):
        if s[j][2] == s[j - 1][2]:
            return None
    ms = []
    terms = []
    for j in range(2, len(s) + 1):
        _, a_j, b_j = s[j - 1]
        polys_below = [p for p, _, _ in s[:j - 1]]
        _, a_prev, b_prev = s[j - 2]
        eps = min(Fraction(1, 2), (b_j - b_prev) / 2)
        ms.append(monotonicity_threshold(
            ThresholdQuery(b_prev + eps, a_j, b_prev, a_prev)))
        terms.append((b_j / (b_prev + eps), _join_poly(polys_below).scale(2)))
    c = max([1] + ms + _stability_offsets(s))
    return c, terms


def _poly_covers(a: Polynomial, b: Polynomial) -> bool:
    cover = {mono: c.re for mono, c in a.sorted_terms()}
    return all(c.re <= cover.get(mono, Fraction(0))
               for mono, c in b.sorted_terms())


def _raw_log_bound(c: int, terms) -> Bound:
    parts = [bconst(c)]
    parts.extend(blog(base, poly_to_bound(arg)) for base, arg in terms)
    return simplify(bmax(parts))


def _even_content(p: Polynomial) -> "tuple[int, Polynomial]":
    """Largest t such that p = 2^t * q with q still integral, plus q."""
    g = 0
    for _, coeff in p.sorted_terms():
        g = gcd(g, abs(coeff.re.numerator))
    if g == 0:
        return 0, p
    t = (g & -g).bit_length() - 1
    return t, p.scale(Fraction(1, 2 ** t))


def _present_log_bound(c: int, terms) -> Bound:
    """Rewrite every log term over base 2 with a rational factor rounded up,
    after discarding terms dominated by a later one with smaller base and at
    least as large an argument."""
    keep = []
    for i, (base_i, arg_i) in enumerate(terms):
        shadowed = False
        for j, (base_j, arg_j) in enumerate(terms):
            if j == i or base_j > base_i or not _poly_covers(arg_j, arg_i):
                continue
            if base_j == base_i and arg_j == arg_i and j > i:
                continue
            shadowed = True
            break
        if not shadowed:
            keep.append((base_i, arg_i))
    parts: "list[Bound]" = [bconst(c)]
    for base, arg in keep:
        r = least_rational_upper_invlog2(base, 2)
        shift, reduced = _even_content(arg)
        pieces: "list[Bound]" = []
        if shift:
            pieces.append(bconst(r * shift))
        pieces.append(bprod([bconst(r), blog(Fraction(2), poly_to_bound(reduced))]))
        parts.append(bsum(pieces))
    return simplify(bmax(parts))


def sth_bound_log(pe: PolyExp) -> "Optional[Bound]":
    """Logarithmic sign-stabilization bound; None unless the bases are
    strictly increasing."""
    parts = _sth_log_parts(pe)
    if parts is None:
        return None
    return _present_log_bound(*parts)


# ---------------------------------------------------------------------------
# The per-loop pipeline.


class BoundKind(enum.Enum):
    LOGARITHMIC = "Logarithmic"
    POLYNOMIAL = "Polynomial"


@dataclass(frozen=True)
class AtomBound:
    atom: Atom
    pe: PolyExp
    poly_bound: Bound
    log_bound: "Optional[Bound]"
    raw_log_bound: "Optional[Bound]"
    chosen: Bound


@dataclass(frozen=True)
class PipelineTrace:
    eliminated: "tuple[tuple[str, Polynomial], ...]"
    relevant: "tuple[str, ...]"
    period: int
    squared: bool
    relaxed: bool
    theta: Automorphism
    triangular: Loop
    start: int
    atoms: "tuple[AtomBound, ...]"
    factor: int
    offset: int


@dataclass(frozen=True)
class LoopRuntimeResult:
    rb: Bound
    kind: BoundKind
    witness: PipelineTrace


def _restricted(loop: Loop) -> Loop:
    keep = loop.relevant_variables()
    return loop.restricted(keep) if len(keep) < loop.dim else loop


def self_coefficients(update) -> "dict[str, Fraction]":
    out = {}
    for v, poly in update.items():
        c = poly.coeff(mono_of((v, 1)))
        if not c.is_rational:
            raise AnalysisError("triangular update with rational weights required")
        out[v] = c.re
    return out


def guard_atom_pe(atom: Atom, cl: ClosedForm, theta: Automorphism) -> PolyExp:
    """Closed form of a guard atom, scaled integral by the denominators of
    the expression and of the automorphism images."""
    pe = poly_to_pe(atom.poly, cl.forms)
    scale = pe.denominator_lcm()
    for image in theta.forward.values():
        scale = lcm(scale, image.denominator_lcm())
    return pe.scale(scale) if scale != 1 else pe


def _atom_bound(atom: Atom, cl: ClosedForm, theta: Automorphism) -> AtomBound:
    pe = guard_atom_pe(atom, cl, theta)
    poly_b = sth_bound_poly(pe)
    parts = _sth_log_parts(pe)
    log_b = raw = None
    if parts is not None:
        raw = _raw_log_bound(*parts)
        log_b = _present_log_bound(*parts)
    chosen = poly_b
    if log_b is not None and classify(log_b) < classify(poly_b):
        chosen = log_b
    return AtomBound(atom, pe, poly_b, log_b, raw, chosen)


def _scaled(factor: int, body: Bound, offset: int) -> Bound:
    parts = [bprod([bconst(factor), body])]
    if offset:
        parts.append(bconst(offset))
    return simplify(bsum(parts))


def make_solvable(loop: Loop) -> "tuple[Optional[Loop], list[tuple[str, Polynomial]]]":
    """Drop guard-irrelevant variables and retry after folding non-solvable
    parts into fresh ones.  Returns the reduced loop, or None with whatever
    substitutions were applied before giving up."""
    eliminated: "list[tuple[str, Polynomial]]" = []
    current = _restricted(loop)
    cls = classify_loop(current)
    while not cls.is_solvable and len(eliminated) < 3:
        step = eliminate_unsolvable(current)
        if step is None:
            return None, eliminated
        current, q, fresh = step
        eliminated.append((fresh, q))
        current = _restricted(current)
        cls = classify_loop(current)
    if not cls.is_solvable:
        return None, eliminated
    return current, eliminated


def runtime_analysis(loop: Loop,
                     termination: "Optional[TerminationOracle]" = None,
                     ) -> "tuple[Optional[LoopRuntimeResult], Optional[str]]":
    """Runtime bound plus a reason when none can be computed."""
    if not formula_variables(loop.guard):
        if formula_eval(loop.guard, {}):
            return None, "loop does not terminate"
        trace = PipelineTrace((), (), 1, False, True,
                              identity_automorphism(loop.variables), loop,
                              0, (), 1, 0)
        return LoopRuntimeResult(B_ZERO, BoundKind.POLYNOMIAL, trace), None

    current, eliminated = make_solvable(loop)
    if current is None:
        return None, "update is not solvable"
    cls = classify_loop(current)
    if cls.period is None:
        return None, "spectrum is not periodic"

    p = cls.period
    chained = current.chained(p) if p > 1 else current
    ccls = classify_loop(chained)
    if ccls.structure is None:
        raise AnalysisError("chained update lost solvability")
    theta = build_automorphism(ccls.structure)
    lt = conjugate(chained, theta) if not theta.is_identity else chained
    if twn_order(dict(lt.update)) is None:
        raise AnalysisError("conjugated update is not triangular")
    coeffs = self_coefficients(dict(lt.update))
    squared = any(c < 0 or c.denominator != 1 for c in coeffs.values())
    factor = p * (2 if squared else 1)

    def prepared(relaxed: bool) -> "tuple[Loop, ClosedForm]":
        base = current.chained(p, relaxed=relaxed) if p > 1 else current
        tri = conjugate(base, theta) if not theta.is_identity else base
        if squared:
            tri = tri.chained(2, relaxed=relaxed)
        return tri, closed_form_twn(dict(tri.update))

    final, cl = prepared(relaxed=True)
    relaxed_used, offset = True, 0
    verdict = termination(final, cl, theta) if termination else None
    if verdict is not True:
        # the relaxed guard can run past the loop's real exit, so certify
        # the exactly equivalent conjunction form instead
        final_full, cl_full = prepared(relaxed=False)
        verdict = termination(final_full, cl_full, theta) if termination else None
        if verdict is False:
            # after variable elimination a diverging state may lie outside
            # the image of the original state space
            if eliminated:
                return None, "termination unknown"
            return None, "loop does not terminate"
        if verdict is not True:
            return None, "termination unknown"
        final, cl = final_full, cl_full
        relaxed_used, offset = False, factor - 1

    atoms = tuple(_atom_bound(atom, cl, theta)
                  for atom in formula_atoms(final.guard))
    rb_t = simplify(bmax([ab.chosen for ab in atoms] + [bconst(cl.start)]))
    body = rb_t
    if not theta.is_identity:
        norm = theta.norm_map()
        body = substitute(body, {v: poly_to_bound(q) for v, q in norm.items()})
    for fresh, q in reversed(eliminated):
        body = substitute(body, {fresh: poly_to_bound(q.absolute())})
    rb = _scaled(factor, body, offset)

    growth = classify(rb)
    kind = BoundKind.POLYNOMIAL
    if growth.kind == Growth.POLY and growth.degree == 0 and growth.logdegree > 0:
        kind = BoundKind.LOGARITHMIC
    trace = PipelineTrace(tuple(eliminated), current.variables, p, squared,
                          relaxed_used, theta, final, cl.start, atoms,
                          factor, offset)
    return LoopRuntimeResult(rb, kind, trace), None


def loop_runtime_bound(loop: Loop,
                       termination: "Optional[TerminationOracle]" = None,
                       ) -> "Optional[LoopRuntimeResult]":
    result, _ = runtime_analysis(loop, termination)
    return result
