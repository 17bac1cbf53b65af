"""Termination certificates for single loops through an external SMT solver.

A triangular loop whose self-coefficients are nonnegative integers has
closed forms that are exponential polynomials with nonnegative bases, so
along every orbit each guard polynomial keeps a fixed sign from some point
on.  Such a loop runs forever from some state exactly when a rational point
in the reachable lattice image makes every guard atom eventually positive.
That condition is an existential formula which this module emits as
SMT-LIB text, hands to a solver process, and maps back to a verdict.

Solver answers are taken at face value for sat/unsat; anything else,
including timeouts and missing binaries, degrades to an unknown verdict.
"""

from __future__ import annotations

import enum
import hashlib
import os
import subprocess
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional

from .closedform import ClosedForm, closed_form_twn, twn_order
from .expr import (AnalysisError, And, Atom, Formula, Or, Polynomial,
                   formula_eval, formula_variables, var_key)
from .loops import (Automorphism, Loop, build_automorphism, classify_loop,
                    conjugate, identity_automorphism)
from .rtloop import (guard_atom_pe, make_solvable, ordered_summands,
                     self_coefficients)


class TerminationStatus(enum.Enum):
    TERMINATING = "terminating"
    NON_TERMINATING = "non-terminating"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class TerminationVerdict:
    """Outcome of a termination check.

    A non-terminating verdict carries a start state from which the loop
    was observed not to halt; an unknown verdict carries the reason.
    """

    status: TerminationStatus
    witness: "Optional[dict[str, int]]" = None
    reason: Optional[str] = None

    @property
    def is_terminating(self) -> bool:
        return self.status is TerminationStatus.TERMINATING

    @property
    def is_non_terminating(self) -> bool:
        return self.status is TerminationStatus.NON_TERMINATING

    @staticmethod
    def terminating() -> "TerminationVerdict":
        return TerminationVerdict(TerminationStatus.TERMINATING)

    @staticmethod
    def non_terminating(witness: "Mapping[str, int]") -> "TerminationVerdict":
        return TerminationVerdict(TerminationStatus.NON_TERMINATING,
                                  witness=dict(witness))

    @staticmethod
    def unknown(reason: str) -> "TerminationVerdict":
        return TerminationVerdict(TerminationStatus.UNKNOWN, reason=reason)

    def __str__(self) -> str:
        if self.is_terminating:
            return "terminating"
        if self.is_non_terminating:
            state = ", ".join(f"{v} = {self.witness[v]}"
                              for v in sorted(self.witness, key=var_key))
            return f"non-terminating from {state}"
        return f"unknown ({self.reason})"


# ---------------------------------------------------------------------------
# Formula emission.


def _rational_sexp(c: Fraction, reals: bool) -> str:
    if c.denominator == 1:
        return str(c.numerator) if c.numerator >= 0 else f"(- {-c.numerator})"
    if not reals:
        raise AnalysisError("integer coefficients required")
    body = f"(/ {abs(c.numerator)} {c.denominator})"
    return body if c >= 0 else f"(- {body})"


def _poly_sexp(p: Polynomial, reals: bool = False) -> str:
    terms = []
    for mono, coeff in p.sorted_terms():
        if not coeff.is_rational:
            raise AnalysisError("rational coefficients required")
        c = coeff.re
        if not c:
            continue
        factors = [v for v, e in mono for _ in range(e)]
        if c != 1 or not factors:
            factors.insert(0, _rational_sexp(c, reals))
        terms.append(factors[0] if len(factors) == 1
                     else "(* " + " ".join(factors) + ")")
    if not terms:
        return "0"
    return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"


def _atom_condition(atom: Atom, cl: ClosedForm, theta: Automorphism) -> str:
    """Eventual positivity of one guard atom along the orbit.

    The summand of largest (base, degree) with a nonzero coefficient
    dictates the eventual sign.  Atoms are strict, so the case of every
    summand vanishing leaves "0 > 0" and is no witness.
    """
    rows = ordered_summands(guard_atom_pe(atom, cl, theta))
    cases = []
    for j, (pj, _, _) in enumerate(rows):
        lead = f"(> {_poly_sexp(pj)} 0)"
        tail = [f"(= {_poly_sexp(pk)} 0)" for pk, _, _ in rows[j + 1:]]
        cases.append(lead if not tail
                     else "(and " + " ".join([lead] + tail) + ")")
    if not cases:
        return "false"
    return cases[0] if len(cases) == 1 else "(or " + " ".join(cases) + ")"


def _guard_condition(f: Formula, cl: ClosedForm, theta: Automorphism) -> str:
    if isinstance(f, Atom):
        return _atom_condition(f, cl, theta)
    parts = [_guard_condition(g, cl, theta) for g in f.parts]
    if not parts:
        return "true" if isinstance(f, And) else "false"
    if len(parts) == 1:
        return parts[0]
    head = "and" if isinstance(f, And) else "or"
    return f"({head} " + " ".join(parts) + ")"


def _seed_names(variables) -> "dict[str, str]":
    taken = set(variables)
    out = {}
    for v in sorted(variables, key=var_key):
        name = f"e_{v}"
        while name in taken:
            name += "_"
        taken.add(name)
        out[v] = name
    return out


def nontermination_formula(loop: Loop,
                           theta: Optional[Automorphism] = None,
                           closed_form: Optional[ClosedForm] = None) -> str:
    """SMT-LIB script satisfiable iff the loop has an eternal run.

    The loop must be triangular with nonnegative integer self-coefficients
    (chain once by 2 beforehand if not).  `theta` describes the change of
    variables whose image of the integer lattice is the state domain; the
    identity means plain integer states.  Emission is deterministic text,
    suitable for caching by content hash.
    """
    update = dict(loop.update)
    if twn_order(update) is None:
        raise AnalysisError("update is not triangular")
    if any(c < 0 or c.denominator != 1
           for c in self_coefficients(update).values()):
        raise AnalysisError("nonnegative integer self-coefficients required")
    if theta is None:
        theta = identity_automorphism(loop.variables)
    if closed_form is None:
        try:
            closed_form = closed_form_twn(update)
        except AnalysisError as err:
            raise AnalysisError("closed form unavailable") from err

    names = sorted(loop.variables, key=var_key)
    lattice = theta.is_identity
    lines = ["(set-logic QF_NIA)" if lattice else "(set-logic QF_NIRA)"]
    for v in names:
        lines.append(f"(declare-fun {v} () {'Int' if lattice else 'Real'})")
    if not lattice:
        seeds = _seed_names(loop.variables)
        for v in names:
            lines.append(f"(declare-fun {seeds[v]} () Int)")
        image = {w: Polynomial.var(seeds[w]) for w in loop.variables}
        for v in names:
            rhs = theta.forward[v].substitute(image)
            lines.append(f"(assert (= {v} {_poly_sexp(rhs, reals=True)}))")
    lines.append(f"(assert {_guard_condition(loop.guard, closed_form, theta)})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solver process handling.


_CACHE: "dict[tuple[str, str, int], tuple[str, str]]" = {}


def clear_solver_cache() -> None:
    _CACHE.clear()


def _run_solver(script: str, solver: str,
                timeout_ms: int) -> "tuple[str, str]":
    """First status line plus full output; sat/unsat results are cached."""
    key = (hashlib.sha256(script.encode()).hexdigest(), str(solver),
           int(timeout_ms))
    if key in _CACHE:
        return _CACHE[key]
    fd, path = tempfile.mkstemp(suffix=".smt2", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(script)
        try:
            proc = subprocess.run([str(solver), path], capture_output=True,
                                  text=True, timeout=timeout_ms / 1000.0)
        except subprocess.TimeoutExpired:
            return "timeout", ""
        except OSError:
            return "missing", ""
    finally:
        os.unlink(path)
    status = "error"
    for line in proc.stdout.splitlines():
        word = line.strip()
        if word in ("sat", "unsat", "unknown"):
            status = word
            break
        if word:
            break
    result = (status, proc.stdout)
    if status in ("sat", "unsat"):
        _CACHE[key] = result
    return result


def _read_sexp(tokens, i):
    if tokens[i] != "(":
        return tokens[i], i + 1
    out = []
    i += 1
    while tokens[i] != ")":
        node, i = _read_sexp(tokens, i)
        out.append(node)
    return out, i + 1


def _value_of(node) -> Fraction:
    if isinstance(node, list):
        if node and node[0] == "-":
            return -_value_of(node[1])
        if node and node[0] == "/":
            return _value_of(node[1]) / _value_of(node[2])
        raise AnalysisError("unsupported model value")
    return Fraction(node)


def parse_model(text: str) -> "dict[str, Fraction]":
    """Constant assignments from `(define-fun name () Sort value)` entries."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    out = {}
    i = 0
    while i < len(tokens):
        if tokens[i] != "define-fun":
            i += 1
            continue
        name = tokens[i + 1]
        args, i = _read_sexp(tokens, i + 2)
        if args != []:
            continue
        _, i = _read_sexp(tokens, i)
        value, i = _read_sexp(tokens, i)
        try:
            out[name] = _value_of(value)
        except (AnalysisError, ValueError, ZeroDivisionError):
            pass
    return out


# ---------------------------------------------------------------------------
# Verdicts.


def _bounded_run(loop: Loop, sigma: "dict[str, int]", cap: int,
                 limit: int = 10 ** 60):
    """Like Loop.run but also bails out once any value outgrows `limit`."""
    state = dict(sigma)
    for k in range(cap):
        if not loop.holds(state):
            return k, state
        if any(abs(x) > limit for x in state.values()):
            return None, state
        state = loop.step(state)
    return None, state


def _stabilize(loop: Loop, sigma: "dict[str, int]", jumps: int = 256,
               cap: int = 4096) -> "Optional[dict[str, int]]":
    """Advance along the orbit until a run no longer halts within the cap.

    A solver witness guarantees the guard holds from some point of the
    orbit on; the state itself may still exit earlier.  Each jump skips
    past the next guard failure.
    """
    state = dict(sigma)
    for _ in range(jumps):
        steps, last = _bounded_run(loop, state, cap)
        if steps is None:
            return state
        state = loop.step(last)
    return None


def _witness_from_model(output: str, loop: Loop,
                        theta: Automorphism) -> "Optional[dict[str, int]]":
    model = parse_model(output)
    if theta.is_identity:
        keys = {v: v for v in loop.variables}
    else:
        keys = _seed_names(loop.variables)
    state = {}
    for v in loop.variables:
        value = model.get(keys[v], Fraction(0))
        if value.denominator != 1:
            return None
        state[v] = int(value)
    return _stabilize(loop, state)


def check_termination(loop: Loop, solver: Optional[str] = None,
                      timeout_ms: int = 5000) -> TerminationVerdict:
    """Decide termination of a loop over all integer start states.

    Guards constant in the variables settle without the solver.  The loop
    is otherwise reduced to a triangular form with nonnegative integer
    self-coefficients by chaining with the full conjunction guard, so the
    reduced loop halts from exactly the same states as the original.
    """
    if not formula_variables(loop.guard):
        if formula_eval(loop.guard, {}):
            return TerminationVerdict.non_terminating(
                {v: 0 for v in loop.variables})
        return TerminationVerdict.terminating()

    current, eliminated = make_solvable(loop)
    if current is None:
        return TerminationVerdict.unknown("update is not solvable")
    cls = classify_loop(current)
    if cls.period is None:
        return TerminationVerdict.unknown("spectrum is not periodic")
    chained = (current.chained(cls.period, relaxed=False)
               if cls.period > 1 else current)
    ccls = classify_loop(chained)
    if ccls.structure is None:
        raise AnalysisError("chained update lost solvability")
    theta = build_automorphism(ccls.structure)
    lt = conjugate(chained, theta) if not theta.is_identity else chained
    if twn_order(dict(lt.update)) is None:
        raise AnalysisError("conjugated update is not triangular")
    if any(c < 0 or c.denominator != 1
           for c in self_coefficients(dict(lt.update)).values()):
        lt = lt.chained(2, relaxed=False)

    if solver is None:
        return TerminationVerdict.unknown("no solver configured")
    try:
        script = nontermination_formula(lt, theta,
                                        closed_form_twn(dict(lt.update)))
    except AnalysisError as err:
        return TerminationVerdict.unknown(str(err))
    status, output = _run_solver(script, solver, timeout_ms)
    if status == "unsat":
        return TerminationVerdict.terminating()
    if status == "sat":
        if eliminated:
            # the diverging state may not correspond to any start of the
            # original loop once variables were folded away
            return TerminationVerdict.unknown(
                "witness lies in rewritten variables")
        witness = _witness_from_model(output, current, theta)
        if witness is None:
            return TerminationVerdict.unknown(
                "non-termination witness could not be stabilized")
        return TerminationVerdict.non_terminating(
            {v: witness.get(v, 0) for v in loop.variables})
    if status == "timeout":
        return TerminationVerdict.unknown("solver timeout")
    if status == "missing":
        return TerminationVerdict.unknown("no solver configured")
    if status == "unknown":
        return TerminationVerdict.unknown("solver returned unknown")
    return TerminationVerdict.unknown("solver error")


def tnn_oracle(solver: Optional[str], timeout_ms: int = 5000,
               ) -> "Callable[[Loop, ClosedForm, Automorphism], Optional[bool]]":
    """Termination handle for the runtime pipeline.

    The pipeline hands over the already prepared triangular loop together
    with its closed form and the change of variables; the answer concerns
    exactly that loop on the image of the integer lattice.
    """
    def oracle(lt: Loop, cl: ClosedForm,
               theta: Automorphism) -> Optional[bool]:
        if not formula_variables(lt.guard):
            return not formula_eval(lt.guard, {})
        if solver is None:
            return None
        try:
            script = nontermination_formula(lt, theta, cl)
        except AnalysisError:
            return None
        status, _ = _run_solver(script, solver, timeout_ms)
        if status == "unsat":
            return True
        if status == "sat":
            return False
        return None

    return oracle
