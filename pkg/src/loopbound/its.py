"""Integer transition systems: model, parser, interpreter and graph analyses.

A program is a finite control graph over locations.  Each transition
carries a guard and a polynomial update over program variables and
temporary variables; temporaries are chosen fresh and arbitrarily at
every step, subject only to the guard.  The interpreter here is the
reference oracle for runtime and size bounds: it explores runs for a
concrete initial state and records, per transition, the largest number
of firings seen in a single run and the largest absolute value of every
variable right after the transition fired.

The textual format:

    # comment
    vars x1 x2
    temp y
    start l0
    t0: l0 -> l1
    t1: l1 (x1 > 0 && x1 >= y) -> l1 { x1 := x1 - y; x2 := x2 + 1 }

Rule ids are optional; omitted ids are filled in as t<index> by file
order.  Omitted guards mean true, omitted updates mean identity.
Comparisons may use <, <=, >, >=, = and != and are desugared into
strict atoms over the integers.
"""

from dataclasses import dataclass
from fractions import Fraction
from keyword import iskeyword
from math import ceil, floor
from random import Random
from typing import Mapping, Optional, Sequence

from .expr import (AnalysisError, And, FALSE, Formula, Or, Polynomial, TRUE,
                   cmp_eq, cmp_ge, cmp_gt, cmp_le, cmp_lt, cmp_ne, f_and,
                   f_or, formula_atoms, formula_eval, formula_variables,
                   mono_of, parse_poly, var_key)


class ParseError(AnalysisError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.reason = message
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Program model.


@dataclass(frozen=True)
class Transition:
    tid: str
    src: str
    dst: str
    guard: Formula
    update: "Mapping[str, Polynomial]"

    def __str__(self) -> str:
        return self.tid


@dataclass(frozen=True)
class IntegerProgram:
    variables: "tuple[str, ...]"
    tempvars: "tuple[str, ...]"
    locations: "tuple[str, ...]"
    start: str
    transitions: "tuple[Transition, ...]"

    @staticmethod
    def make(variables: Sequence[str], tempvars: Sequence[str], start: str,
             transitions: Sequence[Transition]) -> "IntegerProgram":
        """Build a program, totalizing updates and checking the invariants."""
        vs = tuple(variables)
        tvs = tuple(tempvars)
        if set(vs) & set(tvs):
            raise AnalysisError("a name cannot be both program and temporary variable")
        seen: set = set()
        fixed = []
        locations = [start]
        for t in transitions:
            if t.tid in seen:
                raise AnalysisError(f"duplicate transition id: {t.tid}")
            seen.add(t.tid)
            if t.dst == start:
                raise AnalysisError("the start location has no incoming transitions")
            allowed = set(vs) | set(tvs)
            update = {}
            for v in vs:
                p = t.update.get(v, Polynomial.var(v))
                if p.variables() - allowed:
                    raise AnalysisError(f"unbound variable in update of {t.tid}")
                update[v] = p
            for v in t.update:
                if v in tvs:
                    raise AnalysisError(f"update of temporary variable {v}")
                if v not in vs:
                    raise AnalysisError(f"unknown program variable: {v}")
            if formula_variables(t.guard) - allowed:
                raise AnalysisError(f"unbound variable in guard of {t.tid}")
            for loc in (t.src, t.dst):
                if loc not in locations:
                    locations.append(loc)
            fixed.append(Transition(t.tid, t.src, t.dst, t.guard, update))
        return IntegerProgram(vs, tvs, tuple(locations), start, tuple(fixed))

    def transition(self, tid: str) -> Transition:
        for t in self.transitions:
            if t.tid == tid:
                return t
        raise AnalysisError(f"no transition named {tid}")

    @property
    def initial(self) -> "tuple[Transition, ...]":
        return tuple(t for t in self.transitions if t.src == self.start)

    def outgoing(self, loc: str) -> "tuple[Transition, ...]":
        return tuple(t for t in self.transitions if t.src == loc)

    def temp_free(self, t: Transition) -> bool:
        temps = set(self.tempvars)
        return all(not (p.variables() & temps) for p in t.update.values())


# ---------------------------------------------------------------------------
# Parsing.

_TWO_CHAR = (":=", "->", "<=", ">=", "!=", "&&", "||")
_ONE_CHAR = "(){};:<>=+-*^,"
_RELATIONS = {"<": cmp_lt, "<=": cmp_le, ">": cmp_gt, ">=": cmp_ge,
              "=": cmp_eq, "!=": cmp_ne}
_DIRECTIVES = ("vars", "temp", "start")


@dataclass(frozen=True)
class _Token:
    kind: str  # name | int | sym | end
    text: str
    line: int
    col: int
    pos: int


def _tokenize(text: str) -> "list[_Token]":
    tokens = []
    line, bol = 1, 0
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            bol = i
            continue
        if c.isspace():
            i += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        col = i - bol + 1
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], line, col, i))
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("int", text[i:j], line, col, i))
            i = j
            continue
        two = text[i:i + 2]
        if two in _TWO_CHAR:
            tokens.append(_Token("sym", two, line, col, i))
            i += 2
            continue
        if c in _ONE_CHAR:
            tokens.append(_Token("sym", c, line, col, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("end", "", line, n - bol + 1, n))
    return tokens


class _ProgramParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables: "list[str]" = []
        self.tempvars: "list[str]" = []
        self.start: "Optional[str]" = None
        self.rules: "list[tuple]" = []  # (tid or None, id token, src, guard, dst, update)

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "end":
            self.i += 1
        return tok

    def fail(self, message: str, tok: "Optional[_Token]" = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    def expect(self, text: str) -> _Token:
        tok = self.take()
        if tok.text != text:
            self.fail(f"expected {text!r}", tok)
        return tok

    def name(self, what: str) -> _Token:
        tok = self.take()
        if tok.kind != "name":
            self.fail(f"expected {what}", tok)
        return tok

    # -- statements

    def program(self) -> IntegerProgram:
        while self.peek().kind != "end":
            tok = self.peek()
            if tok.kind == "name" and tok.text in _DIRECTIVES:
                self.directive()
            else:
                self.rule()
        if self.start is None:
            self.fail("missing start directive")
        return self.build()

    def directive(self):
        kw = self.take()
        if kw.text == "start":
            if self.start is not None:
                self.fail("start was already declared", kw)
            self.start = self.name("a location name").text
            return
        target = self.variables if kw.text == "vars" else self.tempvars
        count = 0
        while self.peek().kind == "name" and self.peek().line == kw.line:
            tok = self.take()
            if tok.text in self.variables or tok.text in self.tempvars:
                self.fail(f"duplicate variable {tok.text}", tok)
            target.append(tok.text)
            count += 1
        if count == 0:
            self.fail("expected variable names on the same line", kw)

    def rule(self):
        first = self.name("a rule id or source location")
        tid_tok: "Optional[_Token]" = None
        if self.peek().text == ":":
            self.take()
            tid_tok = first
            src = self.name("a source location")
        else:
            src = first
        guard: Formula = TRUE
        if self.peek().text == "(":
            self.take()
            guard = self.disjunction()
            self.expect(")")
        self.expect("->")
        dst = self.name("a target location")
        update: "dict[str, Polynomial]" = {}
        if self.peek().text == "{":
            self.take()
            while self.peek().text != "}":
                lhs = self.name("a program variable")
                if lhs.text in self.tempvars:
                    self.fail("update of a temporary variable", lhs)
                if lhs.text not in self.variables:
                    self.fail(f"unknown program variable {lhs.text}", lhs)
                if lhs.text in update:
                    self.fail(f"variable {lhs.text} is updated twice", lhs)
                self.expect(":=")
                update[lhs.text] = self.poly_until((";", "}"))
                if self.peek().text == ";":
                    self.take()
            self.take()
        self.rules.append((tid_tok, first, src, guard, dst, update))

    # -- guards

    def disjunction(self) -> Formula:
        parts = [self.conjunction()]
        while self.peek().text == "||":
            self.take()
            parts.append(self.conjunction())
        return f_or(parts)

    def conjunction(self) -> Formula:
        parts = [self.comparison()]
        while self.peek().text == "&&":
            self.take()
            parts.append(self.comparison())
        return f_and(parts)

    def comparison(self) -> Formula:
        tok = self.peek()
        if tok.kind == "name" and tok.text == "true":
            self.take()
            return TRUE
        if tok.kind == "name" and tok.text == "false":
            self.take()
            return FALSE
        if tok.text == "(" and self.group_is_formula():
            self.take()
            inner = self.disjunction()
            self.expect(")")
            return inner
        lhs = self.poly_until(tuple(_RELATIONS), stop_closing=True)
        rel = self.take()
        if rel.text not in _RELATIONS:
            self.fail("expected a comparison operator", rel)
        rhs = self.poly_until(("&&", "||", ")"), stop_closing=True)
        return _RELATIONS[rel.text](lhs, rhs)

    def group_is_formula(self) -> bool:
        """Whether a '(' opens a subformula rather than a polynomial."""
        depth = 0
        j = self.i
        while j < len(self.tokens):
            text = self.tokens[j].text
            if text == "(":
                depth += 1
            elif text == ")":
                depth -= 1
                if depth == 0:
                    after = self.tokens[j + 1].text
                    return after not in _RELATIONS and after not in "+-*^"
            elif self.tokens[j].kind == "end":
                break
            j += 1
        return False

    def poly_until(self, stop: "tuple[str, ...]", stop_closing: bool = False) -> Polynomial:
        begin = self.peek()
        depth = 0
        while True:
            tok = self.peek()
            if tok.kind == "end":
                break
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                if depth == 0 and stop_closing:
                    break
                depth -= 1
            elif depth == 0 and (tok.text in stop or tok.text in ("->", "{")):
                break
            self.take()
        span = self.text[begin.pos:self.peek().pos]
        if not span.strip():
            self.fail("expected a polynomial", begin)
        allowed = self.variables + self.tempvars
        try:
            return parse_poly(span, allowed=allowed)
        except AnalysisError as err:
            raise ParseError(str(err), begin.line, begin.col) from None

    # -- assembly

    def build(self) -> IntegerProgram:
        assert self.start is not None
        seen: "dict[str, _Token]" = {}
        transitions = []
        for index, (tid_tok, head, src, guard, dst, update) in enumerate(self.rules):
            tid = tid_tok.text if tid_tok is not None else f"t{index}"
            if tid in seen:
                self.fail(f"duplicate rule id {tid}", tid_tok or head)
            seen[tid] = head
            if dst.text == self.start:
                self.fail("transitions into the start location are not allowed", dst)
            full = {v: update.get(v, Polynomial.var(v)) for v in self.variables}
            transitions.append(Transition(tid, src.text, dst.text, guard, full))
        locations = [self.start]
        for t in transitions:
            for loc in (t.src, t.dst):
                if loc not in locations:
                    locations.append(loc)
        return IntegerProgram(tuple(self.variables), tuple(self.tempvars),
                              tuple(locations), self.start, tuple(transitions))


def parse_program(text: str) -> IntegerProgram:
    return _ProgramParser(text).program()


def print_program(program: IntegerProgram) -> str:
    """Source text that parses back to a structurally equal program."""
    lines = []
    if program.variables:
        lines.append("vars " + " ".join(program.variables))
    if program.tempvars:
        lines.append("temp " + " ".join(program.tempvars))
    lines.append("start " + program.start)
    for t in program.transitions:
        head = f"{t.tid}: {t.src}"
        if t.guard != TRUE:
            head += f" ({t.guard})"
        head += f" -> {t.dst}"
        body = [f"{v} := {t.update[v]}" for v in program.variables
                if t.update[v] != Polynomial.var(v)]
        if body:
            head += " { " + "; ".join(body) + " }"
        lines.append(head)
    return "\n".join(lines) + "\n"


def program_to_json(program: IntegerProgram) -> dict:
    return {
        "vars": list(program.variables),
        "temp": list(program.tempvars),
        "start": program.start,
        "locations": list(program.locations),
        "transitions": [
            {"id": t.tid, "src": t.src, "dst": t.dst,
             "guard": str(t.guard),
             "update": {v: str(t.update[v]) for v in program.variables}}
            for t in program.transitions
        ],
    }


# ---------------------------------------------------------------------------
# Interpretation.


def step(config: "tuple[str, Mapping[str, int]]", t: Transition,
         temp: "Optional[Mapping[str, int]]" = None
         ) -> "Optional[tuple[str, dict[str, int]]]":
    """One evaluation step; None when the guard rejects the state.

    Temporaries not present in temp are read as 0."""
    loc, state = config
    if loc != t.src:
        raise AnalysisError(f"{t.tid} does not start in {loc}")
    scope = dict(state)
    if temp:
        scope.update(temp)
    for v in formula_variables(t.guard):
        scope.setdefault(v, 0)
    for p in t.update.values():
        for v in p.variables():
            scope.setdefault(v, 0)
    if not formula_eval(t.guard, scope):
        return None
    after = {v: int(p.evaluate(scope).rational()) for v, p in t.update.items()}
    return t.dst, after


@dataclass
class OracleReport:
    """Worst observations over all explored runs from one initial state."""

    counters: "dict[str, int]"
    sizes: "dict[tuple[str, str], int]"
    steps: int
    truncated: bool
    pumpable: bool

    def to_json(self) -> dict:
        return {
            "counters": dict(sorted(self.counters.items())),
            "sizes": {f"{tid}:{v}": s
                      for (tid, v), s in sorted(self.sizes.items())},
            "steps": self.steps,
            "truncated": self.truncated,
            "pumpable": self.pumpable,
        }


_VALUE_LIMIT = 10 ** 60


def _poly_source(p: Polynomial) -> str:
    """Python expression computing p over an integer scope."""
    parts = []
    for mono, c in p.sorted_terms():
        if not c.is_integer:
            raise ValueError("non-integer coefficient")
        factors = [str(int(c.rational()))]
        for v, e in mono:
            if not v.isidentifier() or iskeyword(v):
                raise ValueError("variable is not a python name")
            factors.append(v if e == 1 else f"{v}**{e}")
        parts.append("*".join(factors))
    return " + ".join(parts) if parts else "0"


def _compile_poly(p: Polynomial):
    try:
        code = compile(_poly_source(p), "<update>", "eval")
    except (ValueError, SyntaxError):
        return lambda scope: int(p.evaluate(scope).rational())
    empty: dict = {"__builtins__": {}}
    return lambda scope: eval(code, empty, scope)


def _formula_source(f: Formula) -> str:
    if isinstance(f, And):
        if not f.parts:
            return "True"
        return " and ".join(f"({_formula_source(p)})" for p in f.parts)
    if isinstance(f, Or):
        if not f.parts:
            return "False"
        return " or ".join(f"({_formula_source(p)})" for p in f.parts)
    return f"({_poly_source(f.poly)}) > 0"


def _compile_formula(f: Formula):
    try:
        code = compile(_formula_source(f), "<guard>", "eval")
    except (ValueError, SyntaxError):
        return lambda scope: formula_eval(f, scope)
    empty: dict = {"__builtins__": {}}
    return lambda scope: bool(eval(code, empty, scope))


def _drop_var(mono, y: str):
    return mono_of(*[(v, e) for v, e in mono if v != y])


class _Engine:
    """Per-program compiled stepping for the oracle."""

    def __init__(self, program: IntegerProgram):
        self.program = program
        temps = set(program.tempvars)
        self.guard = {}    # tid -> scope -> bool
        self.update = {}   # tid -> list of (var, scope -> int)
        self.temps = {}    # tid -> temps read by the transition, sorted
        self.bounds = {}   # tid -> list of (temp, coeff fn, offset fn)
        for t in program.transitions:
            self.guard[t.tid] = _compile_formula(t.guard)
            self.update[t.tid] = [(v, _compile_poly(t.update[v]))
                                  for v in program.variables]
            used = {v for v in formula_variables(t.guard) if v in temps}
            for p in t.update.values():
                used |= {v for v in p.variables() if v in temps}
            self.temps[t.tid] = sorted(used, key=var_key)
            self.bounds[t.tid] = self._atom_bounds(t, used)

    def _atom_bounds(self, t: Transition, used: "set[str]"):
        """Split each guard atom linear in one temp into coeff and offset."""
        out = []
        for y in sorted(used, key=var_key):
            for atom in formula_atoms(t.guard):
                coeff: dict = {}
                offset: dict = {}
                linear = True
                for mono, c in atom.poly.terms.items():
                    degree = dict(mono).get(y, 0)
                    if degree == 0:
                        offset[mono] = c
                    elif degree == 1:
                        coeff[_drop_var(mono, y)] = c
                    else:
                        linear = False
                if linear and coeff:
                    out.append((y, _compile_poly(Polynomial(coeff)),
                                _compile_poly(Polynomial(offset))))
        return out

    def candidates(self, tid: str, state: "Mapping[str, int]", lo: int,
                   hi: int, cap: int) -> "list[dict[str, int]]":
        """Temp assignments to try: a small grid plus guard boundaries.

        Boundaries are the tightest integers satisfying guard atoms
        linear in a single temporary, other temporaries read as 0; they
        stress both the longest-run and the largest-step choices."""
        temps = self.temps[tid]
        if not temps:
            return [{}]
        scope = dict(state)
        for y in temps:
            scope[y] = 0
        per_var: "dict[str, list[int]]" = {}
        for y in temps:
            values = list(range(lo, hi + 1))
            for yb, coeff_fn, offset_fn in self.bounds[tid]:
                if yb != y:
                    continue
                a = coeff_fn(scope)
                if not a:
                    continue
                rest = offset_fn(scope)
                # satisfy a*y + rest > 0 as tightly as possible
                edge = Fraction(-rest, a)
                values.append(floor(edge) + 1 if a > 0 else ceil(edge) - 1)
            uniq = sorted(set(values), key=lambda v: (abs(v), v))
            per_var[y] = uniq[:max(2, cap)]
        combos: "list[dict[str, int]]" = [{}]
        for y in temps:
            combos = [dict(c, **{y: v}) for c in combos for v in per_var[y]]
            if len(combos) > 64:
                combos = combos[:64]
        return combos

    def fire(self, tid: str, state: "dict[str, int]",
             temp: "dict[str, int]") -> "Optional[dict[str, int]]":
        scope = {**state, **temp} if temp else state
        if not self.guard[tid](scope):
            return None
        return {v: fn(scope) for v, fn in self.update[tid]}


def run_oracle(program: IntegerProgram, sigma0: "Mapping[str, int]",
               temp_strategy: str = "adversarial", step_cap: int = 100_000,
               rng: "Optional[Random]" = None) -> OracleReport:
    """Explore runs from sigma0 and report per-transition worst cases.

    adversarial and exhaustive walk the whole choice tree depth-first
    over a finite temp grid (exhaustive with a wider grid), bounded by
    step_cap evaluation steps in total; random follows a single sampled
    path.  Counters are maxima over single explored runs, sizes are
    maxima right after the transition anywhere in the tree."""
    rng = rng or Random(20240817)
    state0 = {v: int(sigma0.get(v, 0)) for v in program.variables}
    report = OracleReport({t.tid: 0 for t in program.transitions}, {}, 0, False, False)

    def observe(tid: str, counts: "dict[str, int]", state: "dict[str, int]",
                depth: int) -> None:
        report.counters[tid] = max(report.counters[tid], counts[tid])
        for v, value in state.items():
            key = (tid, v)
            size = abs(value)
            if size > report.sizes.get(key, -1):
                report.sizes[key] = size
        report.steps = max(report.steps, depth)

    engine = _Engine(program)
    if temp_strategy == "random":
        _random_walk(engine, state0, step_cap, rng, observe, report)
        return report
    if temp_strategy not in ("adversarial", "exhaustive"):
        raise AnalysisError(f"unknown temp strategy: {temp_strategy}")
    lo, hi = (-3, 3) if temp_strategy == "exhaustive" else (-2, 2)
    cap = 8 if temp_strategy == "exhaustive" else 6
    budget = step_cap
    counts = {t.tid: 0 for t in program.transitions}
    on_path: "set[tuple]" = set()
    outgoing = {loc: tuple(program.outgoing(loc)) for loc in program.locations}

    def open_frame(loc: str, state: "dict[str, int]", depth: int,
                   via: "Optional[str]") -> "Optional[list]":
        key = (loc,) + tuple(state[v] for v in program.variables)
        if key in on_path:
            report.pumpable = True
            report.truncated = True
            return None
        if any(abs(x) > _VALUE_LIMIT for x in state.values()):
            report.truncated = True
            return None
        on_path.add(key)
        choices = ((t, temp) for t in outgoing[loc]
                   for temp in engine.candidates(t.tid, state, lo, hi, cap))
        return [loc, state, depth, key, choices, via]

    root = open_frame(program.start, state0, 0, None)
    frames = [] if root is None else [root]
    while frames:
        loc, state, depth, key, choices, via = frames[-1]
        advanced = False
        for t, temp in choices:
            if budget <= 0:
                report.truncated = True
                break
            after = engine.fire(t.tid, state, temp)
            if after is None:
                continue
            budget -= 1
            counts[t.tid] += 1
            observe(t.tid, counts, after, depth + 1)
            child = open_frame(t.dst, after, depth + 1, t.tid)
            if child is None:
                counts[t.tid] -= 1
                continue
            frames.append(child)
            advanced = True
            break
        if not advanced:
            on_path.discard(key)
            frames.pop()
            if via is not None:
                counts[via] -= 1
    return report


def _random_walk(engine: _Engine, state0: "dict[str, int]",
                 step_cap: int, rng: Random, observe, report: OracleReport) -> None:
    program = engine.program
    counts = {t.tid: 0 for t in program.transitions}
    loc, state = program.start, state0
    for depth in range(1, step_cap + 1):
        options = list(program.outgoing(loc))
        rng.shuffle(options)
        taken = None
        for t in options:
            candidates = engine.candidates(t.tid, state, -2, 2, 6)
            rng.shuffle(candidates)
            for temp in candidates:
                after = engine.fire(t.tid, state, temp)
                if after is not None:
                    taken = (t, after)
                    break
            if taken:
                break
        if not taken:
            return
        t, state = taken
        loc = t.dst
        counts[t.tid] += 1
        observe(t.tid, counts, state, depth)
        if any(abs(x) > _VALUE_LIMIT for x in state.values()):
            report.truncated = True
            return
    report.truncated = True


# ---------------------------------------------------------------------------
# Graph analyses.


@dataclass(frozen=True)
class GraphAnalysis:
    sccs: "tuple[frozenset, ...]"               # location sets, topological
    components: "tuple[frozenset, ...]"          # cyclic transition-id sets
    simple_cycles: "tuple[tuple[str, ...], ...]"  # tid sequences
    commuting_families: "tuple[tuple, ...]"      # (location, cycles) pairs


def entry_transitions(program: IntegerProgram,
                      tids: "frozenset | set | Sequence[str]") -> "tuple[str, ...]":
    """Transitions outside tids that end in a source location of tids."""
    inside = set(tids)
    heads = {program.transition(tid).src for tid in tids}
    out = [t.tid for t in program.transitions
           if t.tid not in inside and t.dst in heads]
    return tuple(out)


def _location_sccs(program: IntegerProgram) -> "list[frozenset]":
    order: "list[str]" = []
    seen: set = set()

    def forward(root: str) -> None:
        stack = [(root, iter(program.outgoing(root)))]
        seen.add(root)
        while stack:
            loc, it = stack[-1]
            for t in it:
                if t.dst not in seen:
                    seen.add(t.dst)
                    stack.append((t.dst, iter(program.outgoing(t.dst))))
                    break
            else:
                order.append(loc)
                stack.pop()

    for loc in program.locations:
        if loc not in seen:
            forward(loc)
    incoming: "dict[str, list[str]]" = {loc: [] for loc in program.locations}
    for t in program.transitions:
        incoming[t.dst].append(t.src)
    sccs: "list[frozenset]" = []
    assigned: set = set()
    for loc in reversed(order):
        if loc in assigned:
            continue
        group = []
        stack = [loc]
        assigned.add(loc)
        while stack:
            cur = stack.pop()
            group.append(cur)
            for prev in incoming[cur]:
                if prev not in assigned:
                    assigned.add(prev)
                    stack.append(prev)
        sccs.append(frozenset(group))
    return sccs


def _simple_cycles_in(program: IntegerProgram, members: "list[Transition]",
                      max_len: int = 8) -> "list[tuple[str, ...]]":
    by_src: "dict[str, list[Transition]]" = {}
    for t in members:
        by_src.setdefault(t.src, []).append(t)
    locs = sorted(by_src, key=var_key)
    cycles: "list[tuple[str, ...]]" = []

    def extend(origin: str, loc: str, path: "list[Transition]",
               visited: "set[str]") -> None:
        for t in by_src.get(loc, ()):  # noqa: B023
            if t.dst == origin:
                cycles.append(tuple(p.tid for p in path + [t]))
            elif (t.dst not in visited and len(path) + 1 < max_len
                  and var_key(t.dst) > var_key(origin)):
                extend(origin, t.dst, path + [t], visited | {t.dst})

    for origin in locs:
        extend(origin, origin, [], {origin})
    return cycles


def compose_updates(updates: "Sequence[Mapping[str, Polynomial]]"
                    ) -> "dict[str, Polynomial]":
    """Update of executing the given updates in order, as one substitution."""
    acc: "dict[str, Polynomial]" = {}
    for upd in updates:
        if not acc:
            acc = dict(upd)
        else:
            acc = {v: p.substitute(acc) for v, p in upd.items()}
    return acc


def _rotate_to(cycle: "tuple[str, ...]", program: IntegerProgram,
               loc: str) -> "Optional[tuple[str, ...]]":
    for k, tid in enumerate(cycle):
        if program.transition(tid).src == loc:
            return cycle[k:] + cycle[:k]
    return None


def graph_analysis(program: IntegerProgram) -> GraphAnalysis:
    sccs = _location_sccs(program)
    components: "list[frozenset]" = []
    cycles: "list[tuple[str, ...]]" = []
    for scc in sccs:
        members = [t for t in program.transitions
                   if t.src in scc and t.dst in scc]
        if not members:
            continue
        components.append(frozenset(t.tid for t in members))
        temp_free = [t for t in members if program.temp_free(t)]
        cycles.extend(_simple_cycles_in(program, temp_free))
    families: "list[tuple]" = []
    for loc in program.locations:
        rotated = []
        for c in cycles:
            r = _rotate_to(c, program, loc)
            if r is not None:
                rotated.append(r)
        if len(rotated) < 2:
            continue
        family = _commuting_subset(program, loc, rotated)
        if len(family) >= 2:
            families.append((loc, tuple(family)))
    return GraphAnalysis(tuple(sccs), tuple(components), tuple(cycles),
                         tuple(families))


def _chained_update(program: IntegerProgram,
                    cycle: "tuple[str, ...]") -> "dict[str, Polynomial]":
    return compose_updates([program.transition(tid).update for tid in cycle])


def _commuting_subset(program: IntegerProgram, loc: str,
                      rotated: "list[tuple[str, ...]]") -> "list[tuple[str, ...]]":
    """Greatest prefix-greedy family of disjoint commuting cycles at loc."""
    chosen: "list[tuple[str, ...]]" = []
    used: set = set()
    chains: "list[dict[str, Polynomial]]" = []
    for cycle in rotated:
        if used & set(cycle):
            continue
        chain = _chained_update(program, cycle)
        ok = all(compose_updates([chain, other]) == compose_updates([other, chain])
                 for other in chains)
        if not ok:
            continue
        chosen.append(cycle)
        chains.append(chain)
        used |= set(cycle)
    if len(chosen) < 2:
        return []
    union = {tid for c in chosen for tid in c}
    for tid in entry_transitions(program, union):
        if program.transition(tid).dst != loc:
            return []
    return chosen
