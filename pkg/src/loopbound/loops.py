"""Single-path loops: structure detection, chaining, and exact execution.

A loop is a guard formula together with a polynomial update on a fixed
variable tuple.  The update is *solvable* when variables split into blocks
with a linear integer matrix inside each block and polynomial tails over
earlier blocks only; blocks of size one give triangular weakly non-linear
(twn) updates, and nonnegative diagonal coefficients give tnn updates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .expr import (
    AnalysisError, Atom, Formula, Gaussian, Or, Polynomial, TRUE, And,
    formula_atoms, formula_eval, formula_substitute, formula_variables,
    mono_degree, var_key,
)
from .linalg import Matrix, jordan_decomposition, splits_over_rationals

Update = dict  # dict[str, Polynomial]


def strongly_connected_components(graph: "Mapping[object, Sequence[object]]"):
    """Tarjan's SCC, iterative, deterministic, in topological order."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    components: list = []
    counter = [0]

    def visit(root):
        work = [(root, iter(graph.get(root, ())))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for succ in it:
                if succ not in index:
                    index[succ] = low[succ] = counter[0]
                    counter[0] += 1
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(graph.get(succ, ()))))
                    advanced = True
                    break
                if succ in on_stack:
                    low[node] = min(low[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp: list = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                components.append(comp)

    for node in graph:
        if node not in index:
            visit(node)
    # Tarjan emits components in reverse topological order
    components.reverse()
    return components


@dataclass(frozen=True)
class SolvableStructure:
    """Partition of the variables witnessing solvability."""

    blocks: tuple  # tuple[tuple[str, ...], ...] in dependency order
    matrices: tuple  # Matrix per block
    tails: tuple  # tuple[Polynomial, ...] per block, over earlier blocks

    def block_of(self, var: str) -> int:
        for i, block in enumerate(self.blocks):
            if var in block:
                return i
        raise KeyError(var)

    def eigenvalues(self):
        """Eigenvalues over Q(i) of all blocks, or None outside Q(i)."""
        from .linalg import gaussian_eigenvalues

        out: list = []
        for m in self.matrices:
            eig = gaussian_eigenvalues(m)
            if eig is None:
                return None
            out.extend(eig)
        merged: dict = {}
        for lam, mult in out:
            merged[lam] = merged.get(lam, 0) + mult
        return sorted(merged.items(), key=lambda t: (t[0].re, t[0].im))

    @property
    def is_twn(self) -> bool:
        return all(len(b) == 1 for b in self.blocks)

    @property
    def is_tnn(self) -> bool:
        return self.is_twn and all(
            m[0, 0].is_integer and m[0, 0].re >= 0 for m in self.matrices)


def compose_updates(first: Update, second: Update) -> Update:
    """Update of running `first` then `second` (substitution composition)."""
    return {v: p.substitute(first) for v, p in second.items()}


def iterate_update(update: Update, k: int) -> Update:
    acc = {v: Polynomial.var(v) for v in update}
    for _ in range(k):
        acc = compose_updates(acc, update)
    return acc


@dataclass(frozen=True)
class Loop:
    guard: Formula
    update: "dict[str, Polynomial]"
    variables: tuple

    @staticmethod
    def make(guard: Formula, update: "Mapping[str, Polynomial]",
             variables: "Optional[Iterable[str]]" = None) -> "Loop":
        if variables is None:
            names = set(update) | formula_variables(guard)
            for p in update.values():
                names |= p.variables()
            variables = sorted(names, key=var_key)
        variables = tuple(variables)
        full = {v: update.get(v, Polynomial.var(v)) for v in variables}
        missing = sorted(
            {w for p in full.values() for w in p.variables()} - set(variables),
            key=var_key)
        if missing:
            raise AnalysisError(f"unbound variable: {missing[0]}")
        missing = sorted(formula_variables(guard) - set(variables), key=var_key)
        if missing:
            raise AnalysisError(f"unbound variable: {missing[0]}")
        return Loop(guard, full, variables)

    @property
    def dim(self) -> int:
        return len(self.variables)

    # -- execution ---------------------------------------------------------

    def holds(self, sigma: "Mapping[str, int]") -> bool:
        return formula_eval(self.guard, sigma)

    def step(self, sigma: "Mapping[str, int]") -> "dict[str, int]":
        return {v: int(self.update[v].evaluate(sigma).rational())
                for v in self.variables}

    def run(self, sigma: "Mapping[str, int]", cap: int = 100_000):
        """Number of full iterations until the guard fails; None if capped."""
        state = {v: sigma[v] for v in self.variables}
        steps = 0
        while self.holds(state):
            if steps >= cap:
                return None, state
            state = self.step(state)
            steps += 1
        return steps, state

    # -- structure ---------------------------------------------------------

    def solvable_structure(self) -> "Optional[SolvableStructure]":
        graph = {
            v: sorted(self.update[v].variables() & set(self.variables),
                      key=var_key)
            for v in self.variables}
        # SCCs come dependents-first along v -> w ("v reads w") edges;
        # blocks need the variables a tail reads to appear earlier.
        comps = list(reversed(strongly_connected_components(graph)))
        blocks: list = []
        matrices: list = []
        tails: list = []
        earlier: set = set()
        for comp in comps:
            block = tuple(sorted(comp, key=var_key))
            rows: list = []
            tail_polys: list = []
            for v in block:
                row = [Fraction(0)] * len(block)
                tail = Polynomial.zero()
                for mono, coeff in self.update[v].terms.items():
                    mono_vars = {w for w, _ in mono}
                    inside = mono_vars & set(block)
                    if not inside:
                        if mono_vars - earlier:
                            return None  # depends on a later block
                        tail = tail + Polynomial({mono: coeff})
                        continue
                    if mono_degree(mono) != 1 or not coeff.is_integer:
                        return None  # nonlinear or non-integer inside block
                    (w, _), = mono
                    row[block.index(w)] = coeff.re
                rows.append(row)
                tail_polys.append(tail)
            blocks.append(block)
            matrices.append(Matrix.from_rows(rows))
            tails.append(tuple(tail_polys))
            earlier |= set(block)
        return SolvableStructure(tuple(blocks), tuple(matrices), tuple(tails))

    def period(self, structure: "Optional[SolvableStructure]" = None) -> "Optional[int]":
        """Least p making all block eigenvalues rational after p steps.

        The search per block is capped at the cube of the block size.
        """
        from math import lcm

        if structure is None:
            structure = self.solvable_structure()
        if structure is None:
            return None
        overall = 1
        for m in structure.matrices:
            cap = m.nrows ** 3
            power = m
            for p in range(1, cap + 1):
                if splits_over_rationals(power):
                    overall = lcm(overall, p)
                    break
                power = power * m
            else:
                return None
        return overall

    # -- transformations ---------------------------------------------------

    def chained(self, p: int, relaxed: bool = True) -> "Loop":
        """The loop executing p original iterations per step.

        With `relaxed` the guard is kept as-is (sound for runtime bounds:
        a guard failure of the chained loop is a guard failure of the
        original); otherwise the guard is the conjunction over the first
        p iterates.
        """
        from .expr import f_and

        if p < 1:
            raise ValueError("chain length must be positive")
        acc = iterate_update(self.update, p)
        if relaxed:
            guard = self.guard
        else:
            parts: list = []
            prefix = {v: Polynomial.var(v) for v in self.variables}
            for _ in range(p):
                parts.append(formula_substitute(self.guard, prefix))
                prefix = compose_updates(prefix, self.update)
            guard = f_and(parts)
        return Loop(guard, acc, self.variables)

    def relevant_variables(self) -> "tuple[str, ...]":
        """Variables the guard depends on, closed under update dependencies."""
        needed = set(formula_variables(self.guard))
        while True:
            grown = set(needed)
            for v in needed:
                grown |= self.update[v].variables() & set(self.variables)
            if grown == needed:
                break
            needed = grown
        return tuple(v for v in self.variables if v in needed)

    def restricted(self, keep: "Sequence[str]") -> "Loop":
        keep_set = set(keep)
        for v in keep:
            outside = self.update[v].variables() - keep_set
            if outside:
                raise ValueError("restriction is not dependency-closed")
        if formula_variables(self.guard) - keep_set:
            raise ValueError("restriction drops guard variables")
        return Loop(self.guard,
                    {v: self.update[v] for v in keep},
                    tuple(v for v in self.variables if v in keep_set))

    def __str__(self) -> str:
        body = "; ".join(f"{v} := {self.update[v]}" for v in self.variables)
        return f"while ({self.guard}) {{ {body} }}"


class LoopKind(enum.Enum):
    UNSOLVABLE = "unsolvable"
    SOLVABLE = "solvable"
    TWN = "twn"
    TNN = "tnn"


@dataclass(frozen=True)
class LoopClass:
    """Classification of a loop's update structure."""

    kind: LoopKind
    structure: "Optional[SolvableStructure]"
    eigenvalues: "Optional[tuple]"  # ((Gaussian, multiplicity), ...)
    period: "Optional[int]"
    defective: frozenset  # variables blocking solvability

    @property
    def is_solvable(self) -> bool:
        return self.kind is not LoopKind.UNSOLVABLE

    @property
    def is_periodic(self) -> bool:
        return self.period is not None


def classify_loop(loop: Loop) -> LoopClass:
    """Detect the solvable partition, eigenvalues, and period of a loop.

    Variables in a dependency cycle with nonlinear or non-integer intra-block
    terms are defective, as is anything reading a defective variable.
    """
    var_set = set(loop.variables)
    graph = {v: sorted(loop.update[v].variables() & var_set, key=var_key)
             for v in loop.variables}
    comps = list(reversed(strongly_connected_components(graph)))
    defective: set = set()
    blocks: list = []
    matrices: list = []
    tails: list = []
    earlier: set = set()
    for comp in comps:
        block = tuple(sorted(comp, key=var_key))
        rows: list = []
        tail_polys: list = []
        bad = any(w in defective
                  for v in block for w in loop.update[v].variables())
        if not bad:
            for v in block:
                row = [Fraction(0)] * len(block)
                tail = Polynomial.zero()
                for mono, coeff in loop.update[v].terms.items():
                    mono_vars = {w for w, _ in mono}
                    inside = mono_vars & set(block)
                    if not inside:
                        tail = tail + Polynomial({mono: coeff})
                        continue
                    if mono_degree(mono) != 1 or not coeff.is_integer:
                        bad = True
                        break
                    (w, _), = mono
                    row[block.index(w)] = coeff.re
                if bad:
                    break
                rows.append(row)
                tail_polys.append(tail)
        if bad:
            defective |= set(block)
            continue
        blocks.append(block)
        matrices.append(Matrix.from_rows(rows))
        tails.append(tuple(tail_polys))
        earlier |= set(block)
    if defective:
        return LoopClass(LoopKind.UNSOLVABLE, None, None, None,
                         frozenset(defective))
    structure = SolvableStructure(tuple(blocks), tuple(matrices), tuple(tails))
    eigen = structure.eigenvalues()
    period = loop.period(structure)
    if structure.is_tnn:
        kind = LoopKind.TNN
    elif structure.is_twn:
        kind = LoopKind.TWN
    else:
        kind = LoopKind.SOLVABLE
    eigen_tuple = tuple(eigen) if eigen is not None else None
    return LoopClass(kind, structure, eigen_tuple, period, frozenset())


# ---------------------------------------------------------------------------
# Linear changes of variables.


@dataclass(frozen=True)
class Automorphism:
    """Linear change of variables and its inverse, as substitution maps."""

    forward: dict  # dict[str, Polynomial]
    backward: dict

    @property
    def is_identity(self) -> bool:
        return all(p == Polynomial.var(v) for v, p in self.forward.items())

    @property
    def is_rational(self) -> bool:
        return all(p.is_rational for p in self.forward.values())

    def norm_map(self) -> dict:
        """Coefficient-wise absolute values of the forward images."""
        out = {}
        for v, p in self.forward.items():
            if not p.is_rational:
                raise AnalysisError("rational closed form required")
            out[v] = p.absolute()
        return out

    def check(self) -> None:
        """Verify forward and backward compose to the identity."""
        for v in self.forward:
            roundtrip = self.forward[v].substitute(self.backward)
            if roundtrip != Polynomial.var(v):
                raise AnalysisError("automorphism inverse check failed")


def identity_automorphism(names: "Iterable[str]") -> Automorphism:
    base = {v: Polynomial.var(v) for v in names}
    return Automorphism(dict(base), dict(base))


def build_automorphism(structure: SolvableStructure) -> Automorphism:
    """Blockwise change of variables bringing each block to Jordan form."""
    forward: dict = {}
    backward: dict = {}
    for block, matrix in zip(structure.blocks, structure.matrices):
        if len(block) == 1:
            v = block[0]
            forward[v] = Polynomial.var(v)
            backward[v] = Polynomial.var(v)
            continue
        jd = jordan_decomposition(matrix)
        vars_poly = [Polynomial.var(v) for v in block]
        for i, v in enumerate(block):
            fwd = Polynomial.zero()
            bwd = Polynomial.zero()
            for j, w_poly in enumerate(vars_poly):
                fwd = fwd + w_poly.scale(jd.p[i, j])
                bwd = bwd + w_poly.scale(jd.p_inv[i, j])
            forward[v] = fwd
            backward[v] = bwd
    return Automorphism(forward, backward)


def conjugate_update(update: "Mapping[str, Polynomial]",
                     theta: Automorphism) -> dict:
    """The update in transformed coordinates, as a substitution map."""
    return {
        v: theta.forward[v].substitute(dict(update)).substitute(theta.backward)
        for v in update}


def _map_atoms(f: Formula, fn) -> Formula:
    if isinstance(f, Atom):
        return fn(f)
    if isinstance(f, And):
        return And(tuple(_map_atoms(p, fn) for p in f.parts))
    return Or(tuple(_map_atoms(p, fn) for p in f.parts))


def conjugate(loop: Loop, theta: Automorphism) -> Loop:
    """The loop in transformed coordinates.

    Guard atoms are rewritten through the inverse map and rescaled by the
    least common multiple of their denominators to keep integer coefficients.
    """
    theta.check()
    update = conjugate_update(loop.update, theta)

    def tx(atom: Atom) -> Atom:
        poly = atom.poly.substitute(theta.backward)
        if not poly.is_rational:
            raise AnalysisError("non-rational guard after conjugation")
        return Atom(poly.scale(poly.denominator_lcm()))

    return Loop(_map_atoms(loop.guard, tx), update, loop.variables)


# ---------------------------------------------------------------------------
# Rewriting loops whose update is not solvable.


def _defective_part(poly: Polynomial, defective: "set[str]") -> Polynomial:
    """Monomials built entirely from defective variables."""
    out = Polynomial.zero()
    for mono, coeff in poly.terms.items():
        mono_vars = {w for w, _ in mono}
        if mono_vars and mono_vars <= defective:
            out = out + Polynomial({mono: coeff})
    return out


def _scalar_multiple(target: Polynomial, base: Polynomial):
    """c with target = c * base, or None."""
    if not base:
        return None
    mono, coeff = next(iter(base.terms.items()))
    c = target.coeff(mono) / coeff
    if target - base.scale(c) == Polynomial.zero():
        return c
    return None


def eliminate_unsolvable(loop: Loop):
    """Replace a defective guard subexpression q by a fresh variable.

    Succeeds when the update image of q rewrites as c*q + r with r free of
    defective variables; the fresh variable then follows x := c*x + r and
    the defective variables are dropped.  Returns (loop, q, fresh) or None.
    """
    cls = classify_loop(loop)
    if cls.kind is not LoopKind.UNSOLVABLE:
        return None
    defective = set(cls.defective)
    candidates: list = []
    for atom in formula_atoms(loop.guard):
        part = _defective_part(atom.poly, defective)
        if part and part not in candidates:
            candidates.append(part)
    candidates.sort(key=lambda p: (-len(p.terms), -p.degree(), str(p)))
    retained = [v for v in loop.variables if v not in defective]
    for v in retained:
        if loop.update[v].variables() & defective:
            return None
    fresh = None
    k = 1
    while fresh is None:
        name = f"x{k}"
        if name not in loop.variables:
            fresh = name
        k += 1
    for q in candidates:
        image = q.substitute(loop.update)
        part = _defective_part(image, defective)
        c = _scalar_multiple(part, q)
        if c is None or not c.is_rational:
            continue
        rest = image - q.scale(c)
        if rest.variables() & defective:
            continue

        ok = True

        def tx(atom: Atom) -> "Atom":
            nonlocal ok
            dpart = _defective_part(atom.poly, defective)
            if not dpart:
                return atom
            d = _scalar_multiple(dpart, q)
            if d is None:
                ok = False
                return atom
            return Atom(atom.poly - dpart + Polynomial.var(fresh).scale(d))

        guard = _map_atoms(loop.guard, tx)
        if not ok or formula_variables(guard) & defective:
            continue
        update = {v: loop.update[v] for v in retained}
        update[fresh] = Polynomial.var(fresh).scale(c) + rest
        new_vars = tuple(sorted(retained + [fresh], key=var_key))
        return Loop(guard, update, new_vars), q, fresh
    return None
