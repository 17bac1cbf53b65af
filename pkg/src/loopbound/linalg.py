"""Exact linear algebra over the Gaussian rationals.

Used for update matrices of loop variable blocks: characteristic
polynomials, eigenvalue extraction inside Q(i), and Jordan decompositions
with exact change-of-basis matrices.  Everything is deterministic; bases
are derived from reduced row echelon forms in fixed column order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Optional, Sequence

from .expr import AnalysisError, G_ONE, G_ZERO, Gaussian, GaussianLike, as_gaussian


@dataclass(frozen=True)
class Matrix:
    rows: tuple  # tuple[tuple[Gaussian, ...], ...]

    @staticmethod
    def from_rows(rows: "Sequence[Sequence[GaussianLike]]") -> "Matrix":
        return Matrix(tuple(tuple(as_gaussian(x) for x in row) for row in rows))

    @staticmethod
    def identity(n: int) -> "Matrix":
        return Matrix(tuple(
            tuple(G_ONE if i == j else G_ZERO for j in range(n)) for i in range(n)))

    @staticmethod
    def zero(n: int, m: int) -> "Matrix":
        return Matrix(tuple(tuple(G_ZERO for _ in range(m)) for _ in range(n)))

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def ncols(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def __getitem__(self, idx) -> Gaussian:
        i, j = idx
        return self.rows[i][j]

    def __add__(self, other: "Matrix") -> "Matrix":
        return Matrix(tuple(
            tuple(a + b for a, b in zip(r1, r2))
            for r1, r2 in zip(self.rows, other.rows)))

    def __sub__(self, other: "Matrix") -> "Matrix":
        return Matrix(tuple(
            tuple(a - b for a, b in zip(r1, r2))
            for r1, r2 in zip(self.rows, other.rows)))

    def __mul__(self, other: "Matrix") -> "Matrix":
        cols = list(zip(*other.rows))
        return Matrix(tuple(
            tuple(sum((a * b for a, b in zip(row, col)), G_ZERO) for col in cols)
            for row in self.rows))

    def scale(self, c: GaussianLike) -> "Matrix":
        g = as_gaussian(c)
        return Matrix(tuple(tuple(x * g for x in row) for row in self.rows))

    def __pow__(self, k: int) -> "Matrix":
        if k < 0:
            raise ValueError("negative matrix power")
        result = Matrix.identity(self.nrows)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def column(self, j: int) -> "tuple[Gaussian, ...]":
        return tuple(row[j] for row in self.rows)

    def apply(self, vec: "Sequence[GaussianLike]") -> "tuple[Gaussian, ...]":
        return tuple(
            sum((a * as_gaussian(v) for a, v in zip(row, vec)), G_ZERO)
            for row in self.rows)

    def trace(self) -> Gaussian:
        return sum((self.rows[i][i] for i in range(self.nrows)), G_ZERO)

    @property
    def is_rational(self) -> bool:
        return all(x.is_rational for row in self.rows for x in row)

    def __str__(self) -> str:
        return "[" + "; ".join(
            ", ".join(str(x) for x in row) for row in self.rows) + "]"


def from_columns(cols: "Sequence[Sequence[Gaussian]]") -> Matrix:
    return Matrix(tuple(zip(*[tuple(c) for c in cols])))


def rref(m: Matrix) -> "tuple[Matrix, list[int]]":
    """Reduced row echelon form and the pivot column indices."""
    rows = [list(r) for r in m.rows]
    nr, nc = len(rows), m.ncols
    pivots: list = []
    r = 0
    for c in range(nc):
        pivot = next((i for i in range(r, nr) if rows[i][c]), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = G_ONE / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(nr):
            if i != r and rows[i][c]:
                factor = rows[i][c]
                rows[i] = [a - factor * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == nr:
            break
    return Matrix(tuple(tuple(row) for row in rows)), pivots


def kernel_basis(m: Matrix) -> "list[tuple[Gaussian, ...]]":
    """Canonical basis of the null space (free variable set to one)."""
    reduced, pivots = rref(m)
    nc = m.ncols
    free = [c for c in range(nc) if c not in pivots]
    basis: list = []
    for f in free:
        vec = [G_ZERO] * nc
        vec[f] = G_ONE
        for r, p in enumerate(pivots):
            vec[p] = -reduced[r, f]
        basis.append(tuple(vec))
    return basis


def inverse(m: Matrix) -> Matrix:
    n = m.nrows
    if n != m.ncols:
        raise ValueError("inverse of a non-square matrix")
    aug = Matrix(tuple(
        row + tuple(G_ONE if i == j else G_ZERO for j in range(n))
        for i, row in enumerate(m.rows)))
    reduced, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise ValueError("matrix is singular")
    return Matrix(tuple(row[n:] for row in reduced.rows))


def solve(m: Matrix, rhs: "Sequence[Gaussian]") -> "Optional[tuple[Gaussian, ...]]":
    """One exact solution of m*x = rhs (free variables zero), or None."""
    aug = Matrix(tuple(row + (as_gaussian(b),) for row, b in zip(m.rows, rhs)))
    reduced, pivots = rref(aug)
    nc = m.ncols
    if nc in pivots:
        return None
    x = [G_ZERO] * nc
    for r, p in enumerate(pivots):
        x[p] = reduced[r, nc]
    return tuple(x)


def rank(m: Matrix) -> int:
    return len(rref(m)[1])


# ---------------------------------------------------------------------------
# Characteristic polynomials and eigenvalues.


def charpoly(m: Matrix) -> "list[Gaussian]":
    """Monic characteristic polynomial, coefficients ascending by degree.

    Faddeev-LeVerrier: exact over any field of characteristic zero.
    """
    n = m.nrows
    coeffs = [G_ZERO] * n + [G_ONE]
    mk = Matrix.identity(n)
    for k in range(1, n + 1):
        mk = m * mk
        ck = -(mk.trace() / k)
        coeffs[n - k] = ck
        mk = mk + Matrix.identity(n).scale(ck)
    return coeffs


def _poly_eval(coeffs: "Sequence[Gaussian]", x: Gaussian) -> Gaussian:
    acc = G_ZERO
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly_deflate(coeffs: "list[Gaussian]", root: Gaussian) -> "list[Gaussian]":
    out: list = [G_ZERO] * (len(coeffs) - 1)
    carry = G_ZERO
    for k in range(len(coeffs) - 1, 0, -1):
        carry = coeffs[k] + carry * root
        out[k - 1] = carry
    return out


def _rational_sqrt(q: Fraction) -> "Optional[Fraction]":
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = isqrt(n), isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def rational_roots(coeffs: "Sequence[Fraction]") -> "list[tuple[Fraction, int]]":
    """All rational roots with multiplicities, in increasing order."""
    from math import lcm

    work = [as_gaussian(c) for c in coeffs]
    while len(work) > 1 and not work[-1]:
        work.pop()
    den = lcm(*[c.re.denominator for c in work]) if work else 1
    ints = [int(c.re * den) for c in work]
    # strip zero roots first
    mult0 = 0
    while ints and ints[0] == 0:
        ints.pop(0)
        work = _poly_deflate(work, G_ZERO)
        mult0 += 1
    found: dict = {}
    if not ints:
        return [(Fraction(0), mult0)] if mult0 else []
    a0, an = abs(ints[0]), abs(ints[-1])
    for p in sorted(_divisors(a0)):
        for q in sorted(_divisors(an)):
            cand = Fraction(p, q)
            for root in (cand, -cand):
                if root in found:
                    continue
                g = as_gaussian(root)
                mult = 0
                while len(work) > 1 and not _poly_eval(work, g):
                    work = _poly_deflate(work, g)
                    mult += 1
                if mult:
                    found[root] = mult
    out = [(Fraction(0), mult0)] if mult0 else []
    out.extend(sorted(found.items()))
    return sorted(out)


def _divisors(n: int) -> "list[int]":
    if n == 0:
        return [1]
    out = set()
    d = 1
    while d * d <= n:
        if n % d == 0:
            out.add(d)
            out.add(n // d)
        d += 1
    return sorted(out)


def gaussian_eigenvalues(m: Matrix) -> "Optional[list[tuple[Gaussian, int]]]":
    """Eigenvalues with multiplicities when the spectrum lies in Q(i).

    Returns None when the characteristic polynomial does not split into
    linear factors over the Gaussian rationals (within the supported
    factor degrees).
    """
    coeffs = charpoly(m)
    rational = [c.rational() for c in coeffs]
    work = [as_gaussian(c) for c in coeffs]
    eigen: dict = {}
    for root, mult in rational_roots(rational):
        g = as_gaussian(root)
        eigen[(root, Fraction(0))] = eigen.get((root, Fraction(0)), 0) + mult
        for _ in range(mult):
            work = _poly_deflate(work, g)
    # remaining factor has no rational roots; try conjugate pairs
    while len(work) > 2:
        if len(work) == 3:
            b = (work[1] / work[2]).rational()
            c = (work[0] / work[2]).rational()
            disc = b * b - 4 * c
            s = _rational_sqrt(-disc)
            if s is None:
                return None
            re, im = -b / 2, s / 2
            for sign in (1, -1):
                key = (re, im * sign)
                eigen[key] = eigen.get(key, 0) + 1
            work = [G_ONE]
            break
        return None
    out = [(Gaussian(re, im), mult) for (re, im), mult in eigen.items()]
    out.sort(key=lambda t: (t[0].re, t[0].im))
    return out


def splits_over_rationals(m: Matrix) -> bool:
    """True when all eigenvalues are rational (with full multiplicity)."""
    coeffs = [c.rational() for c in charpoly(m)]
    total = sum(mult for _, mult in rational_roots(coeffs))
    return total == m.nrows


# ---------------------------------------------------------------------------
# Jordan decomposition.


@dataclass(frozen=True)
class JordanDecomposition:
    """J = P * A * P^(-1), with P_inv holding the generalized eigenvectors."""

    jordan: Matrix
    p: Matrix
    p_inv: Matrix
    blocks: tuple  # tuple[(eigenvalue, size), ...] in column order


def jordan_decomposition(a: Matrix) -> JordanDecomposition:
    n = a.nrows
    eigen = gaussian_eigenvalues(a)
    if eigen is None:
        raise AnalysisError("non-gaussian spectrum")
    columns: list = []
    blocks: list = []
    for lam, mult in eigen:
        nmat = a - Matrix.identity(n).scale(lam)
        powers = [Matrix.identity(n)]
        kernels = [[]]
        while len(kernels[-1]) < mult:
            powers.append(powers[-1] * nmat)
            kernels.append(kernel_basis(powers[-1]))
        s = len(kernels) - 1
        # seeds per level, highest first; lower levels inherit mapped seeds
        level_vectors: "dict[int, list]" = {j: [] for j in range(1, s + 1)}
        chains: list = []
        for j in range(s, 0, -1):
            inherited = [nmat.apply(v) for v in level_vectors.get(j + 1, [])]
            level_vectors[j] = list(inherited)
            # extend to a basis of ker(N^j) modulo ker(N^(j-1)) + inherited
            span_rows = [tuple(v) for v in kernels[j - 1]] + [
                tuple(v) for v in level_vectors[j]]
            for cand in kernels[j]:
                trial = span_rows + [tuple(cand)]
                if rank(Matrix(tuple(trial))) > rank(Matrix(tuple(span_rows))):
                    level_vectors[j].append(cand)
                    span_rows = trial
                    chains.append((j, cand))
        # realize chains deterministically: longest first, in discovery order
        for length, seed in sorted(chains, key=lambda t: -t[0]):
            vecs = [seed]
            for _ in range(length - 1):
                vecs.append(nmat.apply(vecs[-1]))
            vecs.reverse()  # (N^(k-1))u, ..., N u, u
            columns.extend(vecs)
            blocks.append((lam, length))
    p_inv = from_columns(columns)
    p = inverse(p_inv)
    jordan = p * a * p_inv
    return JordanDecomposition(jordan, p, p_inv, tuple(blocks))
