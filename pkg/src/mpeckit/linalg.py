"""Exact linear algebra over rationals.

Gauss-Jordan elimination with Fraction arithmetic: no pivoting
heuristics are needed for correctness, so pivots are chosen by lowest
row/column index to keep every result deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Sequence

from .errors import InputError
from .rational import Matrix, Vector


def _rows(m: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    return [list(row) for row in m]


def rref(m: Sequence[Sequence[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form.  Returns (rows, pivot column indices)."""
    rows = _rows(m)
    if not rows:
        return [], []
    ncols = len(rows[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pivot_row = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        pv = rows[r][c]
        rows[r] = [x / pv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def rank_of(m: Sequence[Sequence[Fraction]]) -> int:
    """Exact rank; the empty matrix has rank 0."""
    return len(rref(m)[1])


def det(m: Sequence[Sequence[Fraction]]) -> Fraction:
    """Exact determinant of a square matrix (0x0 determinant is 1)."""
    n = len(m)
    if any(len(row) != n for row in m):
        raise InputError("det: matrix not square")
    if n == 0:
        return Fraction(1)
    rows = _rows(m)
    sign = 1
    result = Fraction(1)
    for c in range(n):
        pivot_row = next((i for i in range(c, n) if rows[i][c] != 0), None)
        if pivot_row is None:
            return Fraction(0)
        if pivot_row != c:
            rows[c], rows[pivot_row] = rows[pivot_row], rows[c]
            sign = -sign
        pv = rows[c][c]
        result *= pv
        for i in range(c + 1, n):
            if rows[i][c] != 0:
                f = rows[i][c] / pv
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[c])]
    return sign * result


def det_sign(m: Sequence[Sequence[Fraction]]) -> int:
    """Sign of the exact determinant: -1, 0, or +1."""
    d = det(m)
    return (d > 0) - (d < 0)


@dataclass(frozen=True)
class LinearSolution:
    """Solution set of A v = b: empty, a point, or an affine family."""

    status: str  # "unique" | "underdetermined" | "inconsistent"
    particular: Vector | None
    nullspace: tuple[Vector, ...]


def solve_linear(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> LinearSolution:
    """Solve A v = b exactly, reporting the full affine solution family.

    The particular solution sets all free variables to zero; nullspace
    basis vectors follow the standard one-free-variable-at-a-time
    construction, ordered by free column index.
    """
    nrows = len(a)
    if nrows != len(b):
        raise InputError("solve_linear: row count mismatch")
    ncols = len(a[0]) if nrows else 0
    aug = [list(row) + [rhs] for row, rhs in zip(a, b)]
    reduced, pivots = rref(aug)
    if ncols in pivots:
        return LinearSolution("inconsistent", None, ())
    pivot_set = set(pivots)
    free_cols = [c for c in range(ncols) if c not in pivot_set]
    particular = [Fraction(0)] * ncols
    for r, c in enumerate(pivots):
        particular[c] = reduced[r][ncols]
    basis: list[Vector] = []
    for fc in free_cols:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for r, c in enumerate(pivots):
            v[c] = -reduced[r][fc]
        basis.append(tuple(v))
    status = "unique" if not free_cols else "underdetermined"
    return LinearSolution(status, tuple(particular), tuple(basis))


def null_space_basis(m: Sequence[Sequence[Fraction]]) -> tuple[Vector, ...]:
    """Rational basis of {v : M v = 0}, deterministic order."""
    ncols = len(m[0]) if m else 0
    if not m:
        raise InputError("null_space_basis: ambient dimension unknown for empty matrix")
    return solve_linear(m, [Fraction(0)] * len(m)).nullspace


def is_psd(m: Matrix) -> bool:
    """Exact positive-semidefiniteness test for a symmetric matrix.

    Checks nonnegativity of every principal minor (not only leading
    ones, which suffices for PD but not PSD).  Intended for the small
    Hessians this toolkit produces.
    """
    n = len(m)
    for i in range(n):
        for j in range(n):
            if m[i][j] != m[j][i]:
                raise InputError("is_psd: matrix not symmetric")
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            minor = [[m[i][j] for j in subset] for i in subset]
            if det(minor) < 0:
                return False
    return True
