"""Exact rational scalars, vectors, and matrices.

Every core computation in the toolkit runs on ``fractions.Fraction``;
floating point is confined to finite-difference oracles in the test
suite.  Vectors are tuples of Fractions, matrices are tuples of row
tuples, and both are treated as immutable values throughout.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

from .errors import InputError

Rat = Fraction
Vector = tuple[Fraction, ...]
Matrix = tuple[tuple[Fraction, ...], ...]


def rat(value: int | str | Fraction) -> Fraction:
    """Coerce an int, Fraction, or "p/q" string to an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational: {value!r}") from exc
    raise InputError(f"not a rational: {value!r}")


def format_rat(value: Fraction) -> str:
    """Render as "p" for integers, else "p/q"."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def vec(values: Iterable[int | str | Fraction]) -> Vector:
    return tuple(rat(v) for v in values)


def mat(rows: Iterable[Iterable[int | str | Fraction]]) -> Matrix:
    out = tuple(vec(row) for row in rows)
    if out and any(len(row) != len(out[0]) for row in out):
        raise InputError("ragged matrix")
    return out


def zeros(k: int) -> Vector:
    return (Fraction(0),) * k


def identity(k: int) -> Matrix:
    return tuple(
        tuple(Fraction(1) if i == j else Fraction(0) for j in range(k))
        for i in range(k)
    )


def dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    if len(a) != len(b):
        raise InputError(f"dot: length {len(a)} vs {len(b)}")
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def vec_add(a: Sequence[Fraction], b: Sequence[Fraction]) -> Vector:
    if len(a) != len(b):
        raise InputError(f"vec_add: length {len(a)} vs {len(b)}")
    return tuple(x + y for x, y in zip(a, b))


def vec_sub(a: Sequence[Fraction], b: Sequence[Fraction]) -> Vector:
    if len(a) != len(b):
        raise InputError(f"vec_sub: length {len(a)} vs {len(b)}")
    return tuple(x - y for x, y in zip(a, b))


def vec_scale(t: Fraction | int, a: Sequence[Fraction]) -> Vector:
    return tuple(Fraction(t) * x for x in a)


def vec_neg(a: Sequence[Fraction]) -> Vector:
    return tuple(-x for x in a)


def mat_vec(m: Matrix, v: Sequence[Fraction]) -> Vector:
    return tuple(dot(row, v) for row in m)


def mat_t(m: Matrix) -> Matrix:
    if not m:
        return ()
    return tuple(tuple(row[j] for row in m) for j in range(len(m[0])))


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    bt = mat_t(b)
    return tuple(tuple(dot(row, col) for col in bt) for row in a)


def l1_norm(a: Sequence[Fraction]) -> Fraction:
    return sum((abs(x) for x in a), Fraction(0))


def linf_norm(a: Sequence[Fraction]) -> Fraction:
    return max((abs(x) for x in a), default=Fraction(0))


def is_zero_vec(a: Sequence[Fraction]) -> bool:
    return all(x == 0 for x in a)


def concat(*parts: Sequence[Fraction]) -> Vector:
    out: list[Fraction] = []
    for p in parts:
        out.extend(p)
    return tuple(out)


def primitive_direction(a: Sequence[Fraction]) -> Vector:
    """Scale a nonzero rational vector to the integer vector with gcd 1.

    Used to compare cone generators up to positive scaling.
    """
    if is_zero_vec(a):
        return tuple(a)
    denom_lcm = 1
    for x in a:
        denom_lcm = denom_lcm * x.denominator // gcd(denom_lcm, x.denominator)
    ints = [int(x * denom_lcm) for x in a]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    return tuple(Fraction(v, g) for v in ints)
