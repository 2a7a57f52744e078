"""The multiplier polytope at a fixed point and its SCOC index family.

M collects every Lagrange multiplier certifying the lower-level KKT
system at (x, y): nonnegative vectors, zero off the active set, whose
gradient combination cancels F exactly.  The SCOC family consists of
the active index subsets with linearly independent gradients that
contain the support of some extreme multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .errors import (
    EmptyMultiplierSet,
    EnumerationCapExceeded,
    InfeasiblePoint,
    UnboundedMultiplierSet,
)
from .linalg import rank_of
from .lower_level import DEFAULT_ENUM_CAP
from .model import MpecInstance, Point
from .polyhedra import HPolyhedron, is_empty, lp_solve, vertex_enumeration
from .rational import Vector, zeros


@dataclass(frozen=True)
class MultiplierPolytope:
    ell: int
    hform: HPolyhedron
    vertices: tuple[Vector, ...]
    active_set: tuple[int, ...]
    bounded: bool
    empty: bool

    def support(self, lam: Vector) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(lam) if v != 0)


def multiplier_set(instance: MpecInstance, point: Point) -> MultiplierPolytope:
    """M at a lower-level feasible point, with its extreme points.

    An empty vertex list with ``empty=True`` means the point is not a
    KKT point of the lower level.  An unbounded M (an MFCQ failure
    symptom) is returned as the H-form with no vertex list.
    """
    instance.check_point(point)
    x, y = point.x, point.y
    gvals = instance.g_at(x, y)
    if any(gv > 0 for gv in gvals):
        raise InfeasiblePoint(f"g(x, y) = {gvals} has positive entries")
    active = instance.active_set(x, y)
    ell = instance.ell
    grads = instance.grad_y_g_at(x, y)
    fvec = instance.F_at(x, y)
    eq_rows = [tuple(grads[i][j] for i in range(ell)) for j in range(instance.m)]
    eq_rhs = [-fvec[j] for j in range(instance.m)]
    inactive = [i for i in range(ell) if i not in active]
    for i in inactive:
        row = [Fraction(0)] * ell
        row[i] = Fraction(1)
        eq_rows.append(tuple(row))
        eq_rhs.append(Fraction(0))
    sign_rows = tuple(
        tuple(-Fraction(i == j) for j in range(ell)) for i in range(ell)
    )
    hform = HPolyhedron(ell, sign_rows, zeros(ell), tuple(eq_rows), tuple(eq_rhs))
    if is_empty(hform):
        return MultiplierPolytope(ell, hform, (), active, True, True)
    for i in range(ell):
        e = tuple(Fraction(k == i) for k in range(ell))
        if lp_solve(e, hform, "max").status == "unbounded":
            return MultiplierPolytope(ell, hform, (), active, False, False)
    vertices = vertex_enumeration(hform)
    return MultiplierPolytope(ell, hform, vertices, active, True, False)


@dataclass(frozen=True)
class ScocFamily:
    """Index sets J with independent gradients covering some extreme support."""

    sets: tuple[tuple[int, ...], ...]
    witnesses: tuple[Vector, ...]  # one extreme multiplier per set, supp inside J

    def items(self):
        return tuple(zip(self.sets, self.witnesses))


def scoc_family(
    instance: MpecInstance,
    point: Point,
    polytope: MultiplierPolytope | None = None,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> ScocFamily:
    """Enumerate the SCOC family over subsets of the active set.

    The witness for each J is the lexicographically smallest vertex of
    M whose support lies inside J; any such vertex works for the
    orientation test, so the smallest is chosen for determinism.
    """
    if polytope is None:
        polytope = multiplier_set(instance, point)
    if polytope.empty:
        raise EmptyMultiplierSet("no multiplier certifies this point")
    if not polytope.bounded:
        raise UnboundedMultiplierSet("multiplier set unbounded; extreme points unavailable")
    active = polytope.active_set
    if len(active) > enum_cap:
        raise EnumerationCapExceeded(
            f"active set of size {len(active)} exceeds enumeration cap {enum_cap}"
        )
    grads = instance.grad_y_g_at(point.x, point.y)
    supports = [polytope.support(v) for v in polytope.vertices]
    sets: list[tuple[int, ...]] = []
    witnesses: list[Vector] = []
    for size in range(len(active) + 1):
        for subset in combinations(active, size):
            jset = set(subset)
            witness = next(
                (
                    v
                    for v, supp in zip(polytope.vertices, supports)
                    if set(supp) <= jset
                ),
                None,
            )
            if witness is None:
                continue
            if subset and rank_of([grads[i] for i in subset]) != len(subset):
                continue
            sets.append(subset)
            witnesses.append(witness)
    return ScocFamily(tuple(sets), tuple(witnesses))
