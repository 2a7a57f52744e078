"""Constraint-qualification verification at a reference point.

MFCQ is certified by an exact LP; LICQ by an exact rank test; CRCQ by
a falsification sampler over a deterministic grid (a neighborhood
property has no computable radius, so the honest verdict is
"NotFalsified", never "Holds"); SCOC by exact determinant signs of the
KKT-block matrices over the admissible index family.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product

from .errors import EmptyMultiplierSet, EnumerationCapExceeded, InfeasiblePoint, UnboundedMultiplierSet
from .linalg import det_sign, null_space_basis, is_psd, rank_of
from .lower_level import DEFAULT_ENUM_CAP
from .model import MpecInstance, Point
from .multipliers import MultiplierPolytope, ScocFamily, multiplier_set, scoc_family
from .polyhedra import HPolyhedron, lp_solve
from .rational import Matrix, Vector, dot, vec_add, zeros

DEFAULT_CRCQ_RADIUS = Fraction(1, 8)
DEFAULT_CRCQ_SAMPLES = 5
_GRID_CAP = 200_000


@dataclass(frozen=True)
class MfcqVerdict:
    holds: bool
    certificate: Vector | None  # direction v with grad_y g_i . v <= -margin on actives
    margin: Fraction | None


def check_mfcq(instance: MpecInstance, point: Point) -> MfcqVerdict:
    """LP certificate search: max t s.t. grad_y g_i . v <= -t, |v| <= 1, t >= 0."""
    instance.check_point(point)
    _require_feasible(instance, point)
    active = instance.active_set(point.x, point.y)
    m = instance.m
    if not active:
        return MfcqVerdict(True, zeros(m), Fraction(1))
    grads = instance.grad_y_g_at(point.x, point.y)
    rows = []
    rhs = []
    for i in active:
        rows.append(tuple(grads[i]) + (Fraction(1),))
        rhs.append(Fraction(0))
    for j in range(m):
        e = [Fraction(0)] * (m + 1)
        e[j] = Fraction(1)
        rows.append(tuple(e))
        rhs.append(Fraction(1))
        e2 = [Fraction(0)] * (m + 1)
        e2[j] = Fraction(-1)
        rows.append(tuple(e2))
        rhs.append(Fraction(1))
    tneg = [Fraction(0)] * (m + 1)
    tneg[m] = Fraction(-1)
    rows.append(tuple(tneg))
    rhs.append(Fraction(0))
    objective = tuple(Fraction(0) for _ in range(m)) + (Fraction(1),)
    res = lp_solve(objective, HPolyhedron(m + 1, tuple(rows), tuple(rhs)), "max")
    assert res.status == "optimal"  # v = 0, t = 0 is always feasible
    if res.value > 0:
        return MfcqVerdict(True, res.point[:m], res.point[m])
    return MfcqVerdict(False, None, None)


@dataclass(frozen=True)
class LicqVerdict:
    holds: bool
    rank: int
    active_count: int


def check_licq(instance: MpecInstance, point: Point) -> LicqVerdict:
    instance.check_point(point)
    _require_feasible(instance, point)
    active = instance.active_set(point.x, point.y)
    if not active:
        return LicqVerdict(True, 0, 0)
    grads = instance.grad_y_g_at(point.x, point.y)
    rank = rank_of([grads[i] for i in active])
    return LicqVerdict(rank == len(active), rank, len(active))


@dataclass(frozen=True)
class CrcqVerdict:
    falsified: bool
    sample_count: int
    witness_subset: tuple[int, ...] | None = None
    reference_point: Vector | None = None
    witness_point: Vector | None = None
    reference_rank: int | None = None
    witness_rank: int | None = None


def check_crcq_sampled(
    instance: MpecInstance,
    point: Point,
    radius: Fraction = DEFAULT_CRCQ_RADIUS,
    samples_per_axis: int = DEFAULT_CRCQ_SAMPLES,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> CrcqVerdict:
    """Falsification sampler for constant rank of active-gradient subfamilies.

    Evaluates the rank of every subset of active y-gradients on a
    deterministic grid inside the inf-ball of the given radius around
    (x, y).  A rank change is a definite falsification; agreement on
    all samples is only "not falsified".
    """
    instance.check_point(point)
    _require_feasible(instance, point)
    active = instance.active_set(point.x, point.y)
    if len(active) > enum_cap:
        raise EnumerationCapExceeded(
            f"active set of size {len(active)} exceeds enumeration cap {enum_cap}"
        )
    dim = instance.n + instance.m
    if samples_per_axis < 1:
        samples_per_axis = 1
    if samples_per_axis == 1:
        offsets = [Fraction(0)]
    else:
        offsets = [
            -radius + 2 * radius * Fraction(j, samples_per_axis - 1)
            for j in range(samples_per_axis)
        ]
    if len(offsets) ** dim > _GRID_CAP:
        raise EnumerationCapExceeded("CRCQ sample grid too large")
    ref = point.z
    subsets = [
        s for size in range(1, len(active) + 1) for s in combinations(active, size)
    ]
    ref_grads = instance.grad_y_g_at(point.x, point.y)
    ref_ranks = {s: rank_of([ref_grads[i] for i in s]) for s in subsets}
    count = 0
    for delta in product(offsets, repeat=dim):
        z = vec_add(ref, delta)
        x, y = z[: instance.n], z[instance.n :]
        count += 1
        grads = instance.grad_y_g_at(x, y)
        for s in subsets:
            rank = rank_of([grads[i] for i in s])
            if rank != ref_ranks[s]:
                return CrcqVerdict(
                    True, count, s, ref, z, ref_ranks[s], rank
                )
    return CrcqVerdict(False, count)


@dataclass(frozen=True)
class ScocMatrix:
    index_set: tuple[int, ...]
    witness: Vector
    matrix: Matrix
    sign: int


@dataclass(frozen=True)
class ScocVerdict:
    holds: bool
    sign: int | None
    matrices: tuple[ScocMatrix, ...]
    failure_reason: str | None = None


def build_kkt_block(instance: MpecInstance, point: Point, lam: Vector, index_set: tuple[int, ...]) -> Matrix:
    """The (m + |J|) square block [[grad_y L, grad_y g_J^T], [-grad_y g_J, 0]].

    The minus sign in the lower-left block is part of the orientation
    convention; determinant signs depend on it.
    """
    m = instance.m
    lmat = instance.grad_y_L_at(point.x, point.y, lam)
    grads = instance.grad_y_g_at(point.x, point.y)
    size = m + len(index_set)
    rows = []
    for j in range(m):
        row = list(lmat[j]) + [grads[i][j] for i in index_set]
        rows.append(tuple(row))
    for i in index_set:
        row = [-grads[i][j] for j in range(m)] + [Fraction(0)] * len(index_set)
        rows.append(tuple(row))
    assert all(len(r) == size for r in rows)
    return tuple(rows)


def check_scoc(
    instance: MpecInstance,
    point: Point,
    polytope: MultiplierPolytope | None = None,
    family: ScocFamily | None = None,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> ScocVerdict:
    """Same nonzero determinant sign across the admissible KKT blocks."""
    if polytope is None:
        polytope = multiplier_set(instance, point)
    if polytope.empty:
        raise EmptyMultiplierSet("no multiplier certifies this point")
    if not polytope.bounded:
        raise UnboundedMultiplierSet("multiplier set unbounded")
    if family is None:
        family = scoc_family(instance, point, polytope, enum_cap)
    matrices = []
    for jset, witness in family.items():
        block = build_kkt_block(instance, point, witness, jset)
        matrices.append(ScocMatrix(jset, witness, block, det_sign(block)))
    matrices = tuple(matrices)
    signs = {sm.sign for sm in matrices}
    if 0 in signs:
        bad = next(sm for sm in matrices if sm.sign == 0)
        return ScocVerdict(False, None, matrices, f"singular block at J={list(bad.index_set)}")
    if len(signs) > 1:
        return ScocVerdict(False, None, matrices, "determinant signs disagree")
    return ScocVerdict(True, signs.pop(), matrices)


@dataclass(frozen=True)
class ScocReducedResult:
    applicable: bool
    nonsingular: bool | None = None
    sign: int | None = None
    reason: str | None = None


def check_scoc_reduced(instance: MpecInstance, point: Point) -> ScocReducedResult:
    """Reduced orientation test at a strongly nondegenerate point.

    Requires LICQ and a unique multiplier with strictly positive
    entries on the active set.  Tests nonsingularity of U^T (grad_y L) U
    for U a rational null-space basis of the active gradient rows; an
    empty basis is vacuously nonsingular.  Agrees with check_scoc on
    its domain, where the admissible family collapses to {I}.
    """
    licq = check_licq(instance, point)
    if not licq.holds:
        return ScocReducedResult(False, reason="LICQ fails")
    polytope = multiplier_set(instance, point)
    if polytope.empty:
        return ScocReducedResult(False, reason="not a lower-level KKT point")
    if len(polytope.vertices) != 1:
        return ScocReducedResult(False, reason="multiplier not unique")
    lam = polytope.vertices[0]
    active = polytope.active_set
    if any(lam[i] == 0 for i in active):
        return ScocReducedResult(False, reason="strict complementarity fails")
    if active:
        grads = instance.grad_y_g_at(point.x, point.y)
        basis = null_space_basis([grads[i] for i in active])
    else:
        basis = tuple(
            tuple(Fraction(i == j) for j in range(instance.m)) for i in range(instance.m)
        )
    if not basis:
        return ScocReducedResult(True, True, 1)
    lmat = instance.grad_y_L_at(point.x, point.y, lam)
    reduced = tuple(
        tuple(dot(u, tuple(dot(lmat[r], w) for r in range(instance.m))) for w in basis)
        for u in basis
    )
    sign = det_sign(reduced)
    return ScocReducedResult(True, sign != 0, sign)


def convexity_in_y_ok(instance: MpecInstance, point: Point) -> bool:
    """Each g_i convex in y, decided exactly via its constant y-Hessian."""
    if instance.is_affine:
        return True
    for i in range(instance.ell):
        if not is_psd(instance.hess_yy_g_at(i, point.x, point.y)):
            return False
    return True


@dataclass(frozen=True)
class CqReport:
    mfcq: MfcqVerdict
    licq: LicqVerdict
    crcq: CrcqVerdict
    scoc: ScocVerdict
    convexity_warning: bool


def run_cq(
    instance: MpecInstance,
    point: Point,
    crcq_radius: Fraction = DEFAULT_CRCQ_RADIUS,
    crcq_samples: int = DEFAULT_CRCQ_SAMPLES,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> CqReport:
    """All CQ verdicts at once.

    An empty or unbounded multiplier set is folded into a SCOC failure
    verdict here so the other CQs still get reported; the standalone
    check_scoc raises instead.
    """
    mfcq = check_mfcq(instance, point)
    licq = check_licq(instance, point)
    crcq = check_crcq_sampled(instance, point, crcq_radius, crcq_samples, enum_cap)
    try:
        scoc = check_scoc(instance, point, enum_cap=enum_cap)
    except EmptyMultiplierSet:
        scoc = ScocVerdict(False, None, (), "empty multiplier set")
    except UnboundedMultiplierSet:
        scoc = ScocVerdict(False, None, (), "unbounded multiplier set")
    warning = not convexity_in_y_ok(instance, point)
    return CqReport(mfcq, licq, crcq, scoc, warning)


def _require_feasible(instance: MpecInstance, point: Point) -> None:
    gvals = instance.g_at(point.x, point.y)
    if any(gv > 0 for gv in gvals):
        raise InfeasiblePoint("point violates lower-level constraints")
