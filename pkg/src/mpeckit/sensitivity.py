"""Directional derivatives of the implicit solution map.

The derivative in direction dx solves an affine VI over the critical
cone attached to a critical multiplier.  The same pattern-enumeration
machinery as the lower-level solver applies; with an extreme critical
multiplier and coherent orientation the solution is unique and equals
y'(x, dx).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .errors import (
    AssumptionViolation,
    EmptyMultiplierSet,
    NoSolution,
    UnboundedMultiplierSet,
)
from .geometry import bstationarity_check
from .lower_level import (
    DEFAULT_ENUM_CAP,
    check_kkt,
    solve_affine_vi,
    solve_lower_level,
)
from .model import MpecInstance, Point
from .multipliers import MultiplierPolytope, multiplier_set
from .polyhedra import HPolyhedron, PolyhedralCone, cone_generators
from .rational import (
    Vector,
    dot,
    is_zero_vec,
    mat_vec,
    primitive_direction,
    vec_add,
    vec_neg,
)


@dataclass(frozen=True)
class CriticalCone:
    """K(x, lam; dx): linearized rows split by the multiplier sign pattern."""

    lam: Vector
    dx: Vector
    region: HPolyhedron  # over dy
    inequality_indices: tuple[int, ...]  # active constraints with lam_i = 0
    equality_indices: tuple[int, ...]  # constraints with lam_i > 0


def critical_cone(instance: MpecInstance, point: Point, lam: Vector, dx: Vector) -> CriticalCone:
    active = instance.active_set(point.x, point.y)
    eq_idx = tuple(i for i in active if lam[i] > 0)
    ineq_idx = tuple(i for i in active if lam[i] == 0)
    gy = instance.grad_y_g_at(point.x, point.y)
    gx = instance.grad_x_g_at(point.x, point.y)
    a_rows = tuple(gy[i] for i in ineq_idx)
    a_rhs = tuple(-dot(gx[i], dx) for i in ineq_idx)
    e_rows = tuple(gy[i] for i in eq_idx)
    e_rhs = tuple(-dot(gx[i], dx) for i in eq_idx)
    region = HPolyhedron(instance.m, a_rows, a_rhs, e_rows, e_rhs)
    return CriticalCone(lam, dx, region, ineq_idx, eq_idx)


def critical_multipliers(
    instance: MpecInstance,
    point: Point,
    dx: Vector,
    polytope: MultiplierPolytope | None = None,
) -> tuple[Vector, ...]:
    """Vertices of M maximizing sum_i lam_i grad_x g_i . dx, in vertex order."""
    if polytope is None:
        polytope = multiplier_set(instance, point)
    if polytope.empty:
        raise EmptyMultiplierSet("no multiplier certifies this point")
    if not polytope.bounded:
        raise UnboundedMultiplierSet("multiplier set unbounded")
    gx = instance.grad_x_g_at(point.x, point.y)
    coefs = tuple(dot(gx[i], dx) for i in range(instance.ell))
    values = [dot(v, coefs) for v in polytope.vertices]
    best = max(values)
    return tuple(v for v, val in zip(polytope.vertices, values) if val == best)


@dataclass(frozen=True)
class DirectionalDerivative:
    dx: Vector
    dy: Vector
    lam: Vector
    unique: bool
    all_solutions: tuple[Vector, ...]


def solve_directional_avi(
    instance: MpecInstance,
    point: Point,
    lam: Vector,
    dx: Vector,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> DirectionalDerivative:
    """Solve the direction-dependent AVI over the critical cone K(x, lam; dx).

    The operator is dy -> grad_x L dx + grad_y L dy with Jacobians
    taken at the reference triple; constraint curvature enters through
    grad_y L in polynomial mode.
    """
    if not check_kkt(instance, point.x, point.y, lam).valid:
        raise AssumptionViolation("lam is not a lower-level multiplier at this point")
    cone = critical_cone(instance, point, lam, dx)
    op = instance.grad_y_L_at(point.x, point.y, lam)
    offset = mat_vec(instance.grad_x_L_at(point.x, point.y, lam), dx)
    result = solve_affine_vi(op, offset, cone.region, enum_cap)
    if not result.solutions:
        raise NoSolution(
            "directional AVI has no solution; orientation/regularity hypotheses fail"
        )
    points = tuple(s.point for s in result.solutions)
    unique = len(points) == 1 and not result.continua
    return DirectionalDerivative(dx, points[0], lam, unique, points)


def directional_derivative(
    instance: MpecInstance,
    point: Point,
    dx: Vector,
    polytope: MultiplierPolytope | None = None,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> Vector:
    """y'(x, dx) computed through every critical extreme multiplier.

    All critical vertices must produce the same unique AVI solution;
    any disagreement is surfaced as a violated hypothesis instead of
    silently picking one candidate.
    """
    if polytope is None:
        polytope = multiplier_set(instance, point)
    answers = []
    for lam in critical_multipliers(instance, point, dx, polytope):
        dd = solve_directional_avi(instance, point, lam, dx, enum_cap)
        if not dd.unique:
            raise AssumptionViolation(
                "directional AVI solution not unique for an extreme multiplier"
            )
        answers.append(dd.dy)
    if any(a != answers[0] for a in answers[1:]):
        raise AssumptionViolation("critical multipliers disagree on the derivative")
    return answers[0]


def _require_locally_unique(instance: MpecInstance, point: Point, enum_cap: int) -> None:
    sset = solve_lower_level(instance, point.x, enum_cap)
    if sset.continua or sset.irrational or sset.count != 1:
        raise AssumptionViolation(
            f"lower level has {sset.count} solutions at the reference x; need exactly 1"
        )
    if sset.solutions[0].y != point.y:
        raise AssumptionViolation("reference y is not the lower-level solution at x")


@dataclass(frozen=True)
class FrechetResult:
    differentiable: bool
    jacobian: tuple[Vector, ...] | None  # columns y'(x; e_k)
    witness: Vector | None
    reason: str | None
    values: tuple[tuple[Vector, Vector], ...]  # (dx, y'(x, dx)) for every tested dx


def frechet_test(
    instance: MpecInstance,
    point: Point,
    basis_directions: tuple[Vector, ...] | None = None,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> FrechetResult:
    """Finite differentiability test on basis directions and their sums.

    Rejection is sound.  Acceptance is sound when the derivative map is
    piecewise linear in the direction (always true in affine mode);
    otherwise it certifies linear behavior on the tested set only.
    Each tested derivative must also lie in the active linearization
    space {dy : grad_x g_i . dx + grad_y g_i . dy = 0 for all active i}.
    """
    _require_locally_unique(instance, point, enum_cap)
    polytope = multiplier_set(instance, point)
    n = instance.n
    if basis_directions is None:
        basis_directions = tuple(
            tuple(Fraction(k == j) for j in range(n)) for k in range(n)
        )
    tested: list[Vector] = []
    for e in basis_directions:
        tested.append(e)
        tested.append(vec_neg(e))
    for d1, d2 in combinations(tuple(tested), 2):
        s = vec_add(d1, d2)
        if not is_zero_vec(s) and s not in tested:
            tested.append(s)
    cache: dict[Vector, Vector] = {}

    def deriv(dx: Vector) -> Vector:
        if dx not in cache:
            cache[dx] = directional_derivative(instance, point, dx, polytope, enum_cap)
        return cache[dx]

    active = instance.active_set(point.x, point.y)
    gy = instance.grad_y_g_at(point.x, point.y)
    gx = instance.grad_x_g_at(point.x, point.y)
    values = tuple((dx, deriv(dx)) for dx in tested)

    def finish(ok, jac, witness, reason):
        return FrechetResult(ok, jac, witness, reason, values)

    for dx in tested:
        dy = deriv(dx)
        for i in active:
            if dot(gx[i], dx) + dot(gy[i], dy) != 0:
                return finish(False, None, dx, f"derivative leaves the linearization space (constraint {i + 1})")
    for e in basis_directions:
        if not is_zero_vec(vec_add(deriv(e), deriv(vec_neg(e)))):
            return finish(False, None, e, "one-sided derivatives are not odd")
    for d1, d2 in combinations(tuple(tested), 2):
        s = vec_add(d1, d2)
        if is_zero_vec(s):
            continue
        if deriv(s) != vec_add(deriv(d1), deriv(d2)):
            return finish(False, None, s, "directional derivative is not additive")
    jacobian = tuple(deriv(e) for e in basis_directions)  # columns
    return finish(True, jacobian, None, None)


def reduced_directional_derivative(
    instance: MpecInstance,
    point: Point,
    dx: Vector,
    polytope: MultiplierPolytope | None = None,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> Fraction:
    """Chain rule value grad_x f . dx + grad_y f . y'(x, dx), exact."""
    _require_locally_unique(instance, point, enum_cap)
    dy = directional_derivative(instance, point, dx, polytope, enum_cap)
    fx, fy = instance.objective_gradient_at(point)
    return dot(fx, dx) + dot(fy, dy)


@dataclass(frozen=True)
class ImpStationarityResult:
    stationary: bool
    tested: tuple[tuple[Vector, Fraction], ...]
    witness_dx: Vector | None
    witness_value: Fraction | None
    complete: bool
    branch_verdict: str | None
    caveat: str


def upper_tangent_cone(instance: MpecInstance, x: Vector) -> PolyhedralCone:
    """Tangent cone of the upper-level set X at a feasible x."""
    xset = instance.upper_set
    active = [i for i in range(len(xset.A)) if dot(xset.A[i], x) == xset.b[i]]
    return PolyhedralCone(
        instance.n,
        tuple(xset.A[i] for i in active),
        xset.Aeq,
    )


def imp_stationarity_check(
    instance: MpecInstance,
    point: Point,
    direction_set: tuple[Vector, ...] | None = None,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> ImpStationarityResult:
    """Reduced-objective stationarity over a direction set in T(x; X).

    The default set is the generator directions of T(x; X) plus the
    signed coordinate directions lying in T.  The verdict certifies the
    tested set; in affine mode the branchwise tangent-cone test runs as
    well and verifies completeness of the piecewise-linear model.
    """
    _require_locally_unique(instance, point, enum_cap)
    if direction_set is None:
        cone = upper_tangent_cone(instance, point.x)
        dirs = list(cone_generators(cone))
        for k in range(instance.n):
            for sign in (1, -1):
                e = tuple(Fraction(sign * (k == j)) for j in range(instance.n))
                if cone.contains(e):
                    dirs.append(primitive_direction(e))
        seen = []
        for d in dirs:
            if d not in seen and not is_zero_vec(d):
                seen.append(d)
        direction_set = tuple(seen)
    polytope = multiplier_set(instance, point)
    tested = tuple(
        (dx, reduced_directional_derivative(instance, point, dx, polytope, enum_cap))
        for dx in direction_set
    )
    witness_dx = witness_value = None
    for dx, value in tested:
        if value < 0 and (witness_value is None or value < witness_value):
            witness_dx, witness_value = dx, value
    stationary = witness_dx is None
    branch_verdict = None
    complete = False
    caveat = "verdict certifies the tested direction set only"
    if instance.is_affine:
        branch = bstationarity_check(instance, point, enum_cap)
        branch_verdict = "stationary" if branch.stationary else "descent"
        if branch.stationary == stationary:
            complete = True
            caveat = (
                "affine mode: branchwise tangent-cone test agrees; "
                "piecewise-linear model is complete"
            )
        else:
            caveat = (
                "affine mode: branchwise tangent-cone test disagrees with the "
                "direction sample; treat the sampled verdict as incomplete"
            )
    return ImpStationarityResult(
        stationary, tested, witness_dx, witness_value, complete, branch_verdict, caveat
    )
