"""Branchwise geometry of the MPEC feasible set.

The complementarity system splits the feasible set into one branch per
side-selection pattern.  In affine mode the lower-level multipliers are
eliminated exactly (equality pivoting plus Fourier-Motzkin), so every
branch is an explicit polyhedron in (x, y).  In scalar polynomial mode
the multiplier-existence condition reduces to a sign condition on the
operator value whenever the active constraints have constant
y-gradients.

Tangent cones are unions of per-branch linearized cones.  A nonlinear
branch piece is trusted only when its active equality gradients are
linearly independent at the point (the implicit-function regime);
otherwise it is flagged unverified with arc-sampling evidence attached,
because naive linearization of complementarity equations can be
arbitrarily wrong.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    EnumerationCapExceeded,
    InfeasiblePoint,
    UnsupportedDimension,
    UnsupportedStructure,
)
from .linalg import is_psd, rank_of
from .lower_level import DEFAULT_ENUM_CAP, _quadratic_roots, _univariate_in_y
from .model import MpecInstance, Point, Polynomial
from .polyhedra import (
    HPolyhedron,
    PolyhedralCone,
    cone_generators,
    eliminate_variables,
    is_empty,
    lp_solve,
    prune_redundant,
)
from .rational import Vector, dot, vec_add, vec_scale, zeros


@dataclass(frozen=True)
class Branch:
    """One complementarity side selection, as polynomial rows over (x, y)."""

    branch_id: int
    pattern: tuple[int, ...]
    equalities: tuple[Polynomial, ...]
    inequalities: tuple[Polynomial, ...]  # each row means p(z) <= 0
    linear: bool

    def contains(self, z: Vector) -> bool:
        return all(p.evaluate(z) == 0 for p in self.equalities) and all(
            p.evaluate(z) <= 0 for p in self.inequalities
        )


def _linear_poly(arity: int, row: Vector, rhs: Fraction, offset: int = 0) -> Polynomial:
    """The polynomial row . z[offset:] - rhs over z of the given arity."""
    items = []
    for j, a in enumerate(row):
        if a != 0:
            powers = [0] * arity
            powers[offset + j] = 1
            items.append((tuple(powers), a))
    items.append(((0,) * arity, -rhs))
    return Polynomial.from_terms(arity, items)


def _branch_from_polyhedron(branch_id, pattern, region: HPolyhedron) -> Branch:
    arity = region.dim
    eqs = tuple(
        _linear_poly(arity, row, rhs) for row, rhs in zip(region.Aeq, region.beq)
    )
    ineqs = tuple(
        _linear_poly(arity, row, rhs) for row, rhs in zip(region.A, region.b)
    )
    return Branch(branch_id, pattern, eqs, ineqs, True)


def _upper_joint_rows(instance: MpecInstance):
    """X and Z constraints as rows over (x, y)."""
    n, m = instance.n, instance.m
    ineq, eq = [], []
    xs = instance.upper_set
    for row, rhs in zip(xs.A, xs.b):
        ineq.append((tuple(row) + zeros(m), rhs))
    for row, rhs in zip(xs.Aeq, xs.beq):
        eq.append((tuple(row) + zeros(m), rhs))
    if instance.joint_set is not None:
        zs = instance.joint_set
        ineq.extend(zip(zs.A, zs.b))
        eq.extend(zip(zs.Aeq, zs.beq))
    return ineq, eq


def enumerate_branches(
    instance: MpecInstance, enum_cap: int = DEFAULT_ENUM_CAP
) -> tuple[Branch, ...]:
    """All nonempty complementarity branches, ordered by pattern bitmask."""
    if instance.ell > enum_cap:
        raise EnumerationCapExceeded(
            f"{instance.ell} constraints exceeds enumeration cap {enum_cap}"
        )
    if instance.is_affine:
        return _enumerate_affine_branches(instance)
    return _enumerate_polynomial_branches(instance)


def _enumerate_affine_branches(instance: MpecInstance) -> tuple[Branch, ...]:
    n, m, ell = instance.n, instance.m, instance.ell
    lo = instance.lower
    extra_ineq, extra_eq = _upper_joint_rows(instance)
    branches = []
    for mask in range(1 << ell):
        pattern = tuple(i for i in range(ell) if mask >> i & 1)
        ns = len(pattern)
        width = n + m + ns
        a_rows, a_rhs, e_rows, e_rhs = [], [], [], []
        for j in range(m):  # stationarity: P x + Q y + E_S^T lam = -q
            row = list(lo.P[j]) + list(lo.Q[j]) + [lo.E[s][j] for s in pattern]
            e_rows.append(tuple(row))
            e_rhs.append(-lo.q[j])
        for s in pattern:
            e_rows.append(tuple(lo.D[s]) + tuple(lo.E[s]) + zeros(ns))
            e_rhs.append(-lo.b[s])
        for t in range(ell):
            if t not in pattern:
                a_rows.append(tuple(lo.D[t]) + tuple(lo.E[t]) + zeros(ns))
                a_rhs.append(-lo.b[t])
        for col in range(ns):
            row = zeros(n + m) + tuple(-Fraction(col == j) for j in range(ns))
            a_rows.append(row)
            a_rhs.append(Fraction(0))
        for row, rhs in extra_ineq:
            a_rows.append(tuple(row) + zeros(ns))
            a_rhs.append(rhs)
        for row, rhs in extra_eq:
            e_rows.append(tuple(row) + zeros(ns))
            e_rhs.append(rhs)
        lifted = HPolyhedron(width, tuple(a_rows), tuple(a_rhs), tuple(e_rows), tuple(e_rhs))
        if is_empty(lifted):
            continue
        projected = eliminate_variables(lifted, tuple(range(n + m, width)))
        projected = prune_redundant(projected)
        branches.append(_branch_from_polyhedron(mask, pattern, projected))
    return tuple(branches)


def _enumerate_polynomial_branches(instance: MpecInstance) -> tuple[Branch, ...]:
    if instance.m != 1:
        raise UnsupportedDimension("polynomial branch decomposition needs scalar y")
    n, ell = instance.n, instance.ell
    arity = n + 1
    fpoly = instance.lower.F[0]
    extra_ineq, extra_eq = _upper_joint_rows(instance)
    branches = []
    for mask in range(1 << ell):
        pattern = tuple(i for i in range(ell) if mask >> i & 1)
        equalities = [instance.lower.g[i] for i in pattern]
        inequalities = [instance.lower.g[j] for j in range(ell) if j not in pattern]
        if not pattern:
            equalities.append(fpoly)
        else:
            consts = []
            for i in pattern:
                dgi = instance.lower.g[i].partial(n)
                if dgi.total_degree() > 0:
                    raise UnsupportedStructure(
                        "active constraint without constant y-gradient; "
                        "multiplier existence is not a sign condition"
                    )
                consts.append(dgi.evaluate(zeros(arity)))
            has_pos = any(c > 0 for c in consts)
            has_neg = any(c < 0 for c in consts)
            if has_pos and has_neg:
                pass  # gradient cone spans R: no condition on F
            elif has_pos:
                inequalities.append(fpoly)  # need -F >= 0
            elif has_neg:
                inequalities.append(-fpoly)  # need -F <= 0
            else:
                equalities.append(fpoly)  # zero gradients force F = 0
        for row, rhs in extra_ineq:
            inequalities.append(_linear_poly(arity, row, rhs))
        for row, rhs in extra_eq:
            equalities.append(_linear_poly(arity, row, rhs))
        if _clearly_empty(arity, equalities, inequalities):
            continue
        linear = all(
            p.total_degree() <= 1 for p in list(equalities) + list(inequalities)
        )
        branches.append(
            Branch(mask, pattern, tuple(equalities), tuple(inequalities), linear)
        )
    return tuple(branches)


def _clearly_empty(arity, equalities, inequalities) -> bool:
    """Prune a branch only when emptiness is provable cheaply.

    Constant rows decide themselves; the affine subsystem is checked by
    exact LP.  Nonlinear rows are left alone: an unpruned empty branch
    is harmless (it contains no points), a wrongly pruned one is not.
    """
    a_rows, a_rhs, e_rows, e_rhs = [], [], [], []
    for p in equalities:
        if p.total_degree() == 0:
            if p.evaluate(zeros(arity)) != 0:
                return True
        elif p.total_degree() == 1:
            row, rhs = _poly_as_row(p, arity)
            e_rows.append(row)
            e_rhs.append(rhs)
    for p in inequalities:
        if p.total_degree() == 0:
            if p.evaluate(zeros(arity)) > 0:
                return True
        elif p.total_degree() == 1:
            row, rhs = _poly_as_row(p, arity)
            a_rows.append(row)
            a_rhs.append(rhs)
    if not (a_rows or e_rows):
        return False
    region = HPolyhedron(arity, tuple(a_rows), tuple(a_rhs), tuple(e_rows), tuple(e_rhs))
    return is_empty(region)


def _poly_as_row(p: Polynomial, arity: int) -> tuple[Vector, Fraction]:
    """Split an affine polynomial into (coefficient row, rhs) with row . z <= rhs."""
    row = [Fraction(0)] * arity
    const = Fraction(0)
    for powers, coef in p.terms:
        if sum(powers) == 0:
            const = coef
        else:
            row[powers.index(1)] = coef
    return tuple(row), -const


@dataclass(frozen=True)
class ArcSample:
    direction: Vector
    step: Fraction
    point: Vector | None  # a nearby feasible branch point, when one was found


@dataclass(frozen=True)
class TangentPiece:
    branch_id: int
    cone: PolyhedralCone
    generators: tuple[Vector, ...]
    exact: bool
    evidence: tuple[ArcSample, ...] = ()


@dataclass(frozen=True)
class ConeUnion:
    base_point: Vector
    pieces: tuple[TangentPiece, ...]

    def union_generators(self) -> tuple[Vector, ...]:
        seen = set()
        for piece in self.pieces:
            seen.update(piece.generators)
        return tuple(sorted(seen))


def tangent_cone(
    instance: MpecInstance, point: Point, enum_cap: int = DEFAULT_ENUM_CAP
) -> ConeUnion:
    """Union of linearized cones of the branches containing the point."""
    z = point.z
    branches = enumerate_branches(instance, enum_cap)
    containing = [b for b in branches if b.contains(z)]
    if not containing:
        raise InfeasiblePoint("point lies in no feasible branch")
    dim = instance.n + instance.m
    pieces = []
    for branch in containing:
        eq_normals = tuple(
            tuple(dp.evaluate(z) for dp in p.gradient()) for p in branch.equalities
        )
        active_ineq = [p for p in branch.inequalities if p.evaluate(z) == 0]
        ineq_normals = tuple(
            tuple(dp.evaluate(z) for dp in p.gradient()) for p in active_ineq
        )
        cone = PolyhedralCone(dim, ineq_normals, eq_normals)
        gens = cone_generators(cone)
        exact = branch.linear or rank_of(list(eq_normals)) == len(eq_normals)
        evidence = ()
        if not exact:
            evidence = tuple(
                ArcSample(d, t, arc_point(instance, branch, z, d, t))
                for d in gens
                for t in (Fraction(1, 8), Fraction(1, 64))
            )
        pieces.append(TangentPiece(branch.branch_id, cone, gens, exact, evidence))
    return ConeUnion(z, tuple(pieces))


def arc_point(
    instance: MpecInstance, branch: Branch, z: Vector, d: Vector, t: Fraction
) -> Vector | None:
    """A feasible branch point realizing direction d at step t, if any.

    Linear branches use the straight arc z + t d.  Nonlinear scalar-y
    branches step x along the direction and re-solve the branch
    equality for y, keeping the root closest to the linear prediction.
    """
    candidate = vec_add(z, vec_scale(t, d))
    if branch.contains(candidate):
        return candidate
    if branch.linear or instance.m != 1:
        return None
    n = instance.n
    x_t = candidate[:n]
    y_pred = candidate[n]
    best = None
    for p in branch.equalities:
        if p.degree_in(n) == 0:
            continue
        kind, payload = _quadratic_roots(*_univariate_in_y(instance, p, x_t))
        if kind != "roots":
            continue
        for root in payload:
            cand = x_t + (root,)
            if branch.contains(cand):
                gap = abs(root - y_pred)
                if best is None or gap < best[0] or (gap == best[0] and root < best[1][n]):
                    best = (gap, cand)
    return best[1] if best else None


@dataclass(frozen=True)
class PieceOptimum:
    branch_id: int
    value: Fraction
    direction: Vector


@dataclass(frozen=True)
class BStationarityResult:
    stationary: bool
    piece_optima: tuple[PieceOptimum, ...]
    witness: Vector | None
    witness_value: Fraction | None
    all_pieces_exact: bool
    cones: ConeUnion


def bstationarity_check(
    instance: MpecInstance, point: Point, enum_cap: int = DEFAULT_ENUM_CAP
) -> BStationarityResult:
    """Minimize grad f over each tangent piece, truncated to the l1 ball.

    The truncation keeps each LP bounded without changing the verdict:
    pieces are cones, so the sign of the optimum is scale invariant.
    The witness comes from the first piece (in branch order) with a
    negative optimum.
    """
    union = tangent_cone(instance, point, enum_cap)
    z = point.z
    dim = instance.n + instance.m
    grad = tuple(p.evaluate(z) for p in instance.objective.gradient())
    optima = []
    witness = None
    witness_value = None
    for piece in union.pieces:
        region = _l1_truncated(piece.cone)
        res = lp_solve(grad + zeros(dim), region, "min")
        assert res.status == "optimal"  # d = 0 feasible, l1 ball bounded
        d = res.point[:dim]
        optima.append(PieceOptimum(piece.branch_id, res.value, d))
        if res.value < 0 and witness is None:
            witness, witness_value = d, res.value
    return BStationarityResult(
        witness is None,
        tuple(optima),
        witness,
        witness_value,
        all(p.exact for p in union.pieces),
        union,
    )


def _l1_truncated(cone: PolyhedralCone) -> HPolyhedron:
    """Lift {d in cone : |d|_1 <= 1} with bound variables u >= |d|."""
    dim = cone.dim
    rows, rhs = [], []
    for a in cone.inequality_normals:
        rows.append(tuple(a) + zeros(dim))
        rhs.append(Fraction(0))
    eq_rows = tuple(tuple(a) + zeros(dim) for a in cone.equality_normals)
    eq_rhs = zeros(len(cone.equality_normals))
    for i in range(dim):
        e = [Fraction(0)] * (2 * dim)
        e[i] = Fraction(1)
        e[dim + i] = Fraction(-1)
        rows.append(tuple(e))
        rhs.append(Fraction(0))
        e2 = [Fraction(0)] * (2 * dim)
        e2[i] = Fraction(-1)
        e2[dim + i] = Fraction(-1)
        rows.append(tuple(e2))
        rhs.append(Fraction(0))
    rows.append(zeros(dim) + (Fraction(1),) * dim)
    rhs.append(Fraction(1))
    return HPolyhedron(2 * dim, tuple(rows), tuple(rhs), eq_rows, eq_rhs)


@dataclass(frozen=True)
class LocalMinCertificate:
    local_minimum: bool
    stationary: bool
    objective_convex_quadratic: bool
    all_pieces_exact: bool
    all_branches_polyhedral: bool
    reasons: tuple[str, ...]
    piece_optima: tuple[PieceOptimum, ...]


def local_min_certificate(
    instance: MpecInstance, point: Point, enum_cap: int = DEFAULT_ENUM_CAP
) -> LocalMinCertificate:
    """Pseudoconvexity-based local-minimality certificate.

    Issues LocalMinimum when the point is branchwise stationary, every
    tangent piece is exact, every branch is polyhedral, and the
    objective is a convex quadratic (hence pseudoconvex).  The
    certificate is local only; no global claim is made.
    """
    bstat = bstationarity_check(instance, point, enum_cap)
    branches = enumerate_branches(instance, enum_cap)
    polyhedral = all(b.linear for b in branches)
    convex = _objective_is_convex_quadratic(instance, point)
    reasons = []
    if not bstat.stationary:
        reasons.append("not branchwise stationary")
    if not bstat.all_pieces_exact:
        reasons.append("unverified tangent piece")
    if not polyhedral:
        reasons.append("nonpolyhedral branch")
    if not convex:
        reasons.append("objective is not a convex quadratic")
    return LocalMinCertificate(
        not reasons,
        bstat.stationary,
        convex,
        bstat.all_pieces_exact,
        polyhedral,
        tuple(reasons),
        bstat.piece_optima,
    )


def _objective_is_convex_quadratic(instance: MpecInstance, point: Point) -> bool:
    f = instance.objective
    if f.total_degree() > 2:
        return False
    dim = instance.n + instance.m
    z = point.z
    hessian = tuple(
        tuple(f.partial(i).partial(j).evaluate(z) for j in range(dim))
        for i in range(dim)
    )
    return is_psd(hessian)
