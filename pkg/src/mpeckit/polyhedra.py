"""Exact polyhedral computation over rationals.

H-polyhedra, a two-phase simplex with Bland's rule, Euclidean
projection by active-set enumeration, brute-force vertex enumeration,
Fourier-Motzkin variable elimination, and generator extraction for
polyhedral cones.  Everything is exact and deterministic: degenerate
vertices are the normal case in complementarity problems, so no
tolerance-based pivoting is acceptable here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb

from .errors import (
    DimensionMismatch,
    EmptyPolyhedron,
    EnumerationCapExceeded,
    InputError,
    UnboundedPolytope,
)
from .linalg import det_sign, rank_of, rref, solve_linear
from .rational import (
    Matrix,
    Vector,
    dot,
    is_zero_vec,
    primitive_direction,
    vec_add,
    vec_scale,
    vec_sub,
    zeros,
)

_VERTEX_COMBO_CAP = 500_000


@dataclass(frozen=True)
class HPolyhedron:
    """The set {v : A v <= b, Aeq v = beq} in R^dim."""

    dim: int
    A: Matrix = ()
    b: Vector = ()
    Aeq: Matrix = ()
    beq: Vector = ()

    def __post_init__(self):
        if len(self.A) != len(self.b) or len(self.Aeq) != len(self.beq):
            raise DimensionMismatch("polyhedron: row/rhs count mismatch")
        for row in list(self.A) + list(self.Aeq):
            if len(row) != self.dim:
                raise DimensionMismatch("polyhedron: row width != dim")

    def contains(self, v: Vector) -> bool:
        if len(v) != self.dim:
            raise DimensionMismatch("contains: point dimension mismatch")
        return all(dot(row, v) <= rhs for row, rhs in zip(self.A, self.b)) and all(
            dot(row, v) == rhs for row, rhs in zip(self.Aeq, self.beq)
        )

    def active_rows(self, v: Vector) -> tuple[int, ...]:
        """Indices of inequality rows tight at v."""
        return tuple(i for i, (row, rhs) in enumerate(zip(self.A, self.b)) if dot(row, v) == rhs)

    def intersect(self, other: "HPolyhedron") -> "HPolyhedron":
        if other.dim != self.dim:
            raise DimensionMismatch("intersect: ambient dimension mismatch")
        return HPolyhedron(
            self.dim,
            self.A + other.A,
            self.b + other.b,
            self.Aeq + other.Aeq,
            self.beq + other.beq,
        )


@dataclass(frozen=True)
class PolyhedralCone:
    """The cone {d : n^T d <= 0 for each inequality normal, m^T d = 0 for each equality normal}."""

    dim: int
    inequality_normals: Matrix = ()
    equality_normals: Matrix = ()

    def contains(self, d: Vector) -> bool:
        return all(dot(n, d) <= 0 for n in self.inequality_normals) and all(
            dot(n, d) == 0 for n in self.equality_normals
        )

    def as_polyhedron(self) -> HPolyhedron:
        return HPolyhedron(
            self.dim,
            self.inequality_normals,
            zeros(len(self.inequality_normals)),
            self.equality_normals,
            zeros(len(self.equality_normals)),
        )


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: Fraction | None = None
    point: Vector | None = None


def _pivot(tab: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    pv = tab[row][col]
    tab[row] = [x / pv for x in tab[row]]
    for i in range(len(tab)):
        if i != row and tab[i][col] != 0:
            f = tab[i][col]
            tab[i] = [x - f * y for x, y in zip(tab[i], tab[row])]
    basis[row] = col


def _reduced_cost_row(tab, basis, cost, ncols):
    obj = list(cost) + [Fraction(0)]
    for i, bcol in enumerate(basis):
        if obj[bcol] != 0:
            f = obj[bcol]
            obj = [x - f * y for x, y in zip(obj, tab[i])]
    return obj


def _bland_iterate(tab, basis, obj, ncols) -> str:
    """Run simplex pivots to optimality with Bland's rule.

    Entering: lowest-index column with negative reduced cost.
    Leaving: lowest basic-variable index among minimum-ratio rows.
    Bland's rule sacrifices speed for a termination guarantee, which
    degenerate complementarity bases make mandatory.
    """
    while True:
        enter = next((j for j in range(ncols) if obj[j] < 0), None)
        if enter is None:
            return "optimal"
        leave = None
        best_ratio = None
        for i in range(len(tab)):
            coef = tab[i][enter]
            if coef > 0:
                ratio = tab[i][-1] / coef
                if best_ratio is None or ratio < best_ratio or (
                    ratio == best_ratio and basis[i] < basis[leave]
                ):
                    best_ratio = ratio
                    leave = i
        if leave is None:
            return "unbounded"
        _pivot(tab, basis, leave, enter)
        f = obj[enter]
        obj[:] = [x - f * y for x, y in zip(obj, tab[leave])]


def lp_solve(c: Vector, region: HPolyhedron, sense: str = "min") -> LpResult:
    """Exact two-phase simplex for min/max of c^T v over an H-polyhedron.

    Free variables are split as v = v+ - v-.  Returns an optimal point
    (a basic feasible solution of the standard form) along with the
    exact optimal value.
    """
    d = region.dim
    if len(c) != d:
        raise DimensionMismatch("lp_solve: objective dimension mismatch")
    if sense not in ("min", "max"):
        raise InputError(f"lp_solve: bad sense {sense!r}")
    cost_vec = c if sense == "min" else tuple(-x for x in c)

    n_ineq = len(region.A)
    ncols = 2 * d + n_ineq  # v+, v-, slacks
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for i, (row, bi) in enumerate(zip(region.A, region.b)):
        r = [Fraction(0)] * ncols
        for j, a in enumerate(row):
            r[j] = a
            r[d + j] = -a
        r[2 * d + i] = Fraction(1)
        rows.append(r)
        rhs.append(bi)
    for row, bi in zip(region.Aeq, region.beq):
        r = [Fraction(0)] * ncols
        for j, a in enumerate(row):
            r[j] = a
            r[d + j] = -a
        rows.append(r)
        rhs.append(bi)

    # Phase 1: make rhs nonnegative, add one artificial per row.
    nrows = len(rows)
    tab: list[list[Fraction]] = []
    for i in range(nrows):
        r = rows[i][:]
        bi = rhs[i]
        if bi < 0:
            r = [-x for x in r]
            bi = -bi
        art = [Fraction(0)] * nrows
        art[i] = Fraction(1)
        tab.append(r + art + [bi])
    total_cols = ncols + nrows
    basis = [ncols + i for i in range(nrows)]
    phase1_cost = [Fraction(0)] * ncols + [Fraction(1)] * nrows
    obj = _reduced_cost_row(tab, basis, phase1_cost, total_cols)
    if _bland_iterate(tab, basis, obj, total_cols) != "optimal":
        raise InputError("phase-1 LP cannot be unbounded")  # min of a sum of nonnegatives
    if -obj[-1] != 0:
        return LpResult("infeasible")
    # Drive leftover artificials out of the basis; drop redundant rows.
    keep_rows = []
    for i in range(len(tab)):
        if basis[i] >= ncols:
            enter = next((j for j in range(ncols) if tab[i][j] != 0), None)
            if enter is None:
                continue  # redundant row
            _pivot(tab, basis, i, enter)
        keep_rows.append(i)
    tab = [tab[i][:ncols] + [tab[i][-1]] for i in keep_rows]
    basis = [basis[i] for i in keep_rows]

    # Phase 2.
    phase2_cost = list(cost_vec) + [-x for x in cost_vec] + [Fraction(0)] * n_ineq
    obj = _reduced_cost_row(tab, basis, phase2_cost, ncols)
    status = _bland_iterate(tab, basis, obj, ncols)
    if status == "unbounded":
        return LpResult("unbounded")
    u = [Fraction(0)] * ncols
    for i, bcol in enumerate(basis):
        u[bcol] = tab[i][-1]
    point = tuple(u[j] - u[d + j] for j in range(d))
    value = dot(c, point)
    return LpResult("optimal", value, point)


def is_empty(region: HPolyhedron) -> bool:
    return lp_solve(zeros(region.dim), region).status == "infeasible"


def feasible_point(region: HPolyhedron) -> Vector | None:
    res = lp_solve(zeros(region.dim), region)
    return res.point if res.status == "optimal" else None


def project_polyhedron(v: Vector, region: HPolyhedron) -> Vector:
    """Euclidean projection of v onto a nonempty H-polyhedron.

    Enumerates candidate active sets: for every subset of inequality
    rows (up to dim of them, plus all equality rows), minimizes the
    distance over the affine hull of that face and keeps feasible
    candidates.  The projection is the feasible candidate of minimal
    distance; it is unique by strict convexity.
    """
    d = region.dim
    if len(v) != d:
        raise DimensionMismatch("project: point dimension mismatch")
    if is_empty(region):
        raise EmptyPolyhedron("cannot project onto an empty polyhedron")
    best: Vector | None = None
    best_dist: Fraction | None = None
    n_ineq = len(region.A)
    for size in range(0, min(d, n_ineq) + 1):
        for subset in combinations(range(n_ineq), size):
            rows = list(region.Aeq) + [region.A[i] for i in subset]
            rhs = list(region.beq) + [region.b[i] for i in subset]
            if not rows:
                candidate = v
            else:
                sol = solve_linear(rows, rhs)
                if sol.status == "inconsistent":
                    continue
                y0 = sol.particular
                if not sol.nullspace:
                    candidate = y0
                else:
                    # Minimize |y0 + N t - v|^2 over t: (N^T N) t = N^T (v - y0).
                    basisvecs = sol.nullspace
                    gram = [[dot(bi, bj) for bj in basisvecs] for bi in basisvecs]
                    rhs_t = [dot(bi, vec_sub(v, y0)) for bi in basisvecs]
                    tsol = solve_linear(gram, rhs_t)
                    candidate = y0
                    for tk, bk in zip(tsol.particular, basisvecs):
                        candidate = vec_add(candidate, vec_scale(tk, bk))
            if not region.contains(candidate):
                continue
            diff = vec_sub(candidate, v)
            dist = dot(diff, diff)
            if best_dist is None or dist < best_dist:
                best, best_dist = candidate, dist
    assert best is not None  # the true active set is always enumerated
    return best


def vertex_enumeration(polytope: HPolyhedron) -> tuple[Vector, ...]:
    """All vertices of a bounded H-polyhedron, lexicographically sorted.

    Raises UnboundedPolytope when some coordinate direction is
    unbounded (checked by LP first).  An empty polytope yields ().
    """
    d = polytope.dim
    if is_empty(polytope):
        return ()
    for j in range(d):
        e = tuple(Fraction(1) if k == j else Fraction(0) for k in range(d))
        for sense in ("min", "max"):
            if lp_solve(e, polytope, sense).status == "unbounded":
                raise UnboundedPolytope(f"unbounded in coordinate {j}")
    all_rows = list(polytope.Aeq) + list(polytope.A)
    all_rhs = list(polytope.beq) + list(polytope.b)
    n = len(all_rows)
    if n < d:
        # Bounded with fewer rows than dimensions only happens for a
        # single point cut out by equalities; handled by combinations
        # below returning nothing.
        return ()
    if comb(n, d) > _VERTEX_COMBO_CAP:
        raise EnumerationCapExceeded(f"vertex enumeration over C({n},{d}) combinations")
    found: set[Vector] = set()
    for subset in combinations(range(n), d):
        rows = [all_rows[i] for i in subset]
        rhs = [all_rhs[i] for i in subset]
        sol = solve_linear(rows, rhs)
        if sol.status != "unique":
            continue
        candidate = sol.particular
        if polytope.contains(candidate):
            found.add(candidate)
    return tuple(sorted(found))


def _normalize_row(row: list[Fraction], rhs: Fraction) -> tuple[tuple[Fraction, ...], Fraction]:
    lead = next((x for x in row if x != 0), None)
    if lead is None:
        return tuple(row), rhs
    scale = 1 / abs(lead)
    return tuple(x * scale for x in row), rhs * scale


def eliminate_variables(region: HPolyhedron, drop: tuple[int, ...]) -> HPolyhedron:
    """Project a polyhedron onto the coordinates not listed in ``drop``.

    Equality rows are used first to pivot variables out exactly;
    any remaining dropped variable is removed by Fourier-Motzkin
    combination of its inequality rows.  Output rows are normalized
    and deduplicated but may still contain redundancies; callers that
    need a minimal description should follow with prune_redundant.
    """
    d = region.dim
    ineq = [(list(row), rhs) for row, rhs in zip(region.A, region.b)]
    eq = [(list(row), rhs) for row, rhs in zip(region.Aeq, region.beq)]
    infeasible = False
    for var in drop:
        pivot_idx = next((i for i, (row, _) in enumerate(eq) if row[var] != 0), None)
        if pivot_idx is not None:
            prow, prhs = eq.pop(pivot_idx)
            pv = prow[var]
            prow = [x / pv for x in prow]
            prhs = prhs / pv
            for rows in (ineq, eq):
                for i, (row, rhs) in enumerate(rows):
                    f = row[var]
                    if f != 0:
                        rows[i] = ([x - f * y for x, y in zip(row, prow)], rhs - f * prhs)
            continue
        pos = [(row, rhs) for row, rhs in ineq if row[var] > 0]
        neg = [(row, rhs) for row, rhs in ineq if row[var] < 0]
        rest = [(row, rhs) for row, rhs in ineq if row[var] == 0]
        combined = list(rest)
        for prow, prhs in pos:
            for nrow, nrhs in neg:
                a, bcoef = prow[var], -nrow[var]
                row = [bcoef * x + a * y for x, y in zip(prow, nrow)]
                combined.append((row, bcoef * prhs + a * nrhs))
        ineq = combined
        # Dedup and strip trivial rows after each elimination round.
        seen = set()
        cleaned = []
        for row, rhs in ineq:
            if all(x == 0 for x in row):
                if rhs < 0:
                    infeasible = True
                continue
            key = _normalize_row(row, rhs)
            if key not in seen:
                seen.add(key)
                cleaned.append((list(key[0]), key[1]))
        ineq = cleaned

    keep = [j for j in range(d) if j not in set(drop)]
    new_dim = len(keep)

    def shrink(rows):
        out_rows, out_rhs = [], []
        for row, rhs in rows:
            assert all(row[j] == 0 for j in drop)
            out_rows.append(tuple(row[j] for j in keep))
            out_rhs.append(rhs)
        return tuple(out_rows), tuple(out_rhs)

    a_rows, a_rhs = shrink(ineq)
    e_rows, e_rhs = shrink(eq)
    if infeasible:
        a_rows = a_rows + (zeros(new_dim),)
        a_rhs = a_rhs + (Fraction(-1),)
    return HPolyhedron(new_dim, a_rows, a_rhs, e_rows, e_rhs)


def prune_redundant(region: HPolyhedron) -> HPolyhedron:
    """Remove inequality rows implied by the rest and reduce equalities to a basis."""
    aug = [list(row) + [rhs] for row, rhs in zip(region.Aeq, region.beq)]
    eq_rows: list[Vector] = []
    eq_rhs: list[Fraction] = []
    if aug:
        reduced, pivots = rref(aug)
        for r, c in zip(reduced, pivots):
            if c == region.dim:  # 0 = 1: keep the contradiction visible
                eq_rows.append(zeros(region.dim))
                eq_rhs.append(Fraction(1))
            else:
                eq_rows.append(tuple(r[: region.dim]))
                eq_rhs.append(r[region.dim])
    keep_a = list(range(len(region.A)))
    i = 0
    while i < len(keep_a):
        idx = keep_a[i]
        others = [k for k in keep_a if k != idx]
        trial = HPolyhedron(
            region.dim,
            tuple(region.A[k] for k in others),
            tuple(region.b[k] for k in others),
            tuple(eq_rows),
            tuple(eq_rhs),
        )
        res = lp_solve(region.A[idx], trial, "max")
        if res.status == "optimal" and res.value <= region.b[idx]:
            keep_a.pop(i)
        else:
            i += 1
    return HPolyhedron(
        region.dim,
        tuple(region.A[k] for k in keep_a),
        tuple(region.b[k] for k in keep_a),
        tuple(eq_rows),
        tuple(eq_rhs),
    )


def cone_generators(cone: PolyhedralCone) -> tuple[Vector, ...]:
    """Generator directions of a polyhedral cone as primitive integer vectors.

    Intersects the cone with the unit box, enumerates vertices, scales
    each nonzero vertex to a primitive direction, and prunes directions
    that are nonnegative combinations of the others.  For a pointed
    cone this yields exactly the extreme rays; cones with lineality
    yield a generating set containing +/- pairs.
    """
    d = cone.dim
    box_rows = []
    box_rhs = []
    for j in range(d):
        e = [Fraction(0)] * d
        e[j] = Fraction(1)
        box_rows.append(tuple(e))
        box_rhs.append(Fraction(1))
        e2 = [Fraction(0)] * d
        e2[j] = Fraction(-1)
        box_rows.append(tuple(e2))
        box_rhs.append(Fraction(1))
    region = HPolyhedron(
        d,
        cone.inequality_normals + tuple(box_rows),
        zeros(len(cone.inequality_normals)) + tuple(box_rhs),
        cone.equality_normals,
        zeros(len(cone.equality_normals)),
    )
    candidates = sorted(
        {primitive_direction(v) for v in vertex_enumeration(region) if not is_zero_vec(v)}
    )
    kept = []
    for i, u in enumerate(candidates):
        others = [w for j, w in enumerate(candidates) if j != i]
        if others and _in_conic_hull(u, others):
            continue
        kept.append(u)
    return tuple(kept)


def _in_conic_hull(u: Vector, generators: list[Vector]) -> bool:
    """Feasibility of u = sum t_i g_i with t >= 0, by LP."""
    k = len(generators)
    eq_rows = tuple(tuple(g[j] for g in generators) for j in range(len(u)))
    region = HPolyhedron(
        k,
        tuple(tuple(-Fraction(i == j) for j in range(k)) for i in range(k)),
        zeros(k),
        eq_rows,
        u,
    )
    return not is_empty(region)


__all__ = [
    "HPolyhedron",
    "PolyhedralCone",
    "LpResult",
    "lp_solve",
    "is_empty",
    "feasible_point",
    "project_polyhedron",
    "vertex_enumeration",
    "eliminate_variables",
    "prune_redundant",
    "cone_generators",
    "rank_of",
    "det_sign",
]
