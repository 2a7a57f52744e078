"""Lower-level VI solving, KKT verification, and the normal map.

The affine solver enumerates every complementarity pattern over the
constraint rows and solves the resulting linear systems exactly.  That
is deliberately enumerative rather than pivoting: at desk scale the
2^ell scan is cheap, provably exhaustive, and immune to the degenerate
bases that complementarity systems produce.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import (
    EmptyLowerFeasibleSet,
    EnumerationCapExceeded,
    UnsupportedDimension,
    UnsupportedStructure,
)
from .linalg import solve_linear
from .model import MpecInstance, Point
from .polyhedra import HPolyhedron, feasible_point, is_empty, lp_solve, project_polyhedron
from .rational import Matrix, Vector, dot, is_zero_vec, vec_add, vec_scale, vec_sub, zeros

DEFAULT_ENUM_CAP = 16


@dataclass(frozen=True)
class AviSolution:
    point: Vector
    active: tuple[int, ...]
    multiplier: Vector
    eq_multiplier: Vector = ()


@dataclass(frozen=True)
class ContinuumBranch:
    """A complementarity pattern whose solution set is not a single point."""

    pattern: tuple[int, ...]
    particular: Vector
    directions: tuple[Vector, ...]


@dataclass(frozen=True)
class AviResult:
    solutions: tuple[AviSolution, ...]
    continua: tuple[ContinuumBranch, ...] = ()


def solve_affine_vi(
    op_matrix: Matrix,
    op_offset: Vector,
    region: HPolyhedron,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> AviResult:
    """All solutions of VI(v -> M v + p, region) for a polyhedral region.

    Enumerates subsets S of the inequality rows: rows in S are forced
    tight with multiplier >= 0, rows outside keep multiplier 0; equality
    rows always carry a free multiplier.  Each pattern yields a square
    linear system in (v, mu_S, nu).  Rank-deficient pattern systems are
    resolved exactly: when the v-part of the solution family is pinned,
    multiplier existence is settled by LP; when v itself varies, the
    pattern is reported as a continuum rather than silently sampled.
    """
    d = region.dim
    k = len(region.A)
    e = len(region.Aeq)
    if k > enum_cap:
        raise EnumerationCapExceeded(f"{k} inequality rows exceeds enumeration cap {enum_cap}")
    solutions: dict[Vector, AviSolution] = {}
    continua: list[ContinuumBranch] = []
    for mask in range(1 << k):
        pattern = tuple(i for i in range(k) if mask >> i & 1)
        ns = len(pattern)
        width = d + ns + e
        rows: list[list[Fraction]] = []
        rhs: list[Fraction] = []
        for i in range(d):
            row = [Fraction(0)] * width
            row[:d] = list(op_matrix[i])
            for col, s in enumerate(pattern):
                row[d + col] = region.A[s][i]
            for col in range(e):
                row[d + ns + col] = region.Aeq[col][i]
            rows.append(row)
            rhs.append(-op_offset[i])
        for s in pattern:
            rows.append(list(region.A[s]) + [Fraction(0)] * (ns + e))
            rhs.append(region.b[s])
        for t in range(e):
            rows.append(list(region.Aeq[t]) + [Fraction(0)] * (ns + e))
            rhs.append(region.beq[t])
        sol = solve_linear(rows, rhs)
        if sol.status == "inconsistent":
            continue
        v0 = sol.particular[:d]
        mu0 = sol.particular[d : d + ns]
        nu0 = sol.particular[d + ns :]
        if sol.status == "unique":
            if all(x >= 0 for x in mu0) and _feasible_off_pattern(region, v0, pattern):
                _record(solutions, region, pattern, v0, mu0, nu0, k)
            continue
        v_dirs = [b[:d] for b in sol.nullspace]
        if all(is_zero_vec(vd) for vd in v_dirs):
            mu = _multiplier_from_family(mu0, [b[d : d + ns] for b in sol.nullspace])
            if mu is not None and _feasible_off_pattern(region, v0, pattern):
                _record(solutions, region, pattern, v0, mu, nu0, k)
            continue
        resolved = _resolve_continuum(region, pattern, sol.particular, sol.nullspace, d, ns)
        if resolved is None:
            continue
        kind, payload = resolved
        if kind == "point":
            v, mu, nu = payload
            _record(solutions, region, pattern, v, mu, nu, k)
        else:
            continua.append(payload)
    ordered = tuple(solutions[key] for key in sorted(solutions))
    return AviResult(ordered, tuple(continua))


def _feasible_off_pattern(region: HPolyhedron, v: Vector, pattern: tuple[int, ...]) -> bool:
    chosen = set(pattern)
    return all(
        dot(region.A[j], v) <= region.b[j]
        for j in range(len(region.A))
        if j not in chosen
    )


def _record(solutions, region, pattern, v, mu_s, nu, k) -> None:
    if v in solutions:
        return
    full = [Fraction(0)] * k
    for col, s in enumerate(pattern):
        full[s] = mu_s[col]
    solutions[v] = AviSolution(v, region.active_rows(v), tuple(full), tuple(nu))


def _multiplier_from_family(mu0: Vector, mu_dirs: list[Vector]) -> Vector | None:
    """A nonnegative multiplier inside {mu0 + span(mu_dirs)}, or None."""
    ns = len(mu0)
    if ns == 0:
        return ()
    nb = len(mu_dirs)
    rows = tuple(
        tuple(-mu_dirs[col][j] for col in range(nb)) for j in range(ns)
    )
    region = HPolyhedron(nb, rows, tuple(mu0))
    t = feasible_point(region)
    if t is None:
        return None
    mu = list(mu0)
    for col, tc in enumerate(t):
        for j in range(ns):
            mu[j] += tc * mu_dirs[col][j]
    return tuple(mu)


def _resolve_continuum(region, pattern, particular, nullspace, d, ns):
    """Intersect an affine pattern family with feasibility.

    Builds the polyhedron of family parameters t satisfying multiplier
    signs and off-pattern feasibility.  If the v-image of that
    polyhedron is a single point, returns it as an ordinary solution;
    otherwise returns a ContinuumBranch description.
    """
    nb = len(nullspace)
    v0 = particular[:d]
    mu0 = particular[d : d + ns]
    rows: list[Vector] = []
    rhs: list[Fraction] = []
    for j in range(ns):
        rows.append(tuple(-nullspace[col][d + j] for col in range(nb)))
        rhs.append(mu0[j])
    chosen = set(pattern)
    for irow in range(len(region.A)):
        if irow in chosen:
            continue
        coef = tuple(
            dot(region.A[irow], nullspace[col][:d]) for col in range(nb)
        )
        rows.append(coef)
        rhs.append(region.b[irow] - dot(region.A[irow], v0))
    tregion = HPolyhedron(nb, tuple(rows), tuple(rhs))
    t0 = feasible_point(tregion)
    if t0 is None:
        return None

    def at(t: Vector) -> Vector:
        out = list(particular)
        for col, tc in enumerate(t):
            for j in range(len(out)):
                out[j] += tc * nullspace[col][j]
        return tuple(out)

    single = True
    for j in range(d):
        coef = tuple(nullspace[col][j] for col in range(nb))
        if is_zero_vec(coef):
            continue
        lo = lp_solve(coef, tregion, "min")
        hi = lp_solve(coef, tregion, "max")
        if lo.status != "optimal" or hi.status != "optimal" or lo.value != hi.value:
            single = False
            break
    full0 = at(t0)
    if single:
        return "point", (full0[:d], full0[d : d + ns], full0[d + ns :])
    dirs = tuple(
        b[:d] for b in nullspace if not is_zero_vec(b[:d])
    )
    return "continuum", ContinuumBranch(pattern, full0[:d], dirs)


# --- instance-level operations ----------------------------------------------


@dataclass(frozen=True)
class ViSolution:
    y: Vector
    active_set: tuple[int, ...]
    multiplier: Vector


@dataclass(frozen=True)
class IrrationalCandidate:
    """A branch root with an irrational value, reported as an interval."""

    pattern: tuple[int, ...]
    low: Fraction
    high: Fraction


@dataclass(frozen=True)
class ViSolutionSet:
    solutions: tuple[ViSolution, ...]
    exhaustive: bool
    continua: tuple[ContinuumBranch, ...] = ()
    irrational: tuple[IrrationalCandidate, ...] = ()

    @property
    def count(self) -> int:
        return len(self.solutions)


def solve_avi(instance: MpecInstance, x: Vector, enum_cap: int = DEFAULT_ENUM_CAP) -> ViSolutionSet:
    """Exhaustive exact solution set of the affine lower level at fixed x."""
    if not instance.is_affine:
        raise UnsupportedStructure("solve_avi requires an affine lower level")
    region = instance.lower_polyhedron(x)
    if is_empty(region):
        raise EmptyLowerFeasibleSet(f"C(x) is empty at x = {x}")
    lo = instance.lower
    offset = tuple(dot(lo.P[i], x) + lo.q[i] for i in range(instance.m))
    result = solve_affine_vi(lo.Q, offset, region, enum_cap)
    sols = tuple(
        ViSolution(s.point, s.active, s.multiplier) for s in result.solutions
    )
    return ViSolutionSet(sols, exhaustive=not result.continua, continua=result.continua)


def _univariate_in_y(instance: MpecInstance, p, x: Vector) -> tuple[Fraction, Fraction, Fraction]:
    """Coefficients (a, b, c) of p(x, y) = a y^2 + b y + c at fixed x."""
    n = instance.n
    a = b = c = Fraction(0)
    for powers, coef in p.terms:
        ydeg = powers[n]
        xval = coef
        for k in range(n):
            if powers[k]:
                xval *= x[k] ** powers[k]
        if ydeg == 0:
            c += xval
        elif ydeg == 1:
            b += xval
        elif ydeg == 2:
            a += xval
        else:
            raise UnsupportedStructure("y-degree above 2 in lower-level polynomial")
    return a, b, c


def _isqrt_fraction(value: Fraction) -> Fraction | None:
    """Exact square root of a nonnegative rational, or None if irrational."""
    if value < 0:
        return None
    num, den = value.numerator, value.denominator
    rn = _isqrt(num)
    rd = _isqrt(den)
    if rn is None or rd is None:
        return None
    return Fraction(rn, rd)


def _isqrt(v: int) -> int | None:
    from math import isqrt

    r = isqrt(v)
    return r if r * r == v else None


def _bracket_sqrt(value: Fraction, width: Fraction = Fraction(1, 1 << 20)) -> tuple[Fraction, Fraction]:
    lo, hi = Fraction(0), value + 1
    while hi - lo > width:
        mid = (lo + hi) / 2
        if mid * mid <= value:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _quadratic_roots(a: Fraction, b: Fraction, c: Fraction):
    """Roots of a y^2 + b y + c = 0.

    Returns (kind, payload): kind "all" for the zero polynomial,
    "roots" with exact rational roots, or "irrational" with isolating
    intervals for each real root.
    """
    if a == 0:
        if b == 0:
            return ("all", None) if c == 0 else ("roots", [])
        return "roots", [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        return "roots", []
    if disc == 0:
        return "roots", [-b / (2 * a)]
    root = _isqrt_fraction(disc)
    if root is not None:
        r1 = (-b - root) / (2 * a)
        r2 = (-b + root) / (2 * a)
        return "roots", sorted([r1, r2])
    slo, shi = _bracket_sqrt(disc)
    intervals = sorted(
        [
            ((-b - shi) / (2 * a), (-b - slo) / (2 * a)),
            ((-b + slo) / (2 * a), (-b + shi) / (2 * a)),
        ]
    )
    intervals = [tuple(sorted(iv)) for iv in intervals]
    return "irrational", intervals


def solve_polynomial_vi(
    instance: MpecInstance, x: Vector, enum_cap: int = DEFAULT_ENUM_CAP
) -> ViSolutionSet:
    """Branch solutions of the scalar polynomial lower level at fixed x.

    Each complementarity pattern reduces to a linear-or-quadratic root
    problem in y.  Rational roots are verified exactly against the KKT
    system; irrational roots are reported as isolating intervals and
    excluded from the exact solution list.
    """
    if instance.is_affine:
        raise UnsupportedStructure("solve_polynomial_vi requires a polynomial lower level")
    if instance.m != 1:
        raise UnsupportedDimension("polynomial mode supports scalar y only")
    ell = instance.ell
    if ell > enum_cap:
        raise EnumerationCapExceeded(f"{ell} constraints exceeds enumeration cap {enum_cap}")
    solutions: dict[Vector, ViSolution] = {}
    irrational: list[IrrationalCandidate] = []
    for mask in range(1 << ell):
        pattern = tuple(i for i in range(ell) if mask >> i & 1)
        if pattern:
            candidate_sets = []
            skip = False
            for i in pattern:
                kind, payload = _quadratic_roots(
                    *_univariate_in_y(instance, instance.lower.g[i], x)
                )
                if kind == "all":
                    continue  # identically zero constraint restricts nothing
                if kind == "irrational":
                    if len(pattern) == 1:
                        for lo, hi in payload:
                            irrational.append(IrrationalCandidate(pattern, lo, hi))
                    skip = True
                    break
                candidate_sets.append(set(payload))
            if skip:
                continue
            if not candidate_sets:
                continue  # every active constraint vanished identically
            candidates = sorted(set.intersection(*candidate_sets))
        else:
            kind, payload = _quadratic_roots(
                *_univariate_in_y(instance, instance.lower.F[0], x)
            )
            if kind == "all":
                continue
            if kind == "irrational":
                for lo, hi in payload:
                    irrational.append(IrrationalCandidate(pattern, lo, hi))
                continue
            candidates = payload
        for yval in candidates:
            y = (yval,)
            gvals = instance.g_at(x, y)
            if any(gv > 0 for gv in gvals):
                continue
            if any(gvals[i] != 0 for i in pattern):
                continue
            if pattern:
                fval = instance.F_at(x, y)[0]
                coefs = tuple(
                    instance.grad_y_g_at(x, y)[i][0] for i in pattern
                )
                lam_s = _nonnegative_combination(coefs, -fval)
                if lam_s is None:
                    continue
                lam = [Fraction(0)] * ell
                for idx, i in enumerate(pattern):
                    lam[i] = lam_s[idx]
                lam = tuple(lam)
            else:
                lam = zeros(ell)
            if y not in solutions:
                solutions[y] = ViSolution(y, instance.active_set(x, y), lam)
    ordered = tuple(solutions[k] for k in sorted(solutions))
    return ViSolutionSet(ordered, exhaustive=False, irrational=tuple(irrational))


def _nonnegative_combination(coefs: tuple[Fraction, ...], target: Fraction) -> Vector | None:
    """Some lam >= 0 with sum lam_i coefs_i = target, or None."""
    k = len(coefs)
    region = HPolyhedron(
        k,
        tuple(tuple(-Fraction(i == j) for j in range(k)) for i in range(k)),
        zeros(k),
        (coefs,),
        (target,),
    )
    return feasible_point(region)


def solve_lower_level(
    instance: MpecInstance, x: Vector, enum_cap: int = DEFAULT_ENUM_CAP
) -> ViSolutionSet:
    if instance.is_affine:
        return solve_avi(instance, x, enum_cap)
    return solve_polynomial_vi(instance, x, enum_cap)


# --- KKT verification ---------------------------------------------------------


@dataclass(frozen=True)
class KktViolation:
    kind: str  # "stationarity" | "multiplier_sign" | "primal_feasibility" | "complementarity"
    index: int
    residual: Fraction


@dataclass(frozen=True)
class KktCheck:
    valid: bool
    violations: tuple[KktViolation, ...]
    stationarity_residual: Vector


def check_kkt(instance: MpecInstance, x: Vector, y: Vector, lam: Vector) -> KktCheck:
    """Exact verification of the lower-level KKT system at (x, y, lam)."""
    if len(lam) != instance.ell:
        raise UnsupportedDimension(f"lambda needs {instance.ell} entries, got {len(lam)}")
    fvec = instance.F_at(x, y)
    grads = instance.grad_y_g_at(x, y)
    residual = list(fvec)
    for i, li in enumerate(lam):
        if li != 0:
            for j in range(instance.m):
                residual[j] += li * grads[i][j]
    gvals = instance.g_at(x, y)
    violations: list[KktViolation] = []
    for j, r in enumerate(residual):
        if r != 0:
            violations.append(KktViolation("stationarity", j, r))
    for i, li in enumerate(lam):
        if li < 0:
            violations.append(KktViolation("multiplier_sign", i, li))
    for i, gv in enumerate(gvals):
        if gv > 0:
            violations.append(KktViolation("primal_feasibility", i, gv))
    for i, (li, gv) in enumerate(zip(lam, gvals)):
        if li * gv != 0:
            violations.append(KktViolation("complementarity", i, li * gv))
    return KktCheck(not violations, tuple(violations), tuple(residual))


# --- normal map ---------------------------------------------------------------


@dataclass(frozen=True)
class NormalMapPoint:
    x: Vector
    v: Vector
    projected: Vector
    h_value: Vector
    is_zero: bool


def normal_map_eval(instance: MpecInstance, x: Vector, v: Vector) -> NormalMapPoint:
    """H(x, v) = F(x, proj(v)) + v - proj(v) with proj onto C(x)."""
    region = instance.lower_polyhedron(x)
    if is_empty(region):
        raise EmptyLowerFeasibleSet(f"C(x) is empty at x = {x}")
    projected = project_polyhedron(v, region)
    fval = instance.F_at(x, projected)
    h = tuple(f + vi - pi for f, vi, pi in zip(fval, v, projected))
    return NormalMapPoint(x, v, projected, h, is_zero_vec(h))


# --- implicit-map sampling ----------------------------------------------------


@dataclass(frozen=True)
class ImplicitMapRow:
    x: Vector
    count: int
    y_unique: Vector | None
    single_valued: bool
    solution_set: ViSolutionSet


@dataclass(frozen=True)
class ImplicitMapTable:
    rows: tuple[ImplicitMapRow, ...]


def sample_implicit_map(
    instance: MpecInstance,
    x_grid: Sequence[Vector],
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> ImplicitMapTable:
    """Solve the lower level over a grid of x values.

    Single-valuedness is reported grid-pointwise only; no neighborhood
    claim is made.
    """
    rows = []
    for x in x_grid:
        sset = solve_lower_level(instance, x, enum_cap)
        clean = not sset.continua and not sset.irrational
        count = sset.count
        y_unique = sset.solutions[0].y if (count == 1 and clean) else None
        rows.append(ImplicitMapRow(x, count, y_unique, count == 1 and clean, sset))
    return ImplicitMapTable(tuple(rows))
