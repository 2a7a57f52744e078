"""Problem representation: exact polynomials and the MPEC instance record.

An instance couples an objective polynomial over (x, y) with a lower
level given either as an affine variational inequality (matrices P, Q,
q over the operator and D, E, b over the feasible set) or as a list of
polynomial operator/constraint functions, plus an upper-level
polyhedron over x and an optional joint polyhedron over (x, y).

Variable order is fixed as (x_1..x_n, y_1..y_m) everywhere; gradients
split into x/y blocks by that order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DimensionMismatch, InputError, UnsupportedStructure
from .polyhedra import HPolyhedron
from .rational import Matrix, Vector, dot, format_rat, mat, rat, vec, zeros

Term = tuple[tuple[int, ...], Fraction]


@dataclass(frozen=True)
class Polynomial:
    """Multivariate polynomial with exact rational coefficients.

    ``terms`` maps exponent vectors to nonzero coefficients and is kept
    sorted; construction through ``from_terms`` normalizes (merges
    duplicate exponent vectors, drops zeros).
    """

    arity: int
    terms: tuple[Term, ...]

    @staticmethod
    def from_terms(arity: int, items: Iterable[tuple[Sequence[int], Fraction | int | str]]) -> "Polynomial":
        acc: dict[tuple[int, ...], Fraction] = {}
        for powers, coef in items:
            p = tuple(int(e) for e in powers)
            if len(p) != arity:
                raise DimensionMismatch(f"term has {len(p)} exponents, expected {arity}")
            if any(e < 0 for e in p):
                raise InputError("negative exponent")
            c = rat(coef)
            acc[p] = acc.get(p, Fraction(0)) + c
        return Polynomial(arity, tuple(sorted((p, c) for p, c in acc.items() if c != 0)))

    @staticmethod
    def zero(arity: int) -> "Polynomial":
        return Polynomial(arity, ())

    @staticmethod
    def constant(arity: int, value: Fraction | int) -> "Polynomial":
        return Polynomial.from_terms(arity, [((0,) * arity, value)])

    @staticmethod
    def variable(arity: int, index: int) -> "Polynomial":
        powers = [0] * arity
        powers[index] = 1
        return Polynomial.from_terms(arity, [(powers, 1)])

    def evaluate(self, point: Sequence[Fraction]) -> Fraction:
        if len(point) != self.arity:
            raise DimensionMismatch(f"evaluate: point has {len(point)} coords, expected {self.arity}")
        total = Fraction(0)
        for powers, coef in self.terms:
            term = coef
            for value, power in zip(point, powers):
                if power:
                    term *= value**power
            total += term
        return total

    def partial(self, index: int) -> "Polynomial":
        items = []
        for powers, coef in self.terms:
            e = powers[index]
            if e:
                p = list(powers)
                p[index] = e - 1
                items.append((p, coef * e))
        return Polynomial.from_terms(self.arity, items)

    def gradient(self) -> tuple["Polynomial", ...]:
        return tuple(self.partial(i) for i in range(self.arity))

    def total_degree(self) -> int:
        return max((sum(p) for p, _ in self.terms), default=0)

    def degree_in(self, index: int) -> int:
        return max((p[index] for p, _ in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial.from_terms(self.arity, list(self.terms) + list(other.terms))

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.arity, tuple((p, -c) for p, c in self.terms))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        items = []
        for pa, ca in self.terms:
            for pb, cb in other.terms:
                items.append((tuple(a + b for a, b in zip(pa, pb)), ca * cb))
        return Polynomial.from_terms(self.arity, items)

    def scale(self, t: Fraction | int) -> "Polynomial":
        t = rat(t)
        if t == 0:
            return Polynomial.zero(self.arity)
        return Polynomial(self.arity, tuple((p, c * t) for p, c in self.terms))

    def render(self, names: Sequence[str]) -> str:
        if not self.terms:
            return "0"
        parts = []
        for powers, coef in self.terms:
            factors = [
                names[i] if e == 1 else f"{names[i]}^{e}"
                for i, e in enumerate(powers)
                if e
            ]
            if not factors:
                parts.append(format_rat(coef))
            elif coef == 1:
                parts.append("*".join(factors))
            elif coef == -1:
                parts.append("-" + "*".join(factors))
            else:
                parts.append(format_rat(coef) + "*" + "*".join(factors))
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out


def eval_poly(p: Polynomial, point: Sequence[Fraction]) -> Fraction:
    return p.evaluate(point)


def grad_poly(p: Polynomial) -> tuple[Polynomial, ...]:
    return p.gradient()


@dataclass(frozen=True)
class AffineVI:
    """Operator F(x,y) = P x + Q y + q over C(x) = {y : D x + E y + b <= 0}."""

    P: Matrix
    Q: Matrix
    q: Vector
    D: Matrix
    E: Matrix
    b: Vector


@dataclass(frozen=True)
class PolynomialVI:
    """Operator F and constraints g as polynomials over (x, y)."""

    F: tuple[Polynomial, ...]
    g: tuple[Polynomial, ...]


@dataclass(frozen=True)
class Point:
    x: Vector
    y: Vector

    @property
    def z(self) -> Vector:
        return self.x + self.y


@dataclass(frozen=True)
class MpecInstance:
    name: str
    n: int
    m: int
    objective: Polynomial
    lower: AffineVI | PolynomialVI
    upper_set: HPolyhedron
    joint_set: HPolyhedron | None = None

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise DimensionMismatch("n and m must be positive")
        if self.objective.arity != self.n + self.m:
            raise DimensionMismatch("objective arity must be n + m")
        if self.upper_set.dim != self.n:
            raise DimensionMismatch("upper_set must live in x-space")
        if self.joint_set is not None and self.joint_set.dim != self.n + self.m:
            raise DimensionMismatch("joint_set must live in (x, y)-space")
        lo = self.lower
        if isinstance(lo, AffineVI):
            ell = len(lo.b)
            checks = [
                (len(lo.P), self.m), (len(lo.Q), self.m), (len(lo.q), self.m),
                (len(lo.D), ell), (len(lo.E), ell),
            ]
            if any(got != want for got, want in checks):
                raise DimensionMismatch("affine lower level: row counts inconsistent")
            for rows, width in ((lo.P, self.n), (lo.Q, self.m), (lo.D, self.n), (lo.E, self.m)):
                for row in rows:
                    if len(row) != width:
                        raise DimensionMismatch("affine lower level: row width inconsistent")
        else:
            if len(lo.F) != self.m:
                raise DimensionMismatch("polynomial lower level: F must have m components")
            for p in lo.F + lo.g:
                if p.arity != self.n + self.m:
                    raise DimensionMismatch("lower-level polynomial arity must be n + m")
            for i, p in enumerate(lo.g):
                if p.total_degree() > 2:
                    raise InputError(f"constraint g_{i + 1} has degree > 2")

    @property
    def ell(self) -> int:
        return len(self.lower.b) if isinstance(self.lower, AffineVI) else len(self.lower.g)

    @property
    def is_affine(self) -> bool:
        return isinstance(self.lower, AffineVI)

    def check_point(self, point: Point) -> None:
        if len(point.x) != self.n or len(point.y) != self.m:
            raise DimensionMismatch("point dimensions do not match instance")

    # Mode-independent evaluation surface used by every analysis module.

    def F_at(self, x: Vector, y: Vector) -> Vector:
        if self.is_affine:
            lo = self.lower
            return tuple(
                dot(lo.P[i], x) + dot(lo.Q[i], y) + lo.q[i] for i in range(self.m)
            )
        return tuple(p.evaluate(x + y) for p in self.lower.F)

    def g_at(self, x: Vector, y: Vector) -> Vector:
        if self.is_affine:
            lo = self.lower
            return tuple(
                dot(lo.D[i], x) + dot(lo.E[i], y) + lo.b[i] for i in range(self.ell)
            )
        return tuple(p.evaluate(x + y) for p in self.lower.g)

    def active_set(self, x: Vector, y: Vector) -> tuple[int, ...]:
        return tuple(i for i, gi in enumerate(self.g_at(x, y)) if gi == 0)

    def grad_y_g_at(self, x: Vector, y: Vector) -> Matrix:
        """Rows are the y-gradients of each g_i at (x, y); shape ell x m."""
        if self.is_affine:
            return self.lower.E
        z = x + y
        return tuple(
            tuple(p.partial(self.n + j).evaluate(z) for j in range(self.m))
            for p in self.lower.g
        )

    def grad_x_g_at(self, x: Vector, y: Vector) -> Matrix:
        if self.is_affine:
            return self.lower.D
        z = x + y
        return tuple(
            tuple(p.partial(j).evaluate(z) for j in range(self.n))
            for p in self.lower.g
        )

    def grad_y_F_at(self, x: Vector, y: Vector) -> Matrix:
        if self.is_affine:
            return self.lower.Q
        z = x + y
        return tuple(
            tuple(p.partial(self.n + j).evaluate(z) for j in range(self.m))
            for p in self.lower.F
        )

    def grad_x_F_at(self, x: Vector, y: Vector) -> Matrix:
        if self.is_affine:
            return self.lower.P
        z = x + y
        return tuple(
            tuple(p.partial(j).evaluate(z) for j in range(self.n))
            for p in self.lower.F
        )

    def hess_yy_g_at(self, i: int, x: Vector, y: Vector) -> Matrix:
        if self.is_affine:
            return tuple(zeros(self.m) for _ in range(self.m))
        z = x + y
        p = self.lower.g[i]
        return tuple(
            tuple(p.partial(self.n + j).partial(self.n + k).evaluate(z) for k in range(self.m))
            for j in range(self.m)
        )

    def hess_yx_g_at(self, i: int, x: Vector, y: Vector) -> Matrix:
        """d/dx of the y-gradient of g_i; shape m x n."""
        if self.is_affine:
            return tuple(zeros(self.n) for _ in range(self.m))
        z = x + y
        p = self.lower.g[i]
        return tuple(
            tuple(p.partial(self.n + j).partial(k).evaluate(z) for k in range(self.n))
            for j in range(self.m)
        )

    def grad_y_L_at(self, x: Vector, y: Vector, lam: Vector) -> Matrix:
        """y-Jacobian of L(x,y,lam) = F + sum_i lam_i grad_y g_i.

        In affine mode the curvature term vanishes and this is Q; in
        polynomial mode the constraint curvature must be included.
        """
        base = self.grad_y_F_at(x, y)
        if self.is_affine:
            return base
        rows = [list(r) for r in base]
        for i, li in enumerate(lam):
            if li != 0:
                h = self.hess_yy_g_at(i, x, y)
                for j in range(self.m):
                    for k in range(self.m):
                        rows[j][k] += li * h[j][k]
        return tuple(tuple(r) for r in rows)

    def grad_x_L_at(self, x: Vector, y: Vector, lam: Vector) -> Matrix:
        base = self.grad_x_F_at(x, y)
        if self.is_affine:
            return base
        rows = [list(r) for r in base]
        for i, li in enumerate(lam):
            if li != 0:
                h = self.hess_yx_g_at(i, x, y)
                for j in range(self.m):
                    for k in range(self.n):
                        rows[j][k] += li * h[j][k]
        return tuple(tuple(r) for r in rows)

    def lower_polyhedron(self, x: Vector) -> HPolyhedron:
        """C(x) as an H-polyhedron over y.

        In polynomial mode this requires every g_i(x, .) to be affine in
        y once x is fixed (true whenever the y-degree of g_i is 1).
        """
        if self.is_affine:
            lo = self.lower
            rhs = tuple(-(dot(lo.D[i], x) + lo.b[i]) for i in range(self.ell))
            return HPolyhedron(self.m, lo.E, rhs)
        rows = []
        rhs = []
        for i, p in enumerate(self.lower.g):
            coefs = []
            const = Fraction(0)
            for powers, coef in p.terms:
                ydeg = sum(powers[self.n:])
                xpart = coef
                for k in range(self.n):
                    if powers[k]:
                        xpart *= x[k] ** powers[k]
                if ydeg == 0:
                    const += xpart
                elif ydeg == 1:
                    coefs.append((powers[self.n:].index(1), xpart))
                else:
                    raise UnsupportedStructure(
                        f"g_{i + 1} is not affine in y at fixed x; projection unavailable"
                    )
            row = [Fraction(0)] * self.m
            for j, c in coefs:
                row[j] += c
            rows.append(tuple(row))
            rhs.append(-const)
        return HPolyhedron(self.m, tuple(rows), tuple(rhs))

    def objective_gradient_at(self, point: Point) -> tuple[Vector, Vector]:
        """(x-part, y-part) of the objective gradient at a point."""
        z = point.z
        grads = tuple(p.evaluate(z) for p in self.objective.gradient())
        return grads[: self.n], grads[self.n:]

    def variable_names(self) -> tuple[str, ...]:
        return tuple(f"x{i + 1}" for i in range(self.n)) + tuple(
            f"y{j + 1}" for j in range(self.m)
        )


# --- instance file format ---------------------------------------------------


def _terms_from_json(data, arity: int) -> Polynomial:
    if not isinstance(data, list):
        raise InputError("polynomial must be a list of terms")
    items = []
    for entry in data:
        if not isinstance(entry, dict) or "coef" not in entry or "powers" not in entry:
            raise InputError("term must be {\"coef\": .., \"powers\": [..]}")
        items.append((entry["powers"], rat(entry["coef"])))
    return Polynomial.from_terms(arity, items)


def _terms_to_json(p: Polynomial):
    return [{"coef": format_rat(c), "powers": list(powers)} for powers, c in p.terms]


def _polyhedron_from_json(data, dim: int, what: str) -> HPolyhedron:
    if not isinstance(data, dict):
        raise InputError(f"{what} must be an object with A and b")
    try:
        a = mat(data.get("A", []))
        b = vec(data.get("b", []))
        aeq = mat(data.get("Aeq", []))
        beq = vec(data.get("beq", []))
    except InputError:
        raise
    return HPolyhedron(dim, a, b, aeq, beq)


def _polyhedron_to_json(p: HPolyhedron):
    out = {
        "A": [[format_rat(x) for x in row] for row in p.A],
        "b": [format_rat(x) for x in p.b],
    }
    if p.Aeq:
        out["Aeq"] = [[format_rat(x) for x in row] for row in p.Aeq]
        out["beq"] = [format_rat(x) for x in p.beq]
    return out


def parse_instance(text: str) -> MpecInstance:
    """Parse an instance file (UTF-8 JSON) into a validated record."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError("instance file must be a JSON object")
    for key in ("name", "n", "m", "ell", "objective", "lower_level"):
        if key not in data:
            raise InputError(f"missing field {key!r}")
    n, m, ell = data["n"], data["m"], data["ell"]
    if not all(isinstance(v, int) for v in (n, m, ell)):
        raise InputError("n, m, ell must be integers")
    arity = n + m
    objective = _terms_from_json(data["objective"], arity)
    lldata = data["lower_level"]
    if not isinstance(lldata, dict) or "type" not in lldata:
        raise InputError("lower_level must be an object with a type")
    if lldata["type"] == "affine":
        try:
            lower = AffineVI(
                P=mat(lldata["P"]), Q=mat(lldata["Q"]), q=vec(lldata["q"]),
                D=mat(lldata["D"]), E=mat(lldata["E"]), b=vec(lldata["b"]),
            )
        except KeyError as exc:
            raise InputError(f"affine lower level missing field {exc}") from exc
        if len(lower.b) != ell:
            raise DimensionMismatch(f"ell={ell} but b has {len(lower.b)} rows")
    elif lldata["type"] == "polynomial":
        try:
            fpolys = tuple(_terms_from_json(t, arity) for t in lldata["F"])
            gpolys = tuple(_terms_from_json(t, arity) for t in lldata["g"])
        except KeyError as exc:
            raise InputError(f"polynomial lower level missing field {exc}") from exc
        if len(gpolys) != ell:
            raise DimensionMismatch(f"ell={ell} but g has {len(gpolys)} entries")
        lower = PolynomialVI(fpolys, gpolys)
    else:
        raise InputError(f"unknown lower-level type {lldata['type']!r}")
    upper = _polyhedron_from_json(data.get("upper_set", {}), n, "upper_set")
    joint = None
    if "joint_set" in data and data["joint_set"] is not None:
        joint = _polyhedron_from_json(data["joint_set"], arity, "joint_set")
    return MpecInstance(
        name=str(data["name"]), n=n, m=m,
        objective=objective, lower=lower, upper_set=upper, joint_set=joint,
    )


def serialize_instance(instance: MpecInstance) -> str:
    data = {
        "name": instance.name,
        "n": instance.n,
        "m": instance.m,
        "ell": instance.ell,
        "objective": _terms_to_json(instance.objective),
    }
    lo = instance.lower
    if isinstance(lo, AffineVI):
        data["lower_level"] = {
            "type": "affine",
            "P": [[format_rat(x) for x in row] for row in lo.P],
            "Q": [[format_rat(x) for x in row] for row in lo.Q],
            "q": [format_rat(x) for x in lo.q],
            "D": [[format_rat(x) for x in row] for row in lo.D],
            "E": [[format_rat(x) for x in row] for row in lo.E],
            "b": [format_rat(x) for x in lo.b],
        }
    else:
        data["lower_level"] = {
            "type": "polynomial",
            "F": [_terms_to_json(p) for p in lo.F],
            "g": [_terms_to_json(p) for p in lo.g],
        }
    data["upper_set"] = _polyhedron_to_json(instance.upper_set)
    if instance.joint_set is not None:
        data["joint_set"] = _polyhedron_to_json(instance.joint_set)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def parse_point(instance: MpecInstance, text: str) -> Point:
    """Parse a full (x, y) point given as comma-separated rationals."""
    values = parse_vector(text)
    if len(values) != instance.n + instance.m:
        raise InputError(
            f"point needs {instance.n + instance.m} coordinates, got {len(values)}"
        )
    return Point(values[: instance.n], values[instance.n:])


def parse_vector(text: str) -> Vector:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise InputError("empty vector")
    return vec(parts)
