"""Scalar data (obstacles and boundary values), built-in datasets, and the ordering check."""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    BoundaryOrderViolation,
    EvalDomainError,
    ExponentOutOfRange,
    ExpressionError,
    ObstacleOrderViolation,
    UnknownDataset,
)

INACTIVE = 1.0e6  # magnitude used for obstacles that never touch the solution


class ScalarField:
    """A real function of (x, y), evaluated elementwise on numpy arrays.

    Build one from a Python callable (built-ins) or from an expression string
    with :meth:`from_expression`.
    """

    def __init__(self, func: Callable, name: str = "<field>", source: str | None = None):
        self._func = func
        self.name = name
        self.source = source

    @classmethod
    def from_expression(cls, text: str, name: str | None = None) -> "ScalarField":
        return cls(compile_expression(text), name=name or text, source=text)

    @classmethod
    def constant(cls, c: float, name: str | None = None) -> "ScalarField":
        c = float(c)
        return cls(lambda x, y: np.full(np.broadcast(x, y).shape, c), name=name or repr(c), source=repr(c))

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(self._func(x, y), dtype=float)
        return np.broadcast_to(out, np.broadcast(x, y).shape)

    def on(self, mesh) -> np.ndarray:
        """Values at every mesh node; raises EvalDomainError on non-finite output."""
        vals = np.array(self(mesh.x, mesh.y), dtype=float)
        bad = ~np.isfinite(vals)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise EvalDomainError(f"{self.name} is not finite at node {i} {tuple(mesh.nodes[i])}")
        return vals

    def shifted(self, c: float) -> "ScalarField":
        f = self._func
        return ScalarField(lambda x, y: f(x, y) + c, name=f"({self.name})+{c!r}")

    def swapped(self) -> "ScalarField":
        """The field composed with (x, y) -> (y, x)."""
        f = self._func
        return ScalarField(lambda x, y: f(y, x), name=f"swap({self.name})")

    def __repr__(self):
        return f"ScalarField({self.name!r})"


def eval_field(field: ScalarField, point) -> float:
    x, y = (float(c) for c in point)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise EvalDomainError(f"non-finite point {point}")
    val = float(field(x, y))
    if not math.isfinite(val):
        raise EvalDomainError(f"{field.name} evaluates to {val} at {point}")
    return val


# ---------------------------------------------------------------------------
# expression language

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: np.power,
}
_CMPOPS = {
    ast.Lt: np.less,
    ast.LtE: np.less_equal,
    ast.Gt: np.greater,
    ast.GtE: np.greater_equal,
    ast.Eq: np.equal,
    ast.NotEq: np.not_equal,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}
_UNARY_FUNCS = {"abs": np.abs, "exp": np.exp, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt}


def _piecewise(*args):
    # piecewise(cond1, val1, cond2, val2, ..., default): first true condition wins
    if len(args) < 3 or len(args) % 2 == 0:
        raise ExpressionError("piecewise takes condition/value pairs followed by a default")
    out = np.asarray(args[-1], dtype=float)
    for cond, val in reversed(list(zip(args[:-1:2], args[1:-1:2]))):
        out = np.where(cond, val, out)
    return out


def compile_expression(text: str) -> Callable:
    """Compile an arithmetic expression in x, y into a vectorized callable.

    Supported: numbers, ``x``, ``y``, ``pi``, ``e``, ``+ - * / **`` (``^`` is
    a synonym for ``**``), ``abs exp sin cos sqrt``, n-ary ``min``/``max``,
    comparisons with ``and``/``or``/``not``, and
    ``piecewise(cond1, val1, ..., default)``.
    """
    try:
        # '^' is rewritten before parsing so it gets the precedence of '**'
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            v = float(node.value)
            return lambda x, y: v
        if isinstance(node, ast.Name):
            if node.id == "x":
                return lambda x, y: x
            if node.id == "y":
                return lambda x, y: y
            if node.id in _CONSTANTS:
                v = _CONSTANTS[node.id]
                return lambda x, y: v
            raise ExpressionError(f"unknown name {node.id!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, lhs, rhs = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda x, y: op(lhs(x, y), rhs(x, y))
        if isinstance(node, ast.UnaryOp):
            arg = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda x, y: -arg(x, y)
            if isinstance(node.op, ast.UAdd):
                return arg
            if isinstance(node.op, ast.Not):
                return lambda x, y: np.logical_not(arg(x, y))
        if isinstance(node, ast.Compare):
            parts = [build(node.left)] + [build(c) for c in node.comparators]
            ops = [_CMPOPS[type(o)] for o in node.ops if type(o) in _CMPOPS]
            if len(ops) != len(node.ops):
                raise ExpressionError("unsupported comparison operator")

            def compare(x, y):
                vals = [p(x, y) for p in parts]
                res = ops[0](vals[0], vals[1])
                for i in range(1, len(ops)):
                    res = np.logical_and(res, ops[i](vals[i], vals[i + 1]))
                return res

            return compare
        if isinstance(node, ast.BoolOp):
            parts = [build(v) for v in node.values]
            combine = np.logical_and if isinstance(node.op, ast.And) else np.logical_or

            def boolop(x, y):
                res = parts[0](x, y)
                for p in parts[1:]:
                    res = combine(res, p(x, y))
                return res

            return boolop
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            name = node.func.id
            args = [build(a) for a in node.args]
            if name in _UNARY_FUNCS:
                if len(args) != 1:
                    raise ExpressionError(f"{name} takes exactly one argument")
                fn, arg = _UNARY_FUNCS[name], args[0]
                return lambda x, y: fn(arg(x, y))
            if name in ("min", "max"):
                if not args:
                    raise ExpressionError(f"{name} needs at least one argument")
                red = np.minimum if name == "min" else np.maximum

                def minmax(x, y):
                    res = args[0](x, y)
                    for a in args[1:]:
                        res = red(res, a(x, y))
                    return res

                return minmax
            if name == "piecewise":
                return lambda x, y: _piecewise(*[a(x, y) for a in args])
            raise ExpressionError(f"unknown function {name!r}")
        raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")

    body = build(tree)
    return lambda x, y: np.asarray(body(x, y), dtype=float) + np.zeros(np.broadcast(x, y).shape)


# ---------------------------------------------------------------------------
# problem data


@dataclass(frozen=True)
class ProblemSpec:
    p: float
    psi1: ScalarField
    psi2: ScalarField
    f: ScalarField
    name: str = "custom"
    exact: ScalarField | None = field(default=None, compare=False)

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or p < 2:
            raise ExponentOutOfRange(f"p must be a finite real >= 2, got {self.p}")
        object.__setattr__(self, "p", p)

    def shifted(self, c: float) -> "ProblemSpec":
        """Data (F + c, psi1 + c, psi2 + c)."""
        return ProblemSpec(
            self.p, self.psi1.shifted(c), self.psi2.shifted(c), self.f.shifted(c),
            name=f"{self.name}+{c!r}",
            exact=self.exact.shifted(c) if self.exact is not None else None,
        )


def _try1_psi1(x, y):
    return np.maximum.reduce([
        1 - 33 * (x + 0.5) ** 2 - 27 * (y + 0.1) ** 2,
        0.5 - 40 * (x + 0.3) ** 2 - 34 * (y + 0.4) ** 2,
        0.5 - 36 * (x - 0.6) ** 2 - 51 * (y - 0.7) ** 2,
        np.full(np.broadcast(x, y).shape, -2.0),
    ])


def _try1_psi2(x, y):
    return np.minimum.reduce([
        33 * (x + 0.6) ** 2 + 27 * (y - 0.6) ** 2 - 1,
        33 * (x - 0.6) ** 2 + 27 * (y + 0.6) ** 2 - 1,
        np.full(np.broadcast(x, y).shape, 2.0),
    ])


def smooth_psi1(x, y):
    return np.maximum.reduce([
        2 - 33 * (x + 0.5) ** 2 - 27 * (y + 0.1) ** 2,
        1.5 - 40 * (x + 0.3) ** 2 - 34 * (y + 0.4) ** 2,
        2.5 - 36 * (x - 0.6) ** 2 - 51 * (y - 0.7) ** 2,
        np.full(np.broadcast(x, y).shape, -3.0),
    ])


def smooth_psi2(x, y):
    return np.minimum.reduce([
        33 * (x + 0.6) ** 2 + 27 * (y - 0.6) ** 2 - 3,
        33 * (x - 0.6) ** 2 + 27 * (y + 0.6) ** 2 - 3,
        np.full(np.broadcast(x, y).shape, 3.0),
    ])


def _lipschitz_psi1(x, y):
    # closed middle band wins at y = +-0.5; outer formulas extend past |y| = 1
    ridge = 2 - 17 * np.abs(x - 0.5)
    return np.where(
        np.abs(y) <= 0.5,
        ridge,
        np.where(y < -0.5, ridge - 17 * np.abs(y + 0.5), ridge - 17 * np.abs(y - 0.5)),
    )


def _lipschitz_psi2_raw(x, y):
    return -4 + 12 * np.abs(y + 0.2) + 15 * np.abs(x - 0.7)


def _lipschitz_psi2(x, y):
    # the raw upper obstacle dips below the lower one near (0.5, -0.2);
    # raising it to max(psi1, .) leaves max{psi1, min{psi2, .}} unchanged
    return np.maximum(_lipschitz_psi1(x, y), _lipschitz_psi2_raw(x, y))


def hyperbolic_f(x, y):
    # 2 - (x+y)^2 leaves [psi1, psi2] on parts of the boundary; clamp it back in
    raw = 2 - (x + y) ** 2
    return np.maximum(smooth_psi1(x, y), np.minimum(smooth_psi2(x, y), raw))


def _fundamental(p):
    gamma = (p - 2) / (p - 1)
    return lambda x, y: np.hypot(x - 2, y - 2) ** gamma


def _field(func, name):
    return ScalarField(func, name=name)


def _inactive():
    return ScalarField.constant(-INACTIVE, name="-M"), ScalarField.constant(INACTIVE, name="+M")


def _quadratic(x, y):
    return x ** 2 - y ** 2 - y


def _expsin(x, y):
    return np.exp(x) * np.sin(y)


DATASETS = (
    "try1_p2", "try1_p100", "case_a_p10", "case_b_p10", "case_c_p10",
    "harmonic_quadratic_p2", "harmonic_expsin_p2", "fundamental_pN",
)

_FUNDAMENTAL_RE = re.compile(r"^fundamental_p(N|\d+(?:\.\d+)?)$")


def builtin_dataset(name: str, p: float | None = None) -> ProblemSpec:
    """Return one of the shipped problems.

    ``p`` overrides the dataset's exponent.  ``fundamental_pN`` defaults to
    p = 10; ``fundamental_p<number>`` picks the exponent from the name.
    """
    zero = ScalarField.constant(0.0, name="0")
    if name in ("try1_p2", "try1_p100"):
        spec = ProblemSpec(2.0 if name == "try1_p2" else 100.0,
                           _field(_try1_psi1, "try1.psi1"), _field(_try1_psi2, "try1.psi2"), zero, name=name)
    elif name == "case_a_p10":
        spec = ProblemSpec(10.0, _field(smooth_psi1, "smooth.psi1"), _field(smooth_psi2, "smooth.psi2"),
                           _field(lambda x, y: 1 - 2 * y ** 2, "1-2y^2"), name=name)
    elif name == "case_b_p10":
        spec = ProblemSpec(10.0, _field(_lipschitz_psi1, "lipschitz.psi1"), _field(_lipschitz_psi2, "lipschitz.psi2"),
                           zero, name=name)
    elif name == "case_c_p10":
        spec = ProblemSpec(10.0, _field(smooth_psi1, "smooth.psi1"), _field(smooth_psi2, "smooth.psi2"),
                           _field(hyperbolic_f, "clamp(2-(x+y)^2)"), name=name)
    elif name == "harmonic_quadratic_p2":
        lo, hi = _inactive()
        g = _field(_quadratic, "x^2-y^2-y")
        spec = ProblemSpec(2.0, lo, hi, g, name=name, exact=g)
    elif name == "harmonic_expsin_p2":
        lo, hi = _inactive()
        g = _field(_expsin, "exp(x)sin(y)")
        spec = ProblemSpec(2.0, lo, hi, g, name=name, exact=g)
    else:
        match = _FUNDAMENTAL_RE.match(name)
        if match is None:
            raise UnknownDataset(f"unknown dataset {name!r}; choose from {', '.join(DATASETS)}")
        tag = match.group(1)
        pf = float(p if p is not None else (10.0 if tag == "N" else tag))
        lo, hi = _inactive()
        g = _field(_fundamental(pf), f"|z-(2,2)|^{(pf - 2) / (pf - 1):.6g}")
        return ProblemSpec(pf, lo, hi, g, name=name, exact=g)
    if p is not None and float(p) != spec.p:
        # the exact solution of a harmonic dataset is only valid at its own p
        spec = ProblemSpec(p, spec.psi1, spec.psi2, spec.f, name=f"{name}@p={p:g}")
    return spec


def spec_from_expressions(p: float, psi1: str, psi2: str, f: str, name: str = "inline") -> ProblemSpec:
    return ProblemSpec(p, ScalarField.from_expression(psi1), ScalarField.from_expression(psi2),
                       ScalarField.from_expression(f), name=name)


# ---------------------------------------------------------------------------
# ordering check


@dataclass
class ValidationReport:
    obstacle_violations: list[int]
    boundary_violations: list[int]

    @property
    def ok(self) -> bool:
        return not self.obstacle_violations and not self.boundary_violations

    def raise_if_invalid(self) -> None:
        if self.obstacle_violations:
            n = len(self.obstacle_violations)
            raise ObstacleOrderViolation(f"psi1 > psi2 at {n} node(s)", self.obstacle_violations)
        if self.boundary_violations:
            n = len(self.boundary_violations)
            raise BoundaryOrderViolation(f"f outside [psi1, psi2] at {n} collar node(s)",
                                         self.boundary_violations)


def validate_problem(spec: ProblemSpec, mesh, strict: bool = False) -> ValidationReport:
    """Check psi1 <= psi2 on every node and psi1 <= f <= psi2 on collar nodes.

    With ``strict=True`` the first kind of violation found is raised.
    """
    if spec.p < 2:
        raise ExponentOutOfRange(f"p must be >= 2, got {spec.p}")
    psi1, psi2, f = spec.psi1.on(mesh), spec.psi2.on(mesh), spec.f.on(mesh)
    obstacle = np.flatnonzero(psi1 > psi2).tolist()
    collar = mesh.collar_mask
    boundary = np.flatnonzero(collar & ((f < psi1) | (f > psi2))).tolist()
    report = ValidationReport(obstacle, boundary)
    if strict:
        report.raise_if_invalid()
    return report
