"""Darboux charts, Hamiltonian vector fields, Poisson brackets and symplecticity tests.

Sign conventions.  A chart carries ``omega_sign``:

* ``+1`` (default): ``omega = sum dx_i ^ dy_i``.
* ``-1``: the canonical cotangent form ``omega = d(lambda) = sum dy_i ^ dx_i``
  for ``lambda = sum y_i dx_i`` (positions ``x``, momenta ``y``).  Charts built
  by :func:`symrigid.lift.cotangent_lift` use this.

Hamiltonian fields always solve ``iota_X omega = -df``; with ``omega_sign=+1``
this gives ``X = (-df/dy, df/dx)``.  For ``f = x^2 + y^2`` that is ``(-2y, 2x)``,
twice the generator ``-y d/dx + x d/dy`` usually listed for elliptic blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from symrigid import expr as E
from symrigid.expr import Expr, Program, compile_exprs


@dataclass(frozen=True)
class DarbouxChart:
    """Standard symplectic chart on R^2n; coordinates ordered (x_1..x_n, y_1..y_n)."""

    positions: tuple[str, ...]
    momenta: tuple[str, ...]
    periodic: frozenset[str] = frozenset()
    omega_sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(self.positions))
        object.__setattr__(self, "momenta", tuple(self.momenta))
        object.__setattr__(self, "periodic", frozenset(self.periodic))
        if len(self.positions) != len(self.momenta) or not self.positions:
            raise ValueError("chart needs the same positive number of positions and momenta")
        names = self.positions + self.momenta
        if len(set(names)) != len(names):
            raise ValueError(f"chart variable names must be distinct: {names}")
        if not self.periodic <= set(self.positions):
            raise ValueError("only position variables can be periodic")
        if self.omega_sign not in (1, -1):
            raise ValueError("omega_sign must be +1 or -1")

    @classmethod
    def standard(cls, n: int, x: str = "x", y: str = "y", **kw) -> "DarbouxChart":
        if n == 1:
            return cls((x,), (y,), **kw)
        return cls(tuple(f"{x}{i}" for i in range(1, n + 1)), tuple(f"{y}{i}" for i in range(1, n + 1)), **kw)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def variables(self) -> tuple[str, ...]:
        return self.positions + self.momenta

    @property
    def omega(self) -> np.ndarray:
        """Matrix of the symplectic form: omega(u, v) = u^T @ omega @ v."""
        n = self.n
        om = np.zeros((2 * n, 2 * n))
        om[:n, n:] = np.eye(n)
        om[n:, :n] = -np.eye(n)
        return self.omega_sign * om

    @property
    def periodic_mask(self) -> np.ndarray:
        return np.array([v in self.periodic for v in self.variables])

    def with_form(self, omega_sign: int) -> "DarbouxChart":
        return DarbouxChart(self.positions, self.momenta, self.periodic, omega_sign)

    def block(self, i: int) -> tuple[str, str]:
        return self.positions[i], self.momenta[i]


@dataclass(frozen=True)
class PhasePoint:
    chart: DarbouxChart
    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if len(coords) != self.chart.dim:
            raise ValueError(f"point has {len(coords)} coordinates, chart needs {self.chart.dim}")
        object.__setattr__(self, "coords", coords)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords)

    def binding(self) -> dict[str, float]:
        return dict(zip(self.chart.variables, self.coords))


def _check_over_chart(e: Expr, chart: DarbouxChart, what: str) -> None:
    extra = e.free_vars() - set(chart.variables)
    if extra:
        raise ValueError(f"{what} uses variables outside the chart: {sorted(extra)}")


@dataclass(frozen=True)
class MomentMapSystem:
    """Integrable system F = (f_1, ..., f_n) on a Darboux chart."""

    chart: DarbouxChart
    functions: tuple[Expr, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        funcs = tuple(E.as_expr(f) for f in self.functions)
        object.__setattr__(self, "functions", funcs)
        if len(funcs) != self.chart.n:
            raise ValueError(f"system has {len(funcs)} functions but the chart has {self.chart.n} degrees of freedom")
        for i, f in enumerate(funcs):
            _check_over_chart(f, self.chart, f"f_{i + 1}")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"f{i + 1}" for i in range(len(funcs))))

    @property
    def n(self) -> int:
        return self.chart.n

    def program(self) -> Program:
        return compile_exprs(self.functions, self.chart.variables)

    def gradient_program(self) -> Program:
        vs = self.chart.variables
        return compile_exprs([E.diff(f, v) for f in self.functions for v in vs], vs)


@dataclass(frozen=True)
class VectorFieldExpr:
    chart: DarbouxChart
    components: tuple[Expr, ...]

    def __post_init__(self):
        comps = tuple(E.as_expr(c) for c in self.components)
        if len(comps) != self.chart.dim:
            raise ValueError(f"vector field needs {self.chart.dim} components, got {len(comps)}")
        object.__setattr__(self, "components", comps)

    def program(self) -> Program:
        return compile_exprs(self.components, self.chart.variables)

    def __call__(self, z) -> np.ndarray:
        return self.program()(z)


@dataclass
class CheckReport:
    """Outcome of a sampled residual check."""

    name: str
    residual: float
    tol: float
    passed: bool
    n_samples: int
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": self.name,
            "residual": self.residual,
            "tol": self.tol,
            "passed": self.passed,
            "n_samples": self.n_samples,
            **({"details": self.details} if self.details else {}),
        }


def _report(name: str, residual: float, tol: float, n: int, **details) -> CheckReport:
    residual = float(residual)
    return CheckReport(name, residual, float(tol), bool(residual <= tol), int(n), dict(details))


# ---------------------------------------------------------------------------
# sampling


def sample_points(chart: DarbouxChart, count: int, box: float = 2.0, seed: int = 0) -> np.ndarray:
    """Uniform points in [-box, box]^2n; periodic positions drawn from [0, 2pi)."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box, box, size=(count, chart.dim))
    mask = chart.periodic_mask
    if mask.any():
        pts[:, mask] = rng.uniform(0.0, 2.0 * math.pi, size=(count, int(mask.sum())))
    return pts


def _as_samples(chart: DarbouxChart, samples) -> np.ndarray:
    if isinstance(samples, (int, np.integer)):
        return sample_points(chart, int(samples))
    pts = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if pts.shape[1] != chart.dim:
        raise ValueError(f"samples must have {chart.dim} columns, got {pts.shape[1]}")
    return pts


# ---------------------------------------------------------------------------
# Hamiltonian calculus


def hamiltonian_vector_field(f: Expr, chart: DarbouxChart) -> VectorFieldExpr:
    """Field X_f solving iota_X omega = -df."""
    f = E.as_expr(f)
    _check_over_chart(f, chart, "Hamiltonian")
    s = float(chart.omega_sign)
    xs = [E.mul(E.const(-s), E.diff(f, y)) for y in chart.momenta]
    ys = [E.mul(E.const(s), E.diff(f, x)) for x in chart.positions]
    return VectorFieldExpr(chart, tuple(xs + ys))


def poisson_bracket(f: Expr, g: Expr, chart: DarbouxChart) -> Expr:
    """{f, g} = omega(X_f, X_g) = sign * sum(f_x g_y - f_y g_x)."""
    f, g = E.as_expr(f), E.as_expr(g)
    terms = []
    for x, y in zip(chart.positions, chart.momenta):
        terms.append(E.mul(E.diff(f, x), E.diff(g, y)))
        terms.append(E.neg(E.mul(E.diff(f, y), E.diff(g, x))))
    out = E.total(terms)
    return out if chart.omega_sign == 1 else E.neg(out)


def omega_pairing(chart: DarbouxChart, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """omega(u, v) for stacked vectors (..., 2n)."""
    return np.einsum("...i,ij,...j->...", u, chart.omega, v)


def check_involution(system: MomentMapSystem, samples=100, tol: float = 1e-9) -> CheckReport:
    """Evaluate every bracket {f_i, f_j} (i < j) at the samples; pass iff all vanish to tol."""
    chart = system.chart
    pts = _as_samples(chart, samples)
    pairs = [(i, j) for i in range(system.n) for j in range(i + 1, system.n)]
    if not pairs:
        return _report("involution", 0.0, tol, len(pts), pairs=[])
    brackets = [poisson_bracket(system.functions[i], system.functions[j], chart) for i, j in pairs]
    vals = np.abs(compile_exprs(brackets, chart.variables).batch(pts))
    worst = vals.max(axis=0)
    k = int(np.argmax(worst))
    return _report(
        "involution",
        worst[k],
        tol,
        len(pts),
        worst_pair=[pairs[k][0] + 1, pairs[k][1] + 1],
        worst_point=pts[int(np.argmax(vals[:, k]))].tolist(),
    )


def liouville_form(chart: DarbouxChart) -> tuple[Expr, ...]:
    """lambda = sum y_i dx_i as components against (dx_1..dx_n, dy_1..dy_n)."""
    return tuple(E.var(y) for y in chart.momenta) + (E.ZERO,) * chart.n


# ---------------------------------------------------------------------------
# maps


class ExprMap:
    """A smooth map given by expressions, differentiated symbolically.

    ``variables`` are the coordinates the map acts on; ``params`` are extra
    inputs (group parameters) that are held fixed when differentiating.
    """

    def __init__(self, components: Sequence[Expr], variables: Sequence[str], params: Sequence[str] = ()):
        self.components = tuple(E.as_expr(c) for c in components)
        self.variables = tuple(variables)
        self.params = tuple(params)
        allv = self.variables + self.params
        extra = set().union(*(c.free_vars() for c in self.components)) - set(allv)
        if extra:
            raise ValueError(f"map uses unknown variables {sorted(extra)}")
        self._value = compile_exprs(self.components, allv)
        self._jac: Program | None = None
        self._hess: Program | None = None

    @property
    def dim_out(self) -> int:
        return len(self.components)

    def _inputs(self, Z: np.ndarray, g) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if not self.params:
            return Z
        g = np.atleast_1d(np.asarray(g, dtype=np.float64))
        if g.shape[-1] != len(self.params):
            raise ValueError(f"map needs values for parameters {self.params}")
        # one parameter vector for all rows, or one per row
        G = np.broadcast_to(np.atleast_2d(g), (Z.shape[0], len(self.params)))
        return np.hstack([Z, G])

    def values(self, Z, g=()) -> np.ndarray:
        return self._value.batch(self._inputs(Z, g))

    def jacobians(self, Z, g=()) -> np.ndarray:
        if self._jac is None:
            jac = E.jacobian(self.components, self.variables)
            self._jac = compile_exprs([e for row in jac for e in row], self.variables + self.params)
        m, n = self.dim_out, len(self.variables)
        return self._jac.batch(self._inputs(Z, g)).reshape(-1, m, n)

    def second_derivatives(self, Z, g=()) -> np.ndarray:
        """Array (P, m, n, n) of d^2 phi_i / dz_j dz_k."""
        if self._hess is None:
            flat = []
            for c in self.components:
                for row in E.hessian(c, self.variables):
                    flat.extend(row)
            self._hess = compile_exprs(flat, self.variables + self.params)
        m, n = self.dim_out, len(self.variables)
        return self._hess.batch(self._inputs(Z, g)).reshape(-1, m, n, n)

    def bind(self, g) -> "ExprMap":
        """Fix the parameters to numbers, returning a parameter-free map."""
        sub = {p: float(v) for p, v in zip(self.params, np.atleast_1d(g))}
        return ExprMap([c.subs(sub) for c in self.components], self.variables)


def as_map(phi, chart: DarbouxChart):
    if isinstance(phi, ExprMap) or hasattr(phi, "jacobians"):
        return phi
    comps = tuple(phi)
    if len(comps) != chart.dim:
        raise ValueError(f"map needs {chart.dim} components, got {len(comps)}")
    return ExprMap(comps, chart.variables)


def symplectic_residuals(jacobians: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """max |J^T omega J - omega| for each stacked Jacobian."""
    prod = np.einsum("pki,kl,plj->pij", jacobians, omega, jacobians)
    return np.abs(prod - omega).reshape(len(jacobians), -1).max(axis=1)


def is_symplectomorphism(phi, chart: DarbouxChart, samples=100, tol: float = 1e-9, g=(), det_floor: float = 1e-12) -> CheckReport:
    """Sampled residual of J^T omega J = omega for a map of the chart to itself.

    ``phi`` is a sequence of 2n expressions over the chart variables or any map
    object with ``jacobians``.  Points with |det J| below ``det_floor`` are
    flagged as singular and reported, not skipped silently.
    """
    m = as_map(phi, chart)
    pts = _as_samples(chart, samples)
    J = m.jacobians(pts, g)
    res = symplectic_residuals(J, chart.omega)
    dets = np.linalg.det(J)
    singular = np.flatnonzero(np.abs(dets) < det_floor).tolist()
    worst = float(res.max()) if len(res) else 0.0
    if singular:
        worst = max(worst, math.inf)
    return _report("symplectomorphism", worst, tol, len(pts), singular_points=singular)


def pullback_form_residual(phi, form: Sequence[Expr], chart: DarbouxChart, samples=100, tol: float = 1e-9, g=()) -> CheckReport:
    """Sampled residual of phi^* alpha - alpha, componentwise.

    (phi^* alpha)_j(z) = sum_k alpha_k(phi(z)) * d phi_k / d z_j.
    """
    m = as_map(phi, chart)
    pts = _as_samples(chart, samples)
    form_prog = compile_exprs(list(form), chart.variables)
    images = m.values(pts, g)
    J = m.jacobians(pts, g)
    alpha_img = form_prog.batch(images)
    pulled = np.einsum("pk,pkj->pj", alpha_img, J)
    diff = np.abs(pulled - form_prog.batch(pts))
    worst = float(diff.max()) if diff.size else 0.0
    return _report("pullback_form", worst, tol, len(pts))
