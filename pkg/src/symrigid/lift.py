"""Group actions on base charts and their cotangent lifts.

Groups are abelian and written additively in their parameters: a product of
circle factors (parameter mod 2pi) and real-line factors.  The identity is the
zero parameter and composition is addition, which covers circles, tori, real
lines and their products.

Fundamental fields follow the exp(-tX) convention,
``X^# = d/dt rho_hat(exp(-tX))|_{t=0} = -d rho_hat / d g_j |_{g=0}``, and lifted
charts carry the canonical form ``omega = d(sum y dx)`` (``omega_sign=-1``), so
that the moment map ``mu_j = lambda(X_j^#)`` satisfies ``iota_{X^#} omega = -d mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from symrigid import expr as E
from symrigid.errors import ActionAxiomViolated, NonInvertibleJacobian
from symrigid.expr import Expr, compile_exprs
from symrigid.symplectic import (
    CheckReport,
    DarbouxChart,
    ExprMap,
    VectorFieldExpr,
    _report,
    is_symplectomorphism,
    liouville_form,
    pullback_form_residual,
    sample_points,
)

TWO_PI = 2.0 * math.pi
SYMBOLIC_INVERSE_MAX_DIM = 4


@dataclass(frozen=True)
class GroupSpec:
    """Abelian group as a product of ``"circle"`` and ``"line"`` factors."""

    factors: tuple[str, ...]
    params: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "params", tuple(self.params))
        if len(self.factors) != len(self.params) or not self.factors:
            raise ValueError("group needs one parameter name per factor")
        bad = set(self.factors) - {"circle", "line"}
        if bad:
            raise ValueError(f"unknown group factors {sorted(bad)}")
        if len(set(self.params)) != len(self.params):
            raise ValueError("group parameter names must be distinct")

    @classmethod
    def circle(cls, param: str = "theta") -> "GroupSpec":
        return cls(("circle",), (param,))

    @classmethod
    def torus(cls, d: int, prefix: str = "theta") -> "GroupSpec":
        return cls(("circle",) * d, tuple(f"{prefix}{i + 1}" for i in range(d)))

    @classmethod
    def line(cls, d: int = 1, prefix: str = "t") -> "GroupSpec":
        names = (prefix,) if d == 1 else tuple(f"{prefix}{i + 1}" for i in range(d))
        return cls(("line",) * d, names)

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def compact(self) -> bool:
        return all(f == "circle" for f in self.factors)

    @property
    def periodic_mask(self) -> np.ndarray:
        return np.array([f == "circle" for f in self.factors])

    def describe(self) -> str:
        kinds = {"circle": "S1", "line": "R"}
        return " x ".join(kinds[f] for f in self.factors)

    def sample(self, count: int, rng: np.random.Generator, line_box: float = 1.0) -> np.ndarray:
        g = rng.uniform(-line_box, line_box, size=(count, self.dim))
        mask = self.periodic_mask
        g[:, mask] = rng.uniform(0.0, TWO_PI, size=(count, int(mask.sum())))
        return g

    def compose(self, g, h) -> np.ndarray:
        return np.asarray(g, dtype=np.float64) + np.asarray(h, dtype=np.float64)

    def inverse(self, g) -> np.ndarray:
        return -np.asarray(g, dtype=np.float64)


def wrap_difference(d: np.ndarray, periodic: np.ndarray) -> np.ndarray:
    """Differences with periodic columns reduced to [-pi, pi)."""
    d = np.array(d, dtype=np.float64, copy=True)
    if periodic.any():
        d[..., periodic] = np.mod(d[..., periodic] + math.pi, TWO_PI) - math.pi
    return d


@dataclass(frozen=True)
class ActionSpec:
    """Action rho: G x M -> M on a base chart with positions ``base``."""

    group: GroupSpec
    base: tuple[str, ...]
    components: tuple[Expr, ...]
    periodic: frozenset[str] = frozenset()
    name: str = "rho"

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(self.base))
        object.__setattr__(self, "periodic", frozenset(self.periodic))
        comps = tuple(E.as_expr(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != len(self.base):
            raise ValueError(f"action {self.name} needs {len(self.base)} components, got {len(comps)}")
        allowed = set(self.base) | set(self.group.params)
        for i, c in enumerate(comps):
            extra = c.free_vars() - allowed
            if extra:
                raise ValueError(f"action {self.name} component {i + 1} uses unknown names {sorted(extra)}")
        if set(self.base) & set(self.group.params):
            raise ValueError("base and parameter names overlap")

    @property
    def m(self) -> int:
        return len(self.base)

    @property
    def periodic_mask(self) -> np.ndarray:
        return np.array([v in self.periodic for v in self.base])

    def map(self) -> ExprMap:
        return _cached_map(self)

    def apply(self, Q, g) -> np.ndarray:
        return self.map().values(Q, g)

    def sample_base(self, count: int, rng: np.random.Generator, box: float = 1.0) -> np.ndarray:
        pts = rng.uniform(-box, box, size=(count, self.m))
        mask = self.periodic_mask
        pts[:, mask] = rng.uniform(0.0, TWO_PI, size=(count, int(mask.sum())))
        return pts


_MAP_CACHE: dict[int, tuple[object, ExprMap]] = {}


def _cached_map(action) -> ExprMap:
    # ActionSpec is frozen; keep compiled programs alongside without mutating it
    hit = _MAP_CACHE.get(id(action))
    if hit is not None and hit[0] is action:
        return hit[1]
    m = ExprMap(action.components, action.base, action.group.params)
    _MAP_CACHE[id(action)] = (action, m)
    return m


@dataclass
class AxiomReport:
    identity: CheckReport
    composition: CheckReport

    @property
    def passed(self) -> bool:
        return self.identity.passed and self.composition.passed


def check_action_axioms(
    action: ActionSpec,
    samples: int = 32,
    seed: int = 0,
    tol_identity: float = 1e-10,
    tol_composition: float = 1e-9,
    box: float = 1.0,
    raise_on_fail: bool = False,
) -> AxiomReport:
    """Sampled residuals of rho(0) = id and rho(g) o rho(h) = rho(g + h)."""
    rng = np.random.default_rng(seed)
    grp = action.group
    mask = action.periodic_mask
    Q = action.sample_base(samples, rng, box)
    zero = np.zeros(grp.dim)
    ident = np.abs(wrap_difference(action.apply(Q, zero) - Q, mask)).max()
    G = grp.sample(samples, rng)
    Hh = grp.sample(samples, rng)
    worst = 0.0
    for g, h, q in zip(G, Hh, Q):
        lhs = action.apply(action.apply(q, h), g)
        rhs = action.apply(q, grp.compose(g, h))
        worst = max(worst, float(np.abs(wrap_difference(lhs - rhs, mask)).max()))
    rep = AxiomReport(
        _report("action_identity", ident, tol_identity, samples),
        _report("action_composition", worst, tol_composition, samples),
    )
    if raise_on_fail and not rep.passed:
        raise ActionAxiomViolated(
            f"action {action.name}: identity residual {rep.identity.residual:.3e}, "
            f"composition residual {rep.composition.residual:.3e}"
        )
    return rep


# ---------------------------------------------------------------------------
# inverse-transpose Jacobians


def _minor(M: list[list[Expr]], i: int, j: int) -> list[list[Expr]]:
    return [row[:j] + row[j + 1 :] for r, row in enumerate(M) if r != i]


def symbolic_det(M: list[list[Expr]]) -> Expr:
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    terms = []
    for j in range(n):
        if isinstance(M[0][j], E.Const) and M[0][j].value == 0.0:
            continue
        t = M[0][j] * symbolic_det(_minor(M, 0, j))
        terms.append(t if j % 2 == 0 else -t)
    return E.total(terms)


def symbolic_cofactors(M: list[list[Expr]]) -> list[list[Expr]]:
    n = len(M)
    if n == 1:
        return [[E.ONE]]
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            d = symbolic_det(_minor(M, i, j))
            row.append(d if (i + j) % 2 == 0 else -d)
        out.append(row)
    return out


def default_momentum_names(base: Sequence[str]) -> tuple[str, ...]:
    out = []
    for v in base:
        if v.startswith("q"):
            out.append("p" + v[1:])
        elif v.startswith("x"):
            out.append("y" + v[1:])
        else:
            out.append("p_" + v)
    return tuple(out)


class CotangentLiftMap:
    """Numerical cotangent lift (q, p) -> (phi(q), Dphi(q)^{-T} p) of a base map.

    ``base`` must provide ``values``, ``jacobians`` and ``second_derivatives``
    (all taking the optional group parameter ``g``).  The Jacobian of the lift
    is assembled analytically:

        [[Dphi, 0], [-Dphi^{-T} (d_j Dphi)^T Dphi^{-T} p, Dphi^{-T}]]
    """

    def __init__(self, base, m: int, det_floor: float = 1e-12):
        self.base = base
        self.m = m
        self.det_floor = det_floor

    @property
    def dim_out(self) -> int:
        return 2 * self.m

    def _split(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        return Z[:, : self.m], Z[:, self.m :]

    def _inv_t(self, D: np.ndarray) -> np.ndarray:
        det = np.linalg.det(D)
        bad = np.flatnonzero(np.abs(det) < self.det_floor)
        if bad.size:
            raise NonInvertibleJacobian(f"base Jacobian singular at sample {int(bad[0])}", int(bad[0]))
        return np.linalg.inv(D).transpose(0, 2, 1)

    def values(self, Z, g=()) -> np.ndarray:
        Q, P = self._split(Z)
        Dit = self._inv_t(self.base.jacobians(Q, g))
        return np.hstack([self.base.values(Q, g), np.einsum("pij,pj->pi", Dit, P)])

    def jacobians(self, Z, g=()) -> np.ndarray:
        Q, P = self._split(Z)
        m = self.m
        D = self.base.jacobians(Q, g)
        Dit = self._inv_t(D)
        D2 = self.base.second_derivatives(Q, g)  # (P, m, m, m): d^2 phi_i / dq_j dq_k
        w = np.einsum("pij,pj->pi", Dit, P)  # Dphi^{-T} p
        # column k of the lower-left block: -Dit @ (d_k Dphi)^T @ w
        dDT_w = np.einsum("pijk,pi->pjk", D2, w)  # [(d_k Dphi)^T w]_j
        lower_left = -np.einsum("pij,pjk->pik", Dit, dDT_w)
        out = np.zeros((len(Q), 2 * m, 2 * m))
        out[:, :m, :m] = D
        out[:, m:, :m] = lower_left
        out[:, m:, m:] = Dit
        return out


@dataclass
class LiftedAction:
    source: ActionSpec
    chart: DarbouxChart
    components: tuple[Expr, ...] | None
    symbolic: bool
    _map: object = field(default=None, repr=False)

    @property
    def params(self) -> tuple[str, ...]:
        return self.source.group.params

    @property
    def group(self) -> GroupSpec:
        return self.source.group

    def map(self):
        if self._map is None:
            if self.components is not None:
                self._map = ExprMap(self.components, self.chart.variables, self.params)
            else:
                self._map = CotangentLiftMap(self.source.map(), self.source.m)
        return self._map

    def apply(self, Z, g) -> np.ndarray:
        return self.map().values(Z, g)

    def base_projection_ok(self) -> bool:
        """The first m components do not involve momenta (the lift covers rho)."""
        if self.components is None:
            return True
        mom = set(self.chart.momenta)
        return all(not (c.free_vars() & mom) for c in self.components[: self.source.m])


def cotangent_lift(action: ActionSpec, momenta: Sequence[str] | None = None, check_samples: int = 32, seed: int = 0) -> LiftedAction:
    """Lift rho to T*M: (q, p) -> (rho_g(q), (D rho_g(q))^{-T} p).

    The momentum block is built symbolically from the adjugate for m <= 4 and
    evaluated numerically above that.  The Jacobian determinant is checked at
    sampled (g, q); a vanishing one raises :class:`NonInvertibleJacobian`.
    """
    m = action.m
    momenta = tuple(momenta) if momenta else default_momentum_names(action.base)
    chart = DarbouxChart(action.base, momenta, action.periodic, omega_sign=-1)
    rng = np.random.default_rng(seed)
    Q = action.sample_base(check_samples, rng)
    G = action.group.sample(check_samples, rng)
    base_map = action.map()
    for q, g in zip(Q, G):
        det = np.linalg.det(base_map.jacobians(q, g)[0])
        if not abs(det) > 1e-12:
            raise NonInvertibleJacobian(f"D rho singular at q={q.tolist()}, g={g.tolist()}", (q.tolist(), g.tolist()))
    if m > SYMBOLIC_INVERSE_MAX_DIM:
        return LiftedAction(action, chart, None, False)
    J = E.jacobian(action.components, action.base)
    det = symbolic_det(J)
    cof = symbolic_cofactors(J)
    # (J^{-T} p)_i = sum_j (J^{-1})_{ji} p_j = sum_j cof_{ij} p_j / det
    inv_det = E.power(det, -1)
    P = [E.var(p) for p in momenta]
    mom = [E.mul(E.total(E.mul(cof[i][j], P[j]) for j in range(m)), inv_det) for i in range(m)]
    return LiftedAction(action, chart, tuple(action.components) + tuple(mom), True)


def lift_from_components(action: ActionSpec, components: Sequence[Expr], momenta: Sequence[str] | None = None) -> LiftedAction:
    """Wrap a user-supplied lifted map (no construction), e.g. to test a hand-written one."""
    momenta = tuple(momenta) if momenta else default_momentum_names(action.base)
    chart = DarbouxChart(action.base, momenta, action.periodic, omega_sign=-1)
    comps = tuple(E.as_expr(c) for c in components)
    if len(comps) != 2 * action.m:
        raise ValueError(f"lifted map needs {2 * action.m} components")
    return LiftedAction(action, chart, comps, True)


# ---------------------------------------------------------------------------
# fundamental fields and moment maps


def fundamental_vector_field(lifted: LiftedAction, direction: int | str = 0) -> VectorFieldExpr:
    """X^# = d/dt rho_hat(exp(-t X_j))|_{t=0} for the j-th parameter direction."""
    params = lifted.params
    j = params.index(direction) if isinstance(direction, str) else int(direction)
    pj = params[j]
    at_identity = {p: 0.0 for p in params}
    if lifted.components is not None:
        comps = [E.neg(E.diff(c, pj)).subs(at_identity) for c in lifted.components]
    else:
        # with D rho_0 = I: d/dg (D rho^{-T} p) = -(d/dg D rho)^T p
        action = lifted.source
        base = [E.neg(E.diff(c, pj)).subs(at_identity) for c in action.components]
        dJ = [[E.diff(E.diff(c, v), pj).subs(at_identity) for v in action.base] for c in action.components]
        P = [E.var(p) for p in lifted.chart.momenta]
        mom = [E.total(E.mul(dJ[i][k], P[i]) for i in range(action.m)) for k in range(action.m)]
        comps = base + mom
    return VectorFieldExpr(lifted.chart, tuple(comps))


def moment_map_of_lift(lifted: LiftedAction) -> list[Expr]:
    """mu_j = lambda(X_j^#) = sum_i y_i (X_j^#)^{x_i}, one per parameter direction."""
    m = lifted.source.m
    out = []
    for j in range(lifted.group.dim):
        X = fundamental_vector_field(lifted, j)
        out.append(E.total(E.mul(E.var(y), X.components[i]) for i, y in enumerate(lifted.chart.momenta[:m])))
    return out


# ---------------------------------------------------------------------------
# verification


@dataclass
class LiftInvarianceReport:
    lambda_check: CheckReport
    symplectic_check: CheckReport
    param_samples: int
    point_samples: int

    @property
    def passed(self) -> bool:
        return self.lambda_check.passed and self.symplectic_check.passed

    def to_dict(self) -> dict:
        return {
            "checks": [self.lambda_check.to_dict(), self.symplectic_check.to_dict()],
            "param_samples": self.param_samples,
            "point_samples": self.point_samples,
            "passed": self.passed,
        }


def verify_lift_invariance(
    lifted: LiftedAction,
    param_samples: int = 32,
    point_samples: int = 64,
    tol: float = 1e-9,
    seed: int = 0,
    box: float = 1.0,
) -> LiftInvarianceReport:
    """Pullback of lambda and of omega under rho_hat_g for sampled g."""
    rng = np.random.default_rng(seed)
    G = lifted.group.sample(param_samples, rng)
    Z = sample_points(lifted.chart, point_samples, box=box, seed=seed + 1)
    lam = liouville_form(lifted.chart)
    fmap = lifted.map()
    lam_worst = sym_worst = 0.0
    singular = []
    for g in G:
        r1 = pullback_form_residual(fmap, lam, lifted.chart, Z, tol, g=g)
        r2 = is_symplectomorphism(fmap, lifted.chart, Z, tol, g=g)
        lam_worst = max(lam_worst, r1.residual)
        sym_worst = max(sym_worst, r2.residual)
        singular.extend(r2.details.get("singular_points", []))
    n = param_samples * point_samples
    return LiftInvarianceReport(
        _report("lambda_pullback", lam_worst, tol, n),
        _report("symplectic", sym_worst, tol, n, **({"singular_points": singular} if singular else {})),
        param_samples,
        point_samples,
    )


def hamiltonian_closure_residual(lifted: LiftedAction, samples: int = 500, tol: float = 1e-9, seed: int = 0, box: float = 1.0) -> CheckReport:
    """sup |iota_{X^#} omega + d mu| over samples and all parameter directions."""
    chart = lifted.chart
    Z = sample_points(chart, samples, box=box, seed=seed)
    mus = moment_map_of_lift(lifted)
    om = chart.omega
    worst = 0.0
    for j, mu in enumerate(mus):
        X = fundamental_vector_field(lifted, j).program().batch(Z)
        dmu = compile_exprs(E.gradient(mu, chart.variables), chart.variables).batch(Z)
        # (iota_X omega)(v) = X^T omega v
        worst = max(worst, float(np.abs(X @ om + dmu).max()))
    return _report("hamiltonian_closure", worst, tol, samples)


def moment_map_invariance_residual(lifted: LiftedAction, param_samples: int = 16, point_samples: int = 64, tol: float = 1e-9, seed: int = 0) -> CheckReport:
    """sup |mu(rho_hat_g z) - mu(z)| (abelian groups: mu is invariant)."""
    chart = lifted.chart
    rng = np.random.default_rng(seed)
    G = lifted.group.sample(param_samples, rng)
    Z = sample_points(chart, point_samples, seed=seed + 1)
    prog = compile_exprs(moment_map_of_lift(lifted), chart.variables)
    base = prog.batch(Z)
    worst = 0.0
    for g in G:
        worst = max(worst, float(np.abs(prog.batch(lifted.apply(Z, g)) - base).max()))
    return _report("moment_map_invariance", worst, tol, param_samples * point_samples)


def lift_functoriality_residual(lifted: LiftedAction, samples: int = 32, tol: float = 1e-9, seed: int = 0) -> CheckReport:
    """sup |rho_hat_g(rho_hat_h z) - rho_hat_{g+h}(z)|, periodic positions compared mod 2pi."""
    chart = lifted.chart
    rng = np.random.default_rng(seed)
    grp = lifted.group
    G, Hh = grp.sample(samples, rng), grp.sample(samples, rng)
    Z = sample_points(chart, samples, seed=seed + 1)
    mask = chart.periodic_mask
    worst = 0.0
    for g, h, z in zip(G, Hh, Z):
        lhs = lifted.apply(lifted.apply(z, h), g)
        rhs = lifted.apply(z, grp.compose(g, h))
        worst = max(worst, float(np.abs(wrap_difference(lhs - rhs, mask)).max()))
    return _report("lift_functoriality", worst, tol, samples)


# ---------------------------------------------------------------------------
# built-in actions


def hyperbolic_action() -> ActionSpec:
    """(R, +) acting on R by q -> e^{-t} q."""
    q, t = E.symbols("q t")
    return ActionSpec(GroupSpec.line(1), ("q",), (E.exp(-t) * q,), name="hyperbolic")


def rotation_dilation_action() -> ActionSpec:
    """S^1 x R on R^2: e^{-t} R(theta) with R(theta) = [[cos, sin], [-sin, cos]]."""
    x1, x2, th, t = E.symbols("x1 x2 theta t")
    s = E.exp(-t)
    comps = (s * (x1 * E.cos(th) + x2 * E.sin(th)), s * (-x1 * E.sin(th) + x2 * E.cos(th)))
    return ActionSpec(GroupSpec(("circle", "line"), ("theta", "t")), ("x1", "x2"), comps, name="rotation_dilation")


def rotation_action() -> ActionSpec:
    x1, x2, th = E.symbols("x1 x2 theta")
    comps = (x1 * E.cos(th) + x2 * E.sin(th), -x1 * E.sin(th) + x2 * E.cos(th))
    return ActionSpec(GroupSpec.circle("theta"), ("x1", "x2"), comps, name="rotation")


def torus_translation_action(n: int = 1) -> ActionSpec:
    if n == 1:
        q, th = E.symbols("q theta")
        return ActionSpec(GroupSpec.circle("theta"), ("q",), (q + th,), periodic={"q"}, name="translation")
    grp = GroupSpec.torus(n)
    base = tuple(f"q{i + 1}" for i in range(n))
    comps = tuple(E.var(b) + E.var(p) for b, p in zip(base, grp.params))
    return ActionSpec(grp, base, comps, periodic=set(base), name="translation")


def line_translation_action(n: int = 1) -> ActionSpec:
    grp = GroupSpec.line(n)
    base = ("q",) if n == 1 else tuple(f"q{i + 1}" for i in range(n))
    comps = tuple(E.var(b) + E.var(p) for b, p in zip(base, grp.params))
    return ActionSpec(grp, base, comps, name="line_translation")


def conjugate_action(action: ActionSpec, h: Sequence[Expr], h_inverse: Sequence[Expr], name: str | None = None) -> ActionSpec:
    """h o rho_g o h^{-1}, with h and h^{-1} given as expressions over the base variables."""
    inv_sub = {v: e for v, e in zip(action.base, h_inverse)}
    inner = [c.subs(inv_sub) for c in action.components]
    outer = [E.as_expr(hc).subs({v: e for v, e in zip(action.base, inner)}) for hc in h]
    return ActionSpec(action.group, action.base, tuple(outer), action.periodic, name or f"{action.name}_conj")


def _sum_terms(e: Expr) -> list[Expr]:
    out, todo = [], [e]
    while todo:
        node = todo.pop()
        if isinstance(node, E.Add):
            todo += [node.right, node.left]
        else:
            out.append(node)
    return out


def displacement(h: Sequence[Expr], base: Sequence[str]) -> list[Expr]:
    """h - id, cancelling a literal ``+ q_i`` term when present.

    Keeping a single occurrence of each coordinate matters for
    :func:`fixed_point_inverse`: every extra occurrence multiplies the size of
    the nested expression at each iteration.
    """
    out = []
    for hc, v in zip(h, base):
        terms = _sum_terms(E.as_expr(hc))
        hit = next((i for i, t in enumerate(terms) if isinstance(t, E.Var) and t.name == v), None)
        if hit is None:
            out.append(E.as_expr(hc) - E.var(v))
        else:
            out.append(E.total(terms[:hit] + terms[hit + 1 :]))
    return out


def fixed_point_inverse(h_minus_id: Sequence[Expr], base: Sequence[str], iterations: int = 20) -> list[Expr]:
    """Closed-form approximate inverse of h(q) = q + delta(q) by iterating u <- q - delta(u).

    Converges geometrically when delta is a contraction; ``iterations`` nested
    substitutions give an expression accurate to roughly Lip(delta)^iterations.
    """
    u = [E.var(v) for v in base]
    for _ in range(iterations):
        sub = dict(zip(base, u))
        u = [E.var(v) - d.subs(sub) for v, d in zip(base, h_minus_id)]
    return u
