"""Conjugating close compact-group actions by group averaging.

Given actions rho_1, rho_2 of a compact abelian group on the same base, the
averaged map

    phi(x) = center of mass over quadrature nodes g of rho_1(g)^{-1}(rho_2(g)(x))

satisfies rho_1(h) o phi = phi o rho_2(h) exactly for every node h, because the
node set is a subgroup and the uniform weights are invariant under
translation.  The center of mass is the Euclidean mean on R^m and the
per-coordinate circular mean on periodic coordinates.  The cotangent lift of
phi then conjugates the lifted actions and their moment maps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

from symrigid import expr as E
from symrigid import kernels
from symrigid.errors import CloudTooSpread, HypothesisViolated, NonCompactLevel, NonInvertibleJacobian, NotClose
from symrigid.expr import Expr, compile_exprs
from symrigid.flows import trace_level_loop
from symrigid.lift import (
    TWO_PI,
    ActionSpec,
    CotangentLiftMap,
    GroupSpec,
    cotangent_lift,
    moment_map_of_lift,
    wrap_difference,
)
from symrigid.singularity import classify_point
from symrigid.symplectic import (
    CheckReport,
    DarbouxChart,
    ExprMap,
    MomentMapSystem,
    _report,
    hamiltonian_vector_field,
    is_symplectomorphism,
    sample_points,
    symplectic_residuals,
)

AVERAGING_FORMULA = "phi(x) = mean_g rho1(-g)(rho2(g)(x)); circular mean on periodic coordinates"


@dataclass(frozen=True)
class GroupQuadrature:
    """Uniform product grid on a torus; nodes form a finite subgroup."""

    group: GroupSpec
    n: int

    def __post_init__(self):
        if not self.group.compact:
            raise ValueError(f"averaging needs a compact group, got {self.group.describe()}")
        if self.n < 1:
            raise ValueError("quadrature needs at least one node per factor")

    @property
    def nodes(self) -> np.ndarray:
        axis = TWO_PI * np.arange(self.n) / self.n
        return np.array(list(itertools.product(axis, repeat=self.group.dim)))

    @property
    def weights(self) -> np.ndarray:
        k = self.n**self.group.dim
        return np.full(k, 1.0 / k)


def _second_chain(D1, D2_1, D2, D2_2):
    """Second derivatives of z = a(b(x)) given Da, D^2a at b(x) and Db, D^2b at x.

    Shapes: D1 (P,m,m), D2_1 (P,m,m,m), D2 (P,m,m), D2_2 (P,m,m,m).
    """
    return np.einsum("piab,paj,pbk->pijk", D2_1, D2, D2) + np.einsum("pia,pajk->pijk", D1, D2_2)


class AveragedMap:
    """The averaged map phi with analytic first and second derivatives.

    ``values``, ``jacobians`` and ``second_derivatives`` follow the map
    protocol used by :mod:`symrigid.symplectic` (the optional ``g`` is
    ignored).  Work is chunked so that points x nodes stays bounded.
    """

    def __init__(self, rho1: ActionSpec, rho2: ActionSpec, quad: GroupQuadrature, chunk_rows: int = 1 << 18):
        if rho1.group.factors != rho2.group.factors or rho1.base != rho2.base:
            raise ValueError("both actions must share the group and the base chart")
        self.rho1, self.rho2, self.quad = rho1, rho2, quad
        self.m = rho1.m
        self.periodic = rho1.periodic_mask
        self.nodes = quad.nodes
        self.w = quad.weights
        self.chunk_rows = chunk_rows
        self._m1, self._m2 = rho1.map(), rho2.map()

    @property
    def dim_out(self) -> int:
        return self.m

    def _cloud(self, X: np.ndarray, order: int):
        """Cloud points z_g(x) and their derivatives for a block of points."""
        P, K, m = len(X), len(self.nodes), self.m
        Xr = np.repeat(X, K, axis=0)
        G = np.tile(self.nodes, (P, 1))
        Y = self._m2.values(Xr, G)
        Z = self._m1.values(Y, -G).reshape(P, K, m)
        if order == 0:
            return Z, None, None
        D2 = self._m2.jacobians(Xr, G)
        D1 = self._m1.jacobians(Y, -G)
        DZ = np.einsum("pij,pjk->pik", D1, D2)
        if order == 1:
            return Z, DZ.reshape(P, K, m, m), None
        H2 = self._m2.second_derivatives(Xr, G)
        H1 = self._m1.second_derivatives(Y, -G)
        HZ = _second_chain(D1, H1, D2, H2)
        return Z, DZ.reshape(P, K, m, m), HZ.reshape(P, K, m, m, m)

    def _blocks(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        step = max(1, self.chunk_rows // max(1, len(self.nodes)))
        for i in range(0, len(X), step):
            yield i, X[i : i + step]

    def _mean(self, X: np.ndarray, order: int):
        val = np.empty((len(X), self.m))
        jac = np.empty((len(X), self.m, self.m)) if order >= 1 else None
        hes = np.empty((len(X), self.m, self.m, self.m)) if order >= 2 else None
        w = self.w
        for i, Xb in self._blocks(X):
            Z, DZ, HZ = self._cloud(Xb, order)
            sl = slice(i, i + len(Xb))
            eu = ~self.periodic
            if eu.any():
                val[sl][:, eu] = np.einsum("k,pki->pi", w, Z[:, :, eu])
                if order >= 1:
                    jac[sl][:, eu] = np.einsum("k,pkij->pij", w, DZ[:, :, eu])
                if order >= 2:
                    hes[sl][:, eu] = np.einsum("k,pkijl->pijl", w, HZ[:, :, eu])
            for c in np.flatnonzero(self.periodic):
                self._circular(Xb, Z, DZ, HZ, c, order, val[sl], None if jac is None else jac[sl], None if hes is None else hes[sl])
        return val, jac, hes

    def _circular(self, Xb, Z, DZ, HZ, c, order, val, jac, hes):
        w = self.w
        th = Z[:, :, c]
        e = np.exp(1j * th)
        S = e @ w  # Z = sum w e^{i theta}
        if np.any(np.abs(S) < 1e-12):
            raise CloudTooSpread("circular mean undefined (resultant vanishes)")
        a = np.angle(S)
        # the cloud must lie in an open half circle: some gap between sorted angles exceeds pi
        srt = np.sort(np.mod(th, TWO_PI), axis=1)
        gaps = np.diff(np.concatenate([srt, srt[:, :1] + TWO_PI], axis=1), axis=1)
        spread = gaps.max(axis=1) <= math.pi
        if spread.any():
            bad = int(np.flatnonzero(spread)[0])
            raise CloudTooSpread(f"cloud over the nodes is not inside an open half circle at x = {Xb[bad].tolist()}")
        # continuous branch near the input coordinate
        val[:, c] = Xb[:, c] + np.angle(np.exp(1j * (a - Xb[:, c])))
        if order >= 1:
            dth = DZ[:, :, c, :]  # (P, K, m)
            Sj = np.einsum("k,pk,pkj->pj", w, 1j * e, dth)
            jac[:, c, :] = np.imag(Sj / S[:, None])
        if order >= 2:
            d2 = HZ[:, :, c, :, :]
            Sjk = np.einsum("k,pk,pkjl->pjl", w, e, 1j * d2 - np.einsum("pkj,pkl->pkjl", dth, dth))
            hes[:, c, :, :] = np.imag(Sjk / S[:, None, None] - np.einsum("pj,pl->pjl", Sj, Sj) / (S**2)[:, None, None])

    def values(self, X, g=()) -> np.ndarray:
        return self._mean(np.atleast_2d(X), 0)[0]

    def jacobians(self, X, g=()) -> np.ndarray:
        return self._mean(np.atleast_2d(X), 1)[1]

    def second_derivatives(self, X, g=()) -> np.ndarray:
        return self._mean(np.atleast_2d(X), 2)[2]


@dataclass
class ConjugationResult:
    """Averaged (or supplied) conjugacy with its residual checks.

    Residuals are sups over sampled (g, x).  ``jacobian_constant`` is the
    largest sampled norm of the lifted Jacobians, the factor relating base and
    lifted conjugation residuals.
    """

    phi: Any
    phi_hat: Any = None
    quad_n: int | None = None
    checks: list[CheckReport] = field(default_factory=list)
    det_min: float | None = None
    det_threshold: float = 1e-8
    closeness: dict[str, float] = field(default_factory=dict)
    jacobian_constant: float | None = None
    formula: str = AVERAGING_FORMULA

    def check(self, name: str) -> CheckReport | None:
        return next((c for c in self.checks if c.name == name), None)

    def _residual(self, name):
        c = self.check(name)
        return None if c is None else c.residual

    @property
    def residual_conj(self) -> float | None:
        return self._residual("conjugation_base")

    @property
    def residual_conj_lifted(self) -> float | None:
        return self._residual("conjugation_lifted")

    @property
    def residual_sympl(self) -> float | None:
        return self._residual("lift_symplectic")

    @property
    def residual_moment(self) -> float | None:
        return self._residual("moment_map_match")

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "formula": self.formula,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
        }
        if self.quad_n is not None:
            out["quad_n"] = self.quad_n
        if self.det_min is not None:
            out["jacobian_det_min"] = {"value": self.det_min, "threshold": self.det_threshold}
        if self.closeness:
            out["closeness"] = dict(self.closeness)
        if self.jacobian_constant is not None:
            out["lifted_jacobian_constant"] = self.jacobian_constant
        return out


def sample_base_domain(action: ActionSpec, count: int, domain: float, seed: int) -> np.ndarray:
    """Periodic coordinates uniform on [0, 2pi); the rest uniform in the ball of radius ``domain``."""
    rng = np.random.default_rng(seed)
    m = action.m
    mask = action.periodic_mask
    X = np.empty((count, m))
    X[:, mask] = rng.uniform(0.0, TWO_PI, size=(count, int(mask.sum())))
    k = int((~mask).sum())
    if k:
        v = rng.standard_normal((count, k))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        r = domain * rng.uniform(0.0, 1.0, count) ** (1.0 / k)
        X[:, ~mask] = v * r[:, None]
    return X


def action_distance(rho1: ActionSpec, rho2: ActionSpec, samples: int = 64, domain: float = 1.0, seed: int = 0) -> dict[str, float]:
    """Sampled C^0 and C^1 distances between rho1(g) and rho2(g)."""
    rng = np.random.default_rng(seed)
    X = sample_base_domain(rho1, samples, domain, seed)
    G = rho1.group.sample(samples, rng)
    m1, m2 = rho1.map(), rho2.map()
    c0 = np.abs(wrap_difference(m1.values(X, G) - m2.values(X, G), rho1.periodic_mask)).max()
    c1 = np.abs(m1.jacobians(X, G) - m2.jacobians(X, G)).max()
    return {"c0": float(c0), "c1": float(c1)}


def conjugation_residual(rho1: ActionSpec, rho2: ActionSpec, phi, X: np.ndarray, G: np.ndarray) -> float:
    """sup |rho1(g)(phi(x)) - phi(rho2(g)(x))| over paired rows of X and G."""
    lhs = rho1.map().values(phi.values(X), G)
    rhs = phi.values(rho2.map().values(X, G))
    return float(np.abs(wrap_difference(lhs - rhs, rho1.periodic_mask)).max())


def node_equivariance_residual(avg: AveragedMap, X: np.ndarray, nodes: np.ndarray | None = None) -> float:
    """Equivariance at quadrature nodes, where it holds by reindexing the sum."""
    nodes = avg.nodes if nodes is None else nodes
    K, P = len(nodes), len(X)
    Xr = np.repeat(X, K, axis=0)
    G = np.tile(nodes, (P, 1))
    return conjugation_residual(avg.rho1, avg.rho2, avg, Xr, G)


def palais_average(
    rho1: ActionSpec,
    rho2: ActionSpec,
    quad: GroupQuadrature | int,
    domain: float = 1.0,
    *,
    closeness: float = 0.2,
    samples: int = 200,
    det_threshold: float = 1e-8,
    seed: int = 0,
) -> ConjugationResult:
    """Average rho1(g)^{-1} o rho2(g) over the quadrature nodes.

    Refuses (:class:`NotClose`) when the sampled C^0 distance between the
    actions exceeds ``closeness``.  Fills the base conjugation residual at
    random (g, x) and checks the Jacobian determinant of phi on the domain.
    """
    if isinstance(quad, int):
        quad = GroupQuadrature(rho1.group, quad)
    dist = action_distance(rho1, rho2, domain=domain, seed=seed)
    if dist["c0"] > closeness:
        raise NotClose(f"sampled C0 distance {dist['c0']:.3f} exceeds the closeness bound {closeness}")
    avg = AveragedMap(rho1, rho2, quad)
    rng = np.random.default_rng(seed + 1)
    X = sample_base_domain(rho1, samples, domain, seed + 2)
    G = rho1.group.sample(samples, rng)
    res = conjugation_residual(rho1, rho2, avg, X, G)
    dets = np.linalg.det(avg.jacobians(X))
    det_min = float(np.abs(dets).min())
    if det_min < det_threshold:
        raise NonInvertibleJacobian(f"averaged map has |det D phi| = {det_min:.3e} < {det_threshold}")
    return ConjugationResult(
        phi=avg,
        quad_n=quad.n,
        checks=[_report("conjugation_base", res, math.inf, samples)],
        det_min=det_min,
        det_threshold=det_threshold,
        closeness={"c0": dist["c0"], "c1": dist["c1"], "bound": closeness},
    )


def lift_conjugation(phi, m: int | None = None) -> CotangentLiftMap:
    """phi_hat(q, p) = (phi(q), D phi(q)^{-T} p)."""
    if m is None:
        m = phi.dim_out
    return CotangentLiftMap(phi, m)


def as_base_map(phi, action: ActionSpec):
    if hasattr(phi, "jacobians"):
        return phi
    return ExprMap(list(phi), action.base)


def verify_equivalence_suite(
    rho1: ActionSpec,
    rho2: ActionSpec,
    phi,
    *,
    samples: int = 1000,
    domain: float = 1.0,
    momentum_box: float = 1.0,
    tol: float = 1e-6,
    tol_sympl: float = 1e-8,
    seed: int = 0,
    result: ConjugationResult | None = None,
) -> ConjugationResult:
    """Base and lifted conjugation, symplecticity of phi_hat and the moment-map match.

    ``phi`` is an :class:`AveragedMap`, any map object, or a sequence of base
    expressions.  The moment maps are those of the cotangent lifts, compared as
    mu_2 = mu_1 o phi_hat.
    """
    phi = as_base_map(phi, rho1)
    res = result or ConjugationResult(phi=phi)
    res.phi = phi
    rng = np.random.default_rng(seed)
    X = sample_base_domain(rho1, samples, domain, seed + 1)
    G = rho1.group.sample(samples, rng)
    base_res = conjugation_residual(rho1, rho2, phi, X, G)
    L1, L2 = cotangent_lift(rho1), cotangent_lift(rho2)
    chart = L1.chart
    phat = lift_conjugation(phi, rho1.m)
    P = rng.uniform(-momentum_box, momentum_box, size=(samples, rho1.m))
    Z = np.hstack([X, P])
    lhs = L1.apply(phat.values(Z), G)
    rhs = phat.values(L2.apply(Z, G))
    lifted_res = float(np.abs(wrap_difference(lhs - rhs, chart.periodic_mask)).max())
    J = phat.jacobians(Z)
    sympl = float(symplectic_residuals(J, chart.omega).max())
    mu1 = compile_exprs(moment_map_of_lift(L1), chart.variables)
    mu2 = compile_exprs(moment_map_of_lift(L2), chart.variables)
    moment = float(np.abs(mu2.batch(Z) - mu1.batch(phat.values(Z))).max())
    res.checks = [
        _report("conjugation_base", base_res, tol, samples),
        _report("conjugation_lifted", lifted_res, tol * max(1.0, float(np.abs(J).max())), samples),
        _report("lift_symplectic", sympl, tol_sympl, samples),
        _report("moment_map_match", moment, tol, samples),
    ]
    res.phi_hat = phat
    res.jacobian_constant = float(np.linalg.norm(J, ord=2, axis=(1, 2)).max())
    return res


# ---------------------------------------------------------------------------
# leaves of one-degree-of-freedom systems


@dataclass
class LeafExperimentReport:
    c: float
    c_hat: float
    action: float
    checks: list[CheckReport]
    shortcut: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "c": self.c,
            "c_hat": self.c_hat,
            "action": self.action,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
        }
        if self.shortcut:
            out["shortcut"] = self.shortcut
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _critical_points_1dof(f: Expr, chart: DarbouxChart, box: float, grid: int = 41) -> list[np.ndarray]:
    vs = chart.variables
    grad = compile_exprs(E.gradient(f, vs), vs)
    hess = compile_exprs([h for row in E.hessian(f, vs) for h in row], vs)
    axis = np.linspace(-box, box, grid)
    P = np.array(list(itertools.product(axis, axis)))
    gn = np.linalg.norm(grad.batch(P), axis=1)
    # seeds: grid minima of |grad f|
    order = np.argsort(gn)[: 8]
    found: list[np.ndarray] = []
    for z in P[order]:
        for _ in range(50):
            gz = grad(z)
            H = hess(z).reshape(2, 2)
            try:
                dz = np.linalg.solve(H, gz)
            except np.linalg.LinAlgError:
                break
            z = z - dz
            if np.linalg.norm(dz) < 1e-14:
                break
        if np.all(np.abs(z) <= box) and np.linalg.norm(grad(z)) < 1e-10:
            if not any(np.linalg.norm(z - q) < 1e-8 for q in found):
                found.append(z)
    return found


class _ActionAngle:
    """Action-angle matching between two one-degree-of-freedom systems.

    The angle of z is 2pi t / T, with t the flow time of X_f from the positive
    ray through the center to z and T the period of its leaf.  ``map`` sends z
    to the point of the f_hat leaf with the same action and the same angle.
    """

    def __init__(self, f: Expr, f_hat: Expr, center, chart: DarbouxChart, h_rel: float = 2e-4):
        self.chart = chart
        vs = self.chart.variables
        self.f, self.f_hat = f, f_hat
        self.center = np.asarray(center, dtype=np.float64)
        self.fp = compile_exprs([f], vs)
        self.fhp = compile_exprs([f_hat], vs)
        self.field = hamiltonian_vector_field(f, self.chart).program()
        self.back = compile_exprs([-c for c in hamiltonian_vector_field(f, self.chart).components], vs)
        self.field_hat = hamiltonian_vector_field(f_hat, self.chart).program()
        self.h_rel = h_rel
        self._loops: dict = {}
        self.ref = None

    def loop(self, which: str, c: float):
        """(action, period, ray start) of a leaf from one time-parametrized trace."""
        key = (which, c)
        if key not in self._loops:
            fexpr = self.f if which == "f" else self.f_hat
            lp = trace_level_loop(
                fexpr, c, variables=self.chart.variables, center=self.center, h_rel=self.h_rel, time_parametrized=True
            )
            self._loops[key] = (lp.action, lp.length, lp.start)
        return self._loops[key]

    def action(self, which: str, c: float) -> float:
        return self.loop(which, c)[0]

    def level_for_action(self, a: float, guess: float) -> float:
        """c_hat with A_hat(c_hat) = a.

        Newton on dA/dc = T / 2pi, which converges in a few traces from a
        nearby guess; falls back to bracketing if it stalls.
        """
        ch = guess
        for _ in range(12):
            ah, th, _ = self.loop("f_hat", ch)
            step = (ah - a) * TWO_PI / th
            ch_new = ch - step
            if abs(step) <= 1e-15 * max(1.0, abs(ch)) or ch_new == ch:
                return ch_new if abs(self.action("f_hat", ch_new) - a) < abs(ah - a) else ch
            ch = ch_new
        c0 = float(self.fhp(self.center)[0])

        def g(x):
            return self.action("f_hat", x) - a

        lo, hi = guess, guess
        while (g(lo) > 0) == (guess > c0):
            lo = c0 + 0.5 * (lo - c0)
        while (g(hi) < 0) == (guess > c0):
            hi = c0 + 2.0 * (hi - c0)
        return brentq(g, min(lo, hi), max(lo, hi), xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def _time_from_ray(self, z: np.ndarray, start: np.ndarray, period: float) -> float:
        v = self.field(start)
        steps = int(math.ceil(1.0 / self.h_rel))
        res = kernels.trace_level(
            self.back,
            z,
            period / steps,
            normalize=False,
            max_steps=2 * steps + 10,
            section_point=start,
            section_normal=-v / np.linalg.norm(v),
            window=0.25 * float(np.linalg.norm(start - self.center)),
        )
        if not res.closed:
            raise NonCompactLevel(f"no return to the reference ray from {z.tolist()}")
        return res.length % period

    def _flow_time(self, prog, z0: np.ndarray, t: float, period: float) -> np.ndarray:
        steps = max(1, int(math.ceil(t / (period * self.h_rel))))
        res = kernels.trace_level(
            prog, z0, t / steps, normalize=False, max_steps=steps, section_point=z0, section_normal=np.array([1.0, 0.0]), window=0.0
        )
        return res.end

    def map(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        c = float(self.fp(z)[0])
        a, T, start = self.loop("f", c)
        ch = self.level_for_action(a, self._guess(c, T))
        _, Th, start_h = self.loop("f_hat", ch)
        frac = self._time_from_ray(z, start, T) / T
        if frac == 0.0:
            return start_h
        return self._flow_time(self.field_hat, start_h, frac * Th, Th)

    def _guess(self, c: float, T: float) -> float:
        # first-order continuation from the reference pair (c_ref, c_hat_ref)
        if self.ref is None:
            return c
        c_ref, ch_ref, T_hat_ref = self.ref
        return ch_ref + (c - c_ref) * T / T_hat_ref

    def set_reference(self, c: float, c_hat: float):
        self.ref = (c, c_hat, self.loop("f_hat", c_hat)[1])

    def point_at(self, c: float, frac: float) -> np.ndarray:
        _, T, start = self.loop("f", c)
        if frac == 0.0:
            return start
        return self._flow_time(self.field, start, frac * T, T)


def elliptic_leaf_rigidity_experiment(
    F: MomentMapSystem,
    F_hat: MomentMapSystem,
    c: float,
    *,
    box: float = 2.0,
    annulus_width: float = 0.05,
    samples: int = 12,
    tol: float = 1e-6,
    center=None,
    seed: int = 0,
) -> LeafExperimentReport:
    """Match the leaf {f = c} to the leaf of f_hat with the same action and build phi_c.

    One degree of freedom.  The hypothesis (only regular or elliptic
    singular points in the window) is checked first; hyperbolic or
    focus-focus points raise :class:`HypothesisViolated`.  phi_c sends a point
    with action a and angle 2pi t / T (t the flow time from the positive ray)
    to the point of the f_hat leaf with action a at the same angle.  Reports
    the leaf-matching residual sup |A_hat(f_hat(phi(z))) - A(f(z))| and the
    symplecticity of phi_c (central differences) on an annulus around the leaf.
    """
    if F.n != 1 or F_hat.n != 1:
        raise ValueError("the leaf experiment handles one degree of freedom")
    f, fh = F.functions[0], F_hat.functions[0]
    chart = F.chart
    for name, sysm in (("F", F), ("F_hat", F_hat)):
        for z in _critical_points_1dof(sysm.functions[0], sysm.chart, box):
            rep = classify_point(sysm, z)
            if rep is None:
                continue
            if rep.degenerate or rep.williamson != (1, 0, 0):
                kind = "degenerate" if rep.degenerate else ("hyperbolic" if rep.williamson[1] else "focus-focus")
                raise HypothesisViolated(
                    f"{name} has a {kind} singular point at {np.round(z, 12).tolist()}; "
                    "the leaf theorem needs Williamson type (n-k, 0, 0)"
                )
    if center is None:
        crit = _critical_points_1dof(f, chart, box)
        center = crit[0] if crit else np.zeros(2)
    center = np.asarray(center, dtype=np.float64)
    if F_hat.functions == F.functions:
        A = trace_level_loop(f, c, variables=chart.variables, center=center).action
        checks = [
            _report("leaf_match", 0.0, tol, 1),
            _report("phi_symplectic", 0.0, tol, 1),
        ]
        return LeafExperimentReport(float(c), float(c), A, checks, shortcut="identical systems: phi_c is the identity")
    lm = _ActionAngle(f, fh, center, chart)
    A = lm.action("f", float(c))
    c_hat = lm.level_for_action(A, c)
    lm.set_reference(float(c), c_hat)
    rng = np.random.default_rng(seed)
    # annulus around the leaf: a few levels near c, several angles on each
    n_levels = max(1, samples // 3)
    levels = c * (1 + annulus_width * rng.uniform(-1, 1, n_levels))
    Z, phiZ = [], []
    leaf_res = 0.0
    for lev in levels:
        zs = [lm.point_at(float(lev), float(t)) for t in rng.uniform(0, 1, 3)]
        ws = [lm.map(z) for z in zs]
        vals = [float(lm.fhp(w)[0]) for w in ws]
        # leaves go to single leaves, and actions agree
        leaf_res = max(leaf_res, max(vals) - min(vals))
        leaf_res = max(leaf_res, abs(lm.action("f_hat", vals[0]) - lm.action("f", float(lev))))
        Z += zs
        phiZ += ws
    eps = 1e-4
    sym_res = 0.0
    om = chart.omega
    ident_res = 0.0
    for z, w in zip(Z, phiZ):
        J = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = eps
            J[:, k] = (lm.map(z + e) - lm.map(z - e)) / (2 * eps)
        sym_res = max(sym_res, float(np.abs(J.T @ om @ J - om).max()))
        ident_res = max(ident_res, float(np.abs(w - z).max()))
    checks = [
        _report("leaf_match", leaf_res, tol, samples),
        _report("phi_symplectic", sym_res, tol, samples),
    ]
    return LeafExperimentReport(
        float(c),
        float(c_hat),
        A,
        checks,
        notes=[f"sup |phi_c(z) - z| on the annulus = {ident_res:.3e}"],
    )
