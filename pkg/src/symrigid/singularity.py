"""Rank, non-degeneracy and Williamson type of singular points.

At a rank-k point the Hamiltonian fields X_{f_i}(p) span an isotropic
subspace L.  The transverse slice S is the Euclidean orthogonal complement of
L + J L (J the standard complex structure), which is a symplectic subspace
isomorphic to L^omega / L.  The Hessians of the critical combinations
sum(c_i f_i) (those with sum(c_i df_i(p)) = 0) are restricted to S and turned
into the Hamiltonian matrices A = omega_S^{-1} H_S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg

from symrigid import expr as E
from symrigid.errors import (
    ClassificationAmbiguous,
    Inconclusive,
    NotElliptic,
    NotFixedPoint,
    SliceConstructionFailed,
)
from symrigid.expr import compile_exprs
from symrigid.symplectic import DarbouxChart, MomentMapSystem, PhasePoint

# below this singular values count as zero no matter how small sigma_max is
RANK_ABS_FLOOR = 1e-12


def _as_point(chart: DarbouxChart, p) -> np.ndarray:
    if isinstance(p, PhasePoint):
        return p.array
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (chart.dim,):
        raise ValueError(f"point must have {chart.dim} coordinates")
    return p


def gradient_matrix(system: MomentMapSystem, p) -> np.ndarray:
    """n x 2n matrix of gradients of the f_i at p."""
    z = _as_point(system.chart, p)
    return system.gradient_program()(z).reshape(system.n, system.chart.dim)


def hessians(system: MomentMapSystem, p) -> np.ndarray:
    chart = system.chart
    z = _as_point(chart, p)
    flat = [h for f in system.functions for row in E.hessian(f, chart.variables) for h in row]
    return compile_exprs(flat, chart.variables)(z).reshape(system.n, chart.dim, chart.dim)


def _numerical_rank(s: np.ndarray, tol_rank: float) -> int:
    if s.size == 0 or s[0] <= RANK_ABS_FLOOR:
        return 0
    return int(np.sum(s > max(tol_rank * s[0], RANK_ABS_FLOOR)))


def rank_dF(system: MomentMapSystem, p, tol_rank: float = 1e-8) -> int:
    s = np.linalg.svd(gradient_matrix(system, p), compute_uv=False)
    return _numerical_rank(s, tol_rank)


def scan_singular_points(system: MomentMapSystem, box: float = 2.0, grid: int = 5, tol_rank: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Grid points of [-box, box]^2n where rank dF < n, and their ranks.

    An odd ``grid`` puts the origin on the grid.  Points come out in
    lexicographic grid order.
    """
    dim = system.chart.dim
    axis = np.linspace(-box, box, grid)
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    G = system.gradient_program().batch(mesh).reshape(len(mesh), system.n, dim)
    s = np.linalg.svd(G, compute_uv=False)
    ranks = np.array([_numerical_rank(row, tol_rank) for row in s])
    hit = ranks < system.n
    return mesh[hit], ranks[hit]


@dataclass
class LinearizedFamily:
    """Hamiltonian matrices A_i on the transverse slice.

    ``basis`` has the slice basis vectors as columns (2n x 2m) and
    ``omega_slice`` is the restricted form in that basis.  ``combinations``
    holds the coefficient vectors c (one per matrix) of the critical
    combinations sum(c_i f_i); for k = 0 they are the unit vectors.
    """

    matrices: list[np.ndarray]
    basis: np.ndarray
    omega_slice: np.ndarray
    combinations: np.ndarray
    rank: int
    n: int

    @property
    def m(self) -> int:
        return self.n - self.rank


def _complex_gram_schmidt(vectors: np.ndarray, J: np.ndarray, count: int, tol: float = 1e-10) -> np.ndarray:
    """Pick ``count`` vectors e_i so that (e_1..e_m, J e_1..J e_m) is orthonormal."""
    es: list[np.ndarray] = []
    frame: list[np.ndarray] = []
    for v in vectors.T:
        w = v.copy()
        for _ in range(2):
            for u in frame:
                w -= (u @ w) * u
        nrm = np.linalg.norm(w)
        if nrm < tol:
            continue
        e = w / nrm
        es.append(e)
        frame.extend([e, J @ e])
        if len(es) == count:
            break
    if len(es) < count:
        raise SliceConstructionFailed("could not build a symplectic basis of the slice")
    return np.column_stack(es + [J @ e for e in es])


def transverse_linearization(system: MomentMapSystem, p, tol_rank: float = 1e-8, tol_iso: float = 1e-8) -> LinearizedFamily:
    chart = system.chart
    n = system.n
    om = chart.omega
    G = gradient_matrix(system, p)
    H = hessians(system, p)
    U, s, Vt = np.linalg.svd(G)
    k = _numerical_rank(s, tol_rank)
    if k == 0:
        A = [np.linalg.solve(om, h) for h in H]
        return LinearizedFamily(A, np.eye(2 * n), om.copy(), np.eye(n), 0, n)
    if k == n:
        raise ValueError("regular point: dF has full rank, there is no transverse family")
    # rows of Vt[:k] span the gradient directions; the fields are omega^{-1} of those
    X = np.linalg.solve(om, Vt[:k].T)
    L, _ = np.linalg.qr(X)
    iso = np.abs(L.T @ om @ L).max()
    if iso > tol_iso:
        raise SliceConstructionFailed(f"span of the Hamiltonian fields is not isotropic (residual {iso:.3e})")
    J = np.linalg.inv(chart.with_form(1).omega)
    occupied = np.hstack([L, J @ L])
    # Euclidean complement of L + JL
    Q, _ = np.linalg.qr(occupied, mode="complete")
    S = Q[:, 2 * k :]
    basis = _complex_gram_schmidt(S, J, n - k)
    om_s = basis.T @ om @ basis
    # critical combinations: left null space of G
    combos = U[:, k:].T
    A = []
    for c in combos:
        Hc = np.tensordot(c, H, axes=1)
        A.append(np.linalg.solve(om_s, basis.T @ Hc @ basis))
    return LinearizedFamily(A, basis, om_s, combos, k, n)


@dataclass
class NondegeneracyResult:
    nondegenerate: bool
    reason: str
    witness: np.ndarray | None = None
    witness_matrix: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    trials_used: int = 0
    seed: int = 0

    def __bool__(self) -> bool:
        return self.nondegenerate


def _min_gap(ev: np.ndarray) -> float:
    d = np.abs(ev[:, None] - ev[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min()) if len(ev) > 1 else math.inf


def is_nondegenerate(
    fam: LinearizedFamily,
    trials: int = 8,
    tol: float = 1e-9,
    tol_gap: float = 1e-6,
    seed: int = 0,
) -> NondegeneracyResult:
    """Independence, commutation and a simple spectrum for some random combination.

    Tolerances are relative to the largest matrix norm in the family.
    Raises :class:`Inconclusive` when (a) and (b) hold but every one of the
    ``trials`` random combinations has a clustered spectrum.
    """
    mats = fam.matrices
    if not mats:
        raise ValueError("empty family")
    scale = max(np.abs(a).max() for a in mats)
    if scale <= RANK_ABS_FLOOR:
        return NondegeneracyResult(False, "all Hessians vanish on the slice", seed=seed)
    flat = np.array([a.ravel() for a in mats])
    sv = np.linalg.svd(flat, compute_uv=False)
    if _numerical_rank(sv, 1e-8) < len(mats):
        return NondegeneracyResult(False, "linearized operators are linearly dependent", seed=seed)
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            comm = np.abs(mats[i] @ mats[j] - mats[j] @ mats[i]).max()
            if comm > tol * scale * scale + tol:
                return NondegeneracyResult(False, f"operators {i + 1} and {j + 1} do not commute ({comm:.3e})", seed=seed)
    rng = np.random.default_rng(seed)
    for t in range(1, trials + 1):
        c = rng.standard_normal(len(mats))
        M = np.tensordot(c, np.array(mats), axes=1)
        ev = np.linalg.eigvals(M)
        radius = np.abs(ev).max()
        if radius > 0 and _min_gap(ev) > tol_gap * radius:
            return NondegeneracyResult(True, "ok", c, M, ev, t, seed)
    raise Inconclusive(f"{trials} random combinations all had clustered spectra")


_KIND_ORDER = {"elliptic": 0, "hyperbolic": 1, "focus-focus": 2}


def _eigen_groups(ev: np.ndarray, tol: float) -> tuple[tuple[int, int, int], list[dict[str, Any]]]:
    radius = float(np.abs(ev).max()) if len(ev) else 0.0
    t = tol * radius
    imag, real, cplx = [], [], []
    for lam in ev:
        on_re = abs(lam.imag) <= t
        on_im = abs(lam.real) <= t
        if on_re and on_im:
            raise ClassificationAmbiguous(f"eigenvalue {lam:.3e} sits on both axes")
        (real if on_re else imag if on_im else cplx).append(lam)
    if len(imag) % 2 or len(real) % 2 or len(cplx) % 4:
        raise ClassificationAmbiguous("eigenvalues do not split into Williamson blocks")
    groups: list[dict[str, Any]] = []
    for b in sorted({abs(lam.imag) for lam in imag}):
        groups.append({"kind": "elliptic", "values": [complex(0, b), complex(0, -b)]})
    for a in sorted({abs(lam.real) for lam in real}):
        groups.append({"kind": "hyperbolic", "values": [complex(a, 0), complex(-a, 0)]})
    for lam in sorted({(abs(l.real), abs(l.imag)) for l in cplx}):
        a, b = lam
        groups.append({"kind": "focus-focus", "values": [complex(sa * a, sb * b) for sa in (1, -1) for sb in (1, -1)]})
    triple = (len(imag) // 2, len(real) // 2, len(cplx) // 4)
    return triple, groups


def williamson_type(fam: LinearizedFamily, tol: float = 1e-8, witness: NondegeneracyResult | None = None, **kw) -> tuple[int, int, int]:
    """(k_e, k_h, k_f) from the spectrum of a generic combination."""
    witness = witness or is_nondegenerate(fam, **kw)
    if not witness:
        raise ValueError(f"family is degenerate: {witness.reason}")
    triple, _ = _eigen_groups(witness.eigenvalues, tol)
    if fam.rank + triple[0] + triple[1] + 2 * triple[2] != fam.n:
        raise ClassificationAmbiguous(f"type {triple} does not fill the {fam.m} transverse degrees of freedom")
    return triple


def _krein_signed_weights(A: np.ndarray, H: np.ndarray, cluster_tol: float) -> list[float]:
    ev = np.linalg.eigvals(A)
    pos = np.sort(ev.imag[ev.imag > 0])
    clusters: list[list[float]] = []
    for b in pos:
        if clusters and b - clusters[-1][-1] <= cluster_tol:
            clusters[-1].append(b)
        else:
            clusters.append([b])
    weights = []
    d = A.shape[0]
    for cl in clusters:
        beta = float(np.mean(cl))
        # eigenspace of i*beta, dimension len(cl)
        _, _, vh = np.linalg.svd(A - 1j * beta * np.eye(d))
        V = vh[-len(cl) :].conj().T
        krein = np.linalg.eigvalsh(V.conj().T @ H @ V)
        weights.extend(float(np.sign(s)) * beta / 2.0 for s in krein)
    return sorted(weights)


def s1_weights(mu: E.Expr, chart: DarbouxChart, p, tol: float = 1e-8) -> list[float]:
    """Weights c_i with mu = sum c_i (x_i^2 + y_i^2) + O(3) at a fixed point p.

    Magnitudes are half the positive imaginary parts of the spectrum of
    omega^{-1} Hess(mu)(p); the sign of each weight is the sign of the
    Hessian on the corresponding eigenspace, so that a negative-definite block
    gets a negative weight.
    """
    z = _as_point(chart, p)
    vs = chart.variables
    grad = compile_exprs(E.gradient(mu, vs), vs)(z)
    if np.abs(grad).max() > tol:
        raise NotFixedPoint(f"X_mu does not vanish at p (|dmu| = {np.abs(grad).max():.3e})")
    H = compile_exprs([h for row in E.hessian(mu, vs) for h in row], vs)(z).reshape(chart.dim, chart.dim)
    A = np.linalg.solve(chart.omega, H)
    ev = np.linalg.eigvals(A)
    radius = np.abs(ev).max()
    if radius <= RANK_ABS_FLOOR:
        raise NotElliptic("Hessian vanishes at p")
    if np.abs(ev.real).max() > tol * radius or np.abs(ev).min() <= tol * radius:
        raise NotElliptic(f"spectrum is not purely imaginary and nonzero: {np.round(ev, 12).tolist()}")
    return _krein_signed_weights(A, H, cluster_tol=1e-7 * radius)


@dataclass
class SingularPointReport:
    point: PhasePoint
    rank: int
    degenerate: bool
    williamson: tuple[int, int, int] | None
    eigen_data: list[dict[str, Any]] = field(default_factory=list)
    weights: dict[str, list[float]] | None = None
    reason: str = ""
    seed: int = 0
    witness: list[float] | None = None
    slice_construction: bool = False

    def to_dict(self) -> dict[str, Any]:
        def cpx(z):
            return [float(z.real), float(z.imag)]

        out: dict[str, Any] = {
            "point": list(self.point.coords),
            "rank": self.rank,
            "degenerate": self.degenerate,
            "williamson": list(self.williamson) if self.williamson else None,
            "eigen_data": [{"kind": g["kind"], "values": [cpx(v) for v in g["values"]]} for g in self.eigen_data],
            "seed": self.seed,
        }
        if self.reason:
            out["reason"] = self.reason
        if self.weights:
            out["s1_weights"] = self.weights
        if self.witness is not None:
            out["witness_combination"] = self.witness
        if self.slice_construction:
            out["note"] = "rank > 0: classified on the transverse symplectic slice"
        return out


def classify_point(
    system: MomentMapSystem,
    p,
    *,
    tol_rank: float = 1e-8,
    tol: float = 1e-8,
    trials: int = 8,
    seed: int = 0,
) -> SingularPointReport | None:
    """Full report at p, or None when p is a regular point (rank n)."""
    chart = system.chart
    z = _as_point(chart, p)
    point = PhasePoint(chart, tuple(z))
    k = rank_dF(system, z, tol_rank)
    if k == system.n:
        return None
    fam = transverse_linearization(system, z, tol_rank)
    wit = is_nondegenerate(fam, trials=trials, seed=seed)
    if not wit:
        return SingularPointReport(point, k, True, None, reason=wit.reason, seed=seed, slice_construction=k > 0)
    triple = williamson_type(fam, tol, witness=wit)
    _, groups = _eigen_groups(wit.eigenvalues, tol)
    groups.sort(key=lambda g: _KIND_ORDER[g["kind"]])
    weights = None
    if k == 0 and triple == (system.n, 0, 0):
        weights = {}
        for name, f in zip(system.names, system.functions):
            try:
                weights[name] = s1_weights(f, chart, z, tol=max(tol, 1e-8))
            except (NotElliptic, NotFixedPoint):
                continue
        if system.n > 1:
            # the diagonal circle: each f_i is often elliptic in one block only
            try:
                weights["sum"] = s1_weights(E.total(system.functions), chart, z, tol=max(tol, 1e-8))
            except (NotElliptic, NotFixedPoint):
                pass
    return SingularPointReport(
        point,
        k,
        False,
        triple,
        groups,
        weights or None,
        seed=seed,
        witness=[float(c) for c in wit.witness],
        slice_construction=k > 0,
    )


def random_symplectic_matrix(n: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """exp(J S) for a random symmetric S: a symplectic matrix for omega = sum dx^dy."""
    S = rng.standard_normal((2 * n, 2 * n))
    S = 0.5 * (S + S.T) * scale
    J = np.linalg.inv(DarbouxChart.standard(n).omega)
    return scipy.linalg.expm(J @ S)


BLOCK_KINDS = ("regular", "elliptic", "hyperbolic", "focus-focus")


def normal_form_system(kinds, scales=None) -> MomentMapSystem:
    """Block-diagonal Williamson normal form on R^2n.

    ``kinds`` lists blocks from :data:`BLOCK_KINDS`; a focus-focus block takes
    two degrees of freedom and contributes the pair (x_a y_b - x_b y_a,
    x_a y_a + x_b y_b).  ``scales`` multiplies each function (default 1).
    The origin has rank equal to the number of regular blocks.
    """
    kinds = list(kinds)
    bad = set(kinds) - set(BLOCK_KINDS)
    if bad:
        raise ValueError(f"unknown block kinds {sorted(bad)}")
    n = sum(2 if k == "focus-focus" else 1 for k in kinds)
    chart = DarbouxChart.standard(n)
    X = [E.var(v) for v in chart.positions]
    Y = [E.var(v) for v in chart.momenta]
    funcs: list[E.Expr] = []
    i = 0
    for k in kinds:
        if k == "regular":
            funcs.append(X[i])
        elif k == "elliptic":
            funcs.append(X[i] * X[i] + Y[i] * Y[i])
        elif k == "hyperbolic":
            funcs.append(X[i] * Y[i])
        else:
            a, b = i, i + 1
            funcs.append(X[a] * Y[b] - X[b] * Y[a])
            funcs.append(X[a] * Y[a] + X[b] * Y[b])
            i += 1
        i += 1
    if scales is not None:
        scales = list(scales)
        if len(scales) != n:
            raise ValueError(f"need {n} scales")
        funcs = [E.const(float(s)) * f for s, f in zip(scales, funcs)]
    return MomentMapSystem(chart, tuple(funcs))


def expected_type(kinds) -> tuple[int, tuple[int, int, int]]:
    """(rank at the origin, Williamson triple) of :func:`normal_form_system`."""
    kinds = list(kinds)
    return kinds.count("regular"), (kinds.count("elliptic"), kinds.count("hyperbolic"), kinds.count("focus-focus"))


def linear_pullback(system: MomentMapSystem, M: np.ndarray) -> MomentMapSystem:
    """The system f_i(M z); a fixed point p of F corresponds to M^{-1} p."""
    chart = system.chart
    vs = [E.var(v) for v in chart.variables]
    d = chart.dim
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (d, d):
        raise ValueError(f"matrix must be {d} x {d}")
    images = {
        v: E.total(E.const(float(M[i, j])) * vs[j] for j in range(d) if M[i, j] != 0.0)
        for i, v in enumerate(chart.variables)
    }
    return MomentMapSystem(chart, tuple(f.subs(images) for f in system.functions), system.names)
