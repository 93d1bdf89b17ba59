import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symrigid import expr as E
from symrigid.errors import ClassificationAmbiguous, Inconclusive, NotElliptic, NotFixedPoint
from symrigid.singularity import (
    LinearizedFamily,
    classify_point,
    expected_type,
    is_nondegenerate,
    linear_pullback,
    normal_form_system,
    random_symplectic_matrix,
    rank_dF,
    s1_weights,
    scan_singular_points,
    transverse_linearization,
    williamson_type,
)
from symrigid.symplectic import DarbouxChart, MomentMapSystem

C1 = DarbouxChart.standard(1)
C2 = DarbouxChart.standard(2)
x, y = E.symbols("x y")
x1, x2, y1, y2 = E.symbols("x1 x2 y1 y2")
ORIGIN1, ORIGIN2 = np.zeros(2), np.zeros(4)

F = MomentMapSystem(C2, (x1**2 + y1**2, x2**2 + y2**2))
G = MomentMapSystem(C2, ((x1**2 + y1**2) ** 2, x2**2 + y2**2))
FOCUS = MomentMapSystem(C2, (x1 * y2 - x2 * y1, x1 * y1 + x2 * y2))


def test_rank_examples():
    assert rank_dF(F, ORIGIN2) == 0
    assert rank_dF(F, [1.0, 0.0, 0.0, 0.0]) == 1
    assert rank_dF(MomentMapSystem(C2, (x1, x2)), [0.3, 1.0, -2.0, 4.0]) == 2


@pytest.mark.parametrize(
    "f, A",
    [
        (x**2 + y**2, [[0, -2], [2, 0]]),
        (x * y, [[-1, 0], [0, 1]]),
        ((x**2 + y**2) ** 2, [[0, 0], [0, 0]]),
    ],
)
def test_transverse_linearization_examples(f, A):
    fam = transverse_linearization(MomentMapSystem(C1, (f,)), ORIGIN1)
    np.testing.assert_allclose(fam.matrices[0], A, atol=1e-15)


def test_nondegeneracy_examples():
    ell = transverse_linearization(MomentMapSystem(C1, (x**2 + y**2,)), ORIGIN1)
    res = is_nondegenerate(ell)
    assert res and res.witness is not None
    zero = transverse_linearization(MomentMapSystem(C1, ((x**2 + y**2) ** 2,)), ORIGIN1)
    assert not is_nondegenerate(zero)
    assert is_nondegenerate(transverse_linearization(FOCUS, ORIGIN2))


def test_focus_focus_spectrum_oracle():
    # brute-force characteristic polynomial of c1 A1 + c2 A2: roots +-c2 +- i c1
    fam = transverse_linearization(FOCUS, ORIGIN2)
    c = np.array([0.7, -1.3])
    M = c[0] * fam.matrices[0] + c[1] * fam.matrices[1]
    roots = np.roots(np.poly(M))
    want = [complex(s2 * c[1], s1 * c[0]) for s1 in (1, -1) for s2 in (1, -1)]
    assert sorted(roots, key=lambda z: (z.real, z.imag)) == pytest.approx(sorted(want, key=lambda z: (z.real, z.imag)), abs=1e-12)


@pytest.mark.parametrize(
    "system, expected",
    [
        (MomentMapSystem(C1, (x**2 + y**2,)), (1, 0, 0)),
        (MomentMapSystem(C1, (x * y,)), (0, 1, 0)),
        (FOCUS, (0, 0, 1)),
        (F, (2, 0, 0)),
        (MomentMapSystem(C2, (x1 * y1, x2**2 + y2**2)), (1, 1, 0)),
    ],
)
def test_williamson_examples(system, expected):
    fam = transverse_linearization(system, np.zeros(system.chart.dim))
    assert williamson_type(fam) == expected


def test_clustered_spectrum_is_inconclusive():
    # two commuting, independent operators whose combinations all keep a double eigenvalue
    A1 = np.diag([1.0, 1.0, -1.0, -1.0])
    A2 = np.diag([0.0, 0.0, 0.0, 0.0]) + np.eye(4) * 0.0
    A2[0, 1] = 1.0
    A2[2, 3] = -1.0
    fam = LinearizedFamily([A1, A2], np.eye(4), C2.omega, np.eye(2), 0, 2)
    with pytest.raises(Inconclusive):
        is_nondegenerate(fam, trials=4)


def test_axis_ambiguity_is_surfaced():
    from symrigid.singularity import _eigen_groups

    with pytest.raises(ClassificationAmbiguous):
        _eigen_groups(np.array([1e-12 + 1e-12j, 1.0, -1.0]), 1e-8)


@pytest.mark.parametrize(
    "mu, chart, p, weights",
    [
        (x**2 + y**2, C1, ORIGIN1, [1.0]),
        (3 * (x1**2 + y1**2) + 5 * (x2**2 + y2**2), C2, ORIGIN2, [3.0, 5.0]),
        (-(x1**2 + y1**2) + 2 * (x2**2 + y2**2), C2, ORIGIN2, [-1.0, 2.0]),
    ],
)
def test_s1_weights_examples(mu, chart, p, weights):
    assert s1_weights(mu, chart, p) == pytest.approx(weights, abs=1e-12)


def test_s1_weights_errors():
    with pytest.raises(NotElliptic):
        s1_weights((x**2 + y**2) ** 2, C1, ORIGIN1)
    with pytest.raises(NotElliptic):
        s1_weights(x * y, C1, ORIGIN1)
    with pytest.raises(NotFixedPoint):
        s1_weights(x**2 + y**2, C1, [1.0, 0.0])


def test_classify_point_reports():
    assert classify_point(F, [1.0, 1.0, 1.0, 1.0]) is None
    rep = classify_point(F, ORIGIN2)
    assert rep.williamson == (2, 0, 0) and rep.rank == 0 and not rep.degenerate
    assert rep.weights == {"sum": pytest.approx([1.0, 1.0], abs=1e-12)}
    d = rep.to_dict()
    assert d["williamson"] == [2, 0, 0]
    assert sum(len(g["values"]) for g in d["eigen_data"]) == 4
    rep = classify_point(MomentMapSystem(C1, (3 * (x**2 + y**2),)), ORIGIN1)
    assert rep.weights == {"f1": pytest.approx([3.0], abs=1e-12)}
    rep = classify_point(G, ORIGIN2)
    assert rep.degenerate and rep.williamson is None
    rep = classify_point(F, [1.0, 0.0, 0.0, 0.0])
    assert rep.rank == 1 and rep.williamson == (1, 0, 0)
    assert "transverse" in rep.to_dict()["note"]


def test_scan_finds_the_origin():
    pts, ranks = scan_singular_points(F, box=1.0, grid=3)
    assert any(np.allclose(p, 0) and r == 0 for p, r in zip(pts, ranks))


# ---------------------------------------------------------------------------
# properties


def _random_kinds(rng, n):
    kinds, left = [], n
    while left:
        opts = ["regular", "elliptic", "hyperbolic"] + (["focus-focus"] if left >= 2 else [])
        k = opts[rng.integers(len(opts))]
        if k == "regular" and kinds.count("regular") + 1 == n:
            k = "elliptic"
        kinds.append(k)
        left -= 2 if k == "focus-focus" else 1
    return kinds


def conjugated_case(seed):
    """Random normal form, random symplectic M, and the point M^{-1} p."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    kinds = _random_kinds(rng, n)
    S = normal_form_system(kinds, rng.uniform(0.5, 2.0, n))
    p = np.zeros(2 * n)
    i = 0
    for k in kinds:
        # regular blocks (f = x_i) are regular everywhere, so move along them
        if k == "regular":
            p[i], p[n + i] = rng.uniform(-1, 1, 2)
        i += 2 if k == "focus-focus" else 1
    M = random_symplectic_matrix(n, rng)
    return kinds, linear_pullback(S, M), np.linalg.solve(M, p)


@given(st.integers(0, 10**6))
def test_classification_is_symplectically_invariant(seed):
    kinds, T, q = conjugated_case(seed)
    rep = classify_point(T, q, seed=seed)
    k, triple = expected_type(kinds)
    assert rep is not None and not rep.degenerate
    assert (rep.rank, rep.williamson) == (k, triple)
    ke, kh, kf = rep.williamson
    assert rep.rank + ke + kh + 2 * kf == T.n


@given(st.integers(0, 10**6))
def test_random_symplectic_matrix_is_symplectic(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    M = random_symplectic_matrix(n, rng)
    om = DarbouxChart.standard(n).omega
    assert np.abs(M.T @ om @ M - om).max() <= 1e-10 * max(1.0, np.abs(M).max() ** 2)


@given(st.integers(0, 10**6))
def test_spectrum_comes_in_hamiltonian_quadruples(seed):
    kinds, T, q = conjugated_case(seed)
    fam = transverse_linearization(T, q)
    for A in fam.matrices:
        # Omega A symmetric
        S = fam.omega_slice @ A
        assert np.abs(S - S.T).max() <= 1e-10 * max(1.0, np.abs(S).max())
        ev = np.linalg.eigvals(A)
        scale = max(1.0, np.abs(ev).max())
        for lam in ev:
            for partner in (-lam, lam.conjugate(), -lam.conjugate()):
                assert np.abs(ev - partner).min() <= 1e-8 * scale


@given(st.integers(1, 4), st.integers(0, 3))
def test_zero_hessian_is_degenerate_not_a_crash(k, which):
    f = [(x1**2 + y1**2) ** (k + 1), x1**3 * y2, (x1 * y1) ** 2 + x2**4, x1**3 + y2**3][which]
    sysm = MomentMapSystem(C2, (f, (x2**2 + y2**2) ** 2))
    rep = classify_point(sysm, ORIGIN2)
    assert rep is not None and rep.degenerate
