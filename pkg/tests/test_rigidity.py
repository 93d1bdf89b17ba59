import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symrigid import expr as E
from symrigid.errors import CloudTooSpread, HypothesisViolated, NonInvertibleJacobian, NotClose
from symrigid.lift import (
    ActionSpec,
    GroupSpec,
    conjugate_action,
    displacement,
    fixed_point_inverse,
    line_translation_action,
    rotation_action,
    torus_translation_action,
    wrap_difference,
)
from symrigid.rigidity import (
    AveragedMap,
    GroupQuadrature,
    action_distance,
    as_base_map,
    elliptic_leaf_rigidity_experiment,
    lift_conjugation,
    node_equivariance_residual,
    palais_average,
    sample_base_domain,
    verify_equivalence_suite,
)
from symrigid.symplectic import DarbouxChart, ExprMap, MomentMapSystem

q = E.var("q")
x1, x2 = E.symbols("x1 x2")
x, y = E.symbols("x y")
C1 = DarbouxChart.standard(1)


def circle_pair(eps=0.05, iterations=12):
    rho1 = torus_translation_action(1)
    h = [q + eps * E.sin(q)]
    rho2 = conjugate_action(rho1, h, fixed_point_inverse(displacement(h, ["q"]), ["q"], iterations))
    return rho1, rho2


def linear_pair(A):
    rho1 = rotation_action()
    Ai = np.linalg.inv(A)
    lin = lambda M: [M[i, 0] * x1 + M[i, 1] * x2 for i in range(2)]  # noqa: E731
    return rho1, conjugate_action(rho1, lin(A), lin(Ai))


def test_quadrature_is_a_subgroup():
    quad = GroupQuadrature(GroupSpec.torus(2), 8)
    nodes = quad.nodes
    assert nodes.shape == (64, 2) and quad.weights.sum() == pytest.approx(1.0, abs=1e-15)
    key = lambda a: tuple(np.round(np.mod(a, 2 * math.pi), 9))  # noqa: E731
    table = {key(n) for n in nodes}
    assert all(key(a + b) in table for a in nodes[:5] for b in nodes)
    with pytest.raises(ValueError):
        GroupQuadrature(GroupSpec.line(1), 8)


def test_identical_actions_average_to_identity():
    rho = torus_translation_action(1)
    res = palais_average(rho, rho, 16)
    X = sample_base_domain(rho, 100, 1.0, 3)
    assert np.abs(wrap_difference(res.phi.values(X) - X, rho.periodic_mask)).max() <= 1e-14
    assert res.residual_conj <= 1e-14


def test_circle_conjugacy_example():
    rho1, rho2 = circle_pair()
    res = palais_average(rho1, rho2, 2048, samples=200)
    assert res.residual_conj <= 1e-6
    assert res.det_min > res.det_threshold
    assert res.closeness["c0"] <= 0.2


def test_plane_linear_conjugacy_example():
    A = np.eye(2) + 0.05 * np.array([[0.0, 1.0], [1.0, 0.0]])
    rho1, rho2 = linear_pair(A)
    res = palais_average(rho1, rho2, 32, domain=1.0)
    assert res.residual_conj <= 1e-8


@pytest.mark.parametrize("n", [1, 3, 16])
def test_node_equivariance_is_exact(n):
    rho1, rho2 = circle_pair()
    avg = AveragedMap(rho1, rho2, GroupQuadrature(rho1.group, n))
    X = sample_base_domain(rho1, 20, 1.0, 0)
    assert node_equivariance_residual(avg, X) <= 1e-12


def test_node_equivariance_on_the_plane():
    A = np.array([[1.0, 0.04], [-0.03, 1.02]])
    rho1, rho2 = linear_pair(A)
    avg = AveragedMap(rho1, rho2, GroupQuadrature(rho1.group, 7))
    assert node_equivariance_residual(avg, sample_base_domain(rho1, 20, 1.0, 1)) <= 1e-12


def test_residual_does_not_grow_when_nodes_double():
    rho1, rho2 = circle_pair(0.08)
    X = sample_base_domain(rho1, 100, 1.0, 5)
    G = rho1.group.sample(100, np.random.default_rng(6))
    from symrigid.rigidity import conjugation_residual

    res = [conjugation_residual(rho1, rho2, AveragedMap(rho1, rho2, GroupQuadrature(rho1.group, n)), X, G) for n in (1, 2, 4, 8, 16, 32)]
    for a, b in zip(res, res[1:]):
        assert b <= a or b <= 1e-13


def test_average_derivatives_match_finite_differences():
    rho1, rho2 = circle_pair(0.1)
    avg = AveragedMap(rho1, rho2, GroupQuadrature(rho1.group, 8))
    X = np.array([[0.3], [2.0], [5.5]])
    h = 1e-5
    fd = (avg.values(X + h) - avg.values(X - h)) / (2 * h)
    np.testing.assert_allclose(avg.jacobians(X)[:, :, 0], fd, atol=1e-8)
    fd2 = (avg.jacobians(X + h) - avg.jacobians(X - h)) / (2 * h)
    np.testing.assert_allclose(avg.second_derivatives(X)[:, :, :, 0], fd2, atol=1e-7)


def test_refusals():
    rho1 = torus_translation_action(1)
    th = E.var("theta")
    # rho1(-g) rho2(g) q = q + g wraps all the way round
    doubled = ActionSpec(rho1.group, ("q",), (q + 2 * th,), periodic={"q"})
    with pytest.raises(NotClose):
        palais_average(rho1, doubled, 16)
    with pytest.raises(CloudTooSpread):
        palais_average(rho1, doubled, 16, closeness=10.0)
    far1, far2 = circle_pair(0.45, iterations=60)
    with pytest.raises(NotClose):
        palais_average(far1, far2, 64)


def test_singular_average_is_refused():
    # rho2(g) = 1e-6 rho1(g) averages to x / 1e6, whose Jacobian determinant is 1e-12
    rho1 = rotation_action()
    th = E.var("theta")
    flat = ActionSpec(rho1.group, ("x1", "x2"), (1e-6 * (x1 * E.cos(th) + x2 * E.sin(th)), 1e-6 * (-x1 * E.sin(th) + x2 * E.cos(th))))
    with pytest.raises(NonInvertibleJacobian):
        palais_average(rho1, flat, 8, closeness=10.0)


def test_lift_conjugation_examples():
    ident = as_base_map([q], torus_translation_action(1))
    Z = np.random.default_rng(0).uniform(-2, 2, (10, 2))
    np.testing.assert_array_equal(lift_conjugation(ident).values(Z), Z)
    shift = ExprMap([q + 0.7], ("q",))
    np.testing.assert_allclose(lift_conjugation(shift).values(Z), Z + [0.7, 0.0], atol=1e-15)
    double = ExprMap([2 * q], ("q",))
    np.testing.assert_allclose(lift_conjugation(double).values(Z), Z * [2.0, 0.5], atol=1e-15)


def test_suite_with_closed_form_conjugacy():
    A = np.array([[1.0, 0.05], [0.02, 0.97]])
    rho1, rho2 = linear_pair(A)
    Ai = np.linalg.inv(A)
    # phi = A^{-1}: rho1 o A^{-1} = A^{-1} o rho2
    phi = [Ai[0, 0] * x1 + Ai[0, 1] * x2, Ai[1, 0] * x1 + Ai[1, 1] * x2]
    res = verify_equivalence_suite(rho1, rho2, phi, samples=300, tol=1e-10)
    assert res.passed, res.to_dict()
    assert res.residual_sympl <= 1e-10 and res.residual_moment <= 1e-10


def test_identity_is_not_a_conjugacy():
    rho1, rho2 = circle_pair(0.05)
    res = verify_equivalence_suite(rho1, rho2, [q], samples=200, seed=4)
    assert not res.check("conjugation_base").passed
    # with phi = id the residual is the action distance on the same samples
    X = sample_base_domain(rho1, 200, 1.0, 5)
    G = rho1.group.sample(200, np.random.default_rng(4))
    dist = np.abs(wrap_difference(rho1.apply(X, G) - rho2.apply(X, G), rho1.periodic_mask)).max()
    assert res.residual_conj == pytest.approx(dist, rel=1e-12)
    assert res.residual_sympl <= 1e-12


@given(st.floats(-math.pi, math.pi))
def test_translations_commute_with_any_translation(c):
    rho = torus_translation_action(1)
    res = verify_equivalence_suite(rho, rho, [q + c], samples=100, tol=1e-12, tol_sympl=1e-12)
    assert res.passed


def test_averaged_pair_full_suite():
    rho1, rho2 = circle_pair(0.05)
    base = palais_average(rho1, rho2, 64)
    res = verify_equivalence_suite(rho1, rho2, base.phi, samples=300, result=base)
    assert res.passed, res.to_dict()
    assert res.jacobian_constant >= 1.0
    d = res.to_dict()
    assert d["quad_n"] == 64 and "formula" in d and {c["check"] for c in d["checks"]} >= {"moment_map_match", "lift_symplectic"}


def test_line_actions_are_not_averaged():
    rho = line_translation_action(1)
    with pytest.raises(ValueError):
        palais_average(rho, rho, 8)


def test_action_distance_reports_c0_and_c1():
    rho1, rho2 = circle_pair(0.05)
    d = action_distance(rho1, rho2)
    # |h - id| <= 0.05 and |(h^-1)' - 1| <= 0.05 / 0.95 bound the displacements
    assert 0 < d["c0"] <= 0.1 + 1e-9 and 0 < d["c1"] <= 0.2


# ---------------------------------------------------------------------------
# leaves


def test_leaf_matching_scaled_oscillator():
    F = MomentMapSystem(C1, (x**2 + y**2,))
    Fh = MomentMapSystem(C1, (1.1 * (x**2 + y**2),))
    rep = elliptic_leaf_rigidity_experiment(F, Fh, 1.0)
    assert rep.c_hat == pytest.approx(1.1, abs=1e-8)
    assert rep.passed, rep.to_dict()
    assert rep.action == pytest.approx(0.5, abs=1e-8)


def test_leaf_matching_anharmonic():
    F = MomentMapSystem(C1, (x**2 + y**2,))
    Fh = MomentMapSystem(C1, (x**2 + y**2 + 0.05 * (x**2 + y**2) ** 2 + 0.02 * x**3,))
    rep = elliptic_leaf_rigidity_experiment(F, Fh, 1.0, samples=6)
    assert rep.passed, rep.to_dict()


def test_leaf_identity_shortcut():
    F = MomentMapSystem(C1, (x**2 + y**2,))
    rep = elliptic_leaf_rigidity_experiment(F, F, 1.0)
    assert rep.shortcut and rep.c_hat == 1.0
    assert all(c.residual <= 1e-12 for c in rep.checks)


def test_leaf_hypothesis_violation():
    F = MomentMapSystem(C1, (x**2 + y**2,))
    with pytest.raises(HypothesisViolated):
        elliptic_leaf_rigidity_experiment(F, MomentMapSystem(C1, (x * y,)), 1.0)
