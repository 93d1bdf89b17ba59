import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symrigid import expr as E
from symrigid.errors import CriticalLevel, NonCompactLevel, NotInvariant, NotReducible
from symrigid.flows import (
    action_variable_1dof,
    conserved_along_flow,
    degenerate_rigidity_experiment,
    period_1dof,
    radial_profile,
    s1_invariance_check,
    s1_reduce,
    symplectic_integrate,
    trace_level_loop,
)
from symrigid.kernels import FixedPointDivergence
from symrigid.symplectic import DarbouxChart, MomentMapSystem, PhasePoint

C1 = DarbouxChart.standard(1)
C2 = DarbouxChart.standard(2)
x, y = E.symbols("x y")
x1, x2, y1, y2 = E.symbols("x1 x2 y1 y2")
r1, r2 = x1**2 + y1**2, x2**2 + y2**2


def _energy(H, traj):
    from symrigid.expr import compile_exprs

    return compile_exprs([H], traj.chart.variables).batch(traj.states)[:, 0]


def test_quadratic_flow_is_the_cayley_rotation():
    H = x**2 + y**2
    dt, steps = 1e-2, 10_000
    traj = symplectic_integrate(H, PhasePoint(C1, (1.0, 0.0)), dt, steps)
    assert len(traj) == steps + 1 and np.all(np.diff(traj.times) > 0)
    assert abs(_energy(H, traj)[-1] - 1.0) <= 1e-12
    # X = (-2y, 2x); the midpoint map is the Cayley transform, a rotation by 2 atan(dt) per step
    ang = steps * 2 * math.atan(dt)
    np.testing.assert_allclose(traj.end, [math.cos(ang), math.sin(ang)], atol=1e-9)


def test_regular_block_flow_is_a_line():
    traj = symplectic_integrate(x, PhasePoint(C1, (0.0, 0.0)), 0.1, 50)
    np.testing.assert_allclose(traj.states[:, 0], 0.0, atol=0)
    np.testing.assert_allclose(traj.states[:, 1], traj.times, atol=1e-13)


def test_quartic_flow_against_fine_reference():
    H = (x**2 + y**2) ** 2
    traj = symplectic_integrate(H, PhasePoint(C1, (1.0, 0.0)), 1e-3, 10_000)
    assert np.abs(_energy(H, traj) - 1.0).max() <= 1e-8
    # on r = 1 the field is (-4y, 4x): a rotation at rate 4
    # second order: the phase error shrinks 100x when dt shrinks 10x
    fine = symplectic_integrate(H, PhasePoint(C1, (1.0, 0.0)), 1e-4, 100_000)
    exact = np.array([math.cos(40.0), math.sin(40.0)])
    coarse_err = np.abs(traj.end - exact).max()
    fine_err = np.abs(fine.end - exact).max()
    assert coarse_err <= 1e-3
    assert 50 <= coarse_err / fine_err <= 200


@pytest.mark.parametrize("H, chart, x0", [(x**2 + y**2, C1, (0.6, -0.8)), (x1 * y2 - x2 * y1, C2, (0.3, -1.0, 0.5, 0.2))])
def test_quadratic_integrals_over_long_runs(H, chart, x0):
    traj = symplectic_integrate(H, PhasePoint(chart, x0), 1e-2, 100_000)
    e = _energy(H, traj)
    assert np.abs(e - e[0]).max() <= 1e-11


def test_integrator_rejects_large_steps_and_bad_input():
    with pytest.raises(FixedPointDivergence):
        symplectic_integrate((x**2 + y**2) ** 2, PhasePoint(C1, (3.0, 0.0)), 1.0, 3)
    with pytest.raises(ValueError):
        symplectic_integrate(x, PhasePoint(C1, (0.0, 0.0)), 0.0, 3)
    with pytest.raises(ValueError):
        symplectic_integrate(x, np.zeros(2), 0.1, 3)


def test_conserved_along_flow_examples():
    F = MomentMapSystem(C2, (r1, r2))
    traj = symplectic_integrate(r1, PhasePoint(F.chart, (0.5, 0.4, -0.2, 0.9)), 1e-2, 2000)
    rep = conserved_along_flow(F, traj, tol=1e-10)
    assert rep.passed and rep.details["drifts"]["f2"] <= 1e-10
    osc = MomentMapSystem(C1, (x**2 + y**2,))
    traj = symplectic_integrate(x**2 + y**2, PhasePoint(C1, (1.0, 0.0)), 1e-2, 1000)
    assert conserved_along_flow(osc, traj, tol=1e-12).passed
    # {x, y} = 1: along the flow of y, x moves by the elapsed time
    bad = MomentMapSystem(C2, (x1, y1))
    traj = symplectic_integrate(y1, PhasePoint(C2, (0.0, 0.0, 0.0, 0.0)), 0.01, 300)
    rep = conserved_along_flow(bad, traj)
    assert not rep.passed
    assert rep.details["drifts"]["f1"] == pytest.approx(traj.times[-1], rel=1e-12)


@pytest.mark.parametrize(
    "f, c, action",
    [(x**2 + y**2, 1.0, 0.5), (x**2 + y**2, 4.0, 2.0), ((x**2 + y**2) ** 2, 1.0, 0.5), (3 * x**2 + y**2 / 3, 2.0, 1.0)],
)
def test_action_examples(f, c, action):
    # circle of radius sqrt(c): area pi c over 2 pi; the ellipse has the same area
    assert action_variable_1dof(f, c) == pytest.approx(action, abs=1e-8)


def test_period_of_the_oscillator():
    # X = (-2y, 2x): angular speed 2, period pi
    assert period_1dof(x**2 + y**2, 1.0) == pytest.approx(math.pi, rel=1e-9)


@given(st.floats(0.3, 3.0), st.sampled_from(["cube", "exp", "affine"]))
def test_action_depends_on_the_leaf_only(c, kind):
    f = x**2 + 0.5 * y**2 + 0.1 * x**3
    g = {"cube": f * f * f + f, "exp": E.exp(f), "affine": 3 * f - 1}[kind]
    lift = {"cube": c**3 + c, "exp": math.exp(c), "affine": 3 * c - 1}[kind]
    assert action_variable_1dof(g, lift) == pytest.approx(action_variable_1dof(f, c), abs=1e-8)


def test_level_errors():
    with pytest.raises(NonCompactLevel):
        trace_level_loop(x * y, 1.0, direction=(1.0, 1.0), max_steps=20_000)
    with pytest.raises(CriticalLevel):
        trace_level_loop(x**2 - y**2 + 0.0 * x, 0.0, direction=(1.0, 1.0))


def test_s1_invariance_examples():
    assert s1_invariance_check((x**2 + y**2) ** 3, tol=1e-12).passed
    rep = s1_invariance_check(x * y)
    assert not rep.passed and rep.residual > 1.0
    rep = s1_invariance_check(x**2 + y**2 + 0.01 * x, box=2.0)
    # |0.01 (x' - x)| <= 0.01 * 2 r with r <= 2 sqrt 2
    assert not rep.passed and 0.005 < rep.residual <= 0.02 * 2 * math.sqrt(2)


def test_radial_profile_examples():
    p = radial_profile((x**2 + y**2) ** 2, (0.0, 2.0))
    s = np.linspace(0.0, 2.0, 1001)
    assert p.validation_residual <= 1e-9
    assert np.abs(p(s) - s**2).max() <= 1e-7
    assert p.slope_at_zero == 0.0 and p.increasing_past_zero()
    p = radial_profile(x**2 + y**2, (0.0, 2.0))
    np.testing.assert_allclose(p(s), s, atol=1e-12)
    p = radial_profile(E.exp(x**2 + y**2), (0.0, 4.0))
    s4 = np.linspace(0.0, 4.0, 2001)
    assert np.abs(p(s4) - np.exp(s4)).max() <= 1e-7
    np.testing.assert_allclose(p.inverse([1.0, math.exp(2.5), math.exp(4.0)]), [0.0, 2.5, 4.0], atol=1e-9)


def test_radial_profile_refuses_non_invariant():
    with pytest.raises(NotInvariant):
        radial_profile(x**2 + 2 * y**2, (0.0, 2.0))


profiles = st.sampled_from(
    [
        (lambda s: s**2, lambda u: u * u),
        (lambda s: s + 0.5 * s**3, lambda u: u + 0.5 * u**3),
        (lambda s: np.exp(s) - 1, lambda u: E.exp(u) - 1),
        (lambda s: np.sin(s), E.sin),
    ]
)


@given(profiles, st.floats(0.5, 1.5))
def test_radial_profile_round_trip(phi0, s_max):
    num, sym = phi0
    p = radial_profile(sym(x**2 + y**2), (0.0, s_max))
    s = np.linspace(0.0, s_max, 777)
    assert np.abs(p(s) - num(s)).max() <= 1e-7


def test_s1_reduce_examples():
    red = s1_reduce(MomentMapSystem(C2, (r1**2, r2)))
    assert [str(f.expr) for f in red.fits] == ["I1^2", "I2"]
    assert red.passed and max(f.residual for f in red.fits) <= 1e-9
    assert red.fits[0].degenerate_blocks == (0,) and red.fits[1].degenerate_blocks == ()
    red = s1_reduce(MomentMapSystem(C2, (r1, r2)))
    assert [str(f.expr) for f in red.fits] == ["I1", "I2"]
    with pytest.raises(NotReducible):
        s1_reduce(MomentMapSystem(C2, (x1 * y2 - x2 * y1, x1 * y1 + x2 * y2)))


def test_rigidity_verdicts():
    v = degenerate_rigidity_experiment(MomentMapSystem(C2, (r1**2, r2)))
    assert v.verdict == "RIGID" and v.path == "circle reduction"
    names = [e.name for e in v.evidence]
    for needed in ("origin_degenerate", "reduced_fit", "elliptic_component", "radial_profile", "rescaled_equals_invariant"):
        assert needed in names
    assert v.revalidate()
    v = degenerate_rigidity_experiment(MomentMapSystem(C2, (r1, r2)))
    assert v.verdict == "RIGID" and "shortcut" in v.path
    v = degenerate_rigidity_experiment(MomentMapSystem(C2, (x1 * y1, r2)))
    assert v.verdict == "HYPOTHESIS-FAILED" and "hyperbolic" in v.failing_clause
    v = degenerate_rigidity_experiment(MomentMapSystem(C2, (r1**2, r2**2)))
    assert v.verdict == "HYPOTHESIS-FAILED"
    v = degenerate_rigidity_experiment(MomentMapSystem(C1, (x**2 + y**2,)))
    assert v.verdict == "UNSUPPORTED"


def test_rigidity_is_order_agnostic():
    v = degenerate_rigidity_experiment(MomentMapSystem(C2, (r1, r2**2)))
    assert v.verdict == "RIGID" and v.revalidate()
