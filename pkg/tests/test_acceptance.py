"""Acceptance criteria 1-10, each at its stated tolerance and time budget.

Every test emits one ``criterion N: PASS|FAIL ...`` line; the lines are
collected and printed in the terminal summary.
"""

import contextlib
import io
import math
import time
from pathlib import Path

import numpy as np
import pytest

from symrigid import expr as E
from symrigid.cli import main as cli_main
from symrigid.flows import (
    action_variable_1dof,
    degenerate_rigidity_experiment,
    radial_profile,
    s1_reduce,
    symplectic_integrate,
)
from symrigid.lift import (
    conjugate_action,
    cotangent_lift,
    displacement,
    fixed_point_inverse,
    hamiltonian_closure_residual,
    hyperbolic_action,
    lift_from_components,
    line_translation_action,
    rotation_dilation_action,
    torus_translation_action,
    verify_lift_invariance,
)
from symrigid.rigidity import (
    AveragedMap,
    GroupQuadrature,
    conjugation_residual,
    node_equivariance_residual,
    palais_average,
    sample_base_domain,
    verify_equivalence_suite,
)
from symrigid.singularity import (
    classify_point,
    expected_type,
    linear_pullback,
    normal_form_system,
    random_symplectic_matrix,
    transverse_linearization,
    williamson_type,
)
from symrigid.symplectic import DarbouxChart, MomentMapSystem, PhasePoint

C1, C2 = DarbouxChart.standard(1), DarbouxChart.standard(2)
x, y = E.symbols("x y")
x1, x2, y1, y2 = E.symbols("x1 x2 y1 y2")
q = E.var("q")
SYSTEMS = Path(__file__).resolve().parents[1] / "systems"


@pytest.fixture
def report(acceptance_log):
    def emit(n, ok, detail):
        acceptance_log.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return emit


def test_criterion_1_williamson_suite(report):
    t0 = time.perf_counter()
    cases = [
        (MomentMapSystem(C1, (x**2 + y**2,)), (1, 0, 0)),
        (MomentMapSystem(C1, (x * y,)), (0, 1, 0)),
        (MomentMapSystem(C2, (x1 * y2 - x2 * y1, x1 * y1 + x2 * y2)), (0, 0, 1)),
    ]
    got = [williamson_type(transverse_linearization(S, np.zeros(S.chart.dim))) for S, _ in cases]
    dt = time.perf_counter() - t0
    report(1, got == [w for _, w in cases] and dt < 1.0, f"types {got}, {dt:.2f} s")


def _conjugated_normal_form(rng):
    n = int(rng.integers(1, 4))
    kinds, left = [], n
    while left:
        choices = ["regular", "elliptic", "hyperbolic"] + (["focus-focus"] if left >= 2 else [])
        k = choices[int(rng.integers(len(choices)))]
        # at least one singular block, otherwise the point is regular
        if k == "regular" and kinds.count("regular") + 1 == n:
            k = "elliptic"
        kinds.append(k)
        left -= 2 if k == "focus-focus" else 1
    S = normal_form_system(kinds, rng.uniform(0.5, 2.0, n))
    p = np.zeros(2 * n)
    i = 0
    for k in kinds:
        if k == "regular":
            p[i], p[n + i] = rng.uniform(-1, 1, 2)
        i += 2 if k == "focus-focus" else 1
    M = random_symplectic_matrix(n, rng)
    return kinds, n, linear_pullback(S, M), np.linalg.solve(M, p)


def test_criterion_2_random_symplectic_conjugations(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    failures = budget_ok = 0
    for trial in range(200):
        kinds, n, T, z = _conjugated_normal_form(rng)
        rep = classify_point(T, z, seed=trial)
        want = expected_type(kinds)
        if rep is None or rep.degenerate or (rep.rank, rep.williamson) != want:
            failures += 1
            continue
        ke, kh, kf = rep.williamson
        budget_ok += rep.rank + ke + kh + 2 * kf == n
    dt = time.perf_counter() - t0
    report(2, failures == 0 and budget_ok == 200 and dt < 30.0, f"{failures} failures, budget {budget_ok}/200, {dt:.1f} s")


def test_criterion_3_lift_invariance(report):
    t0 = time.perf_counter()
    res = [verify_lift_invariance(cotangent_lift(a), 32, 64, tol=1e-12) for a in (hyperbolic_action(), rotation_dilation_action())]
    t, qq, p = E.var("t"), E.var("q"), E.var("p")
    broken = verify_lift_invariance(lift_from_components(hyperbolic_action(), [E.exp(-t) * qq, E.exp(-t) * p]), 32, 64, tol=1e-12)
    dt = time.perf_counter() - t0
    worst = max(r.lambda_check.residual for r in res)
    ok = all(r.passed for r in res) and not broken.passed and dt < 5.0
    report(3, ok, f"lambda residual {worst:.1e}, broken lift passed={broken.passed}, {dt:.2f} s")


def test_criterion_4_hamiltonian_closure(report):
    actions = [torus_translation_action(1), torus_translation_action(2), line_translation_action(1)]
    res = [hamiltonian_closure_residual(cotangent_lift(a), samples=500, tol=1e-9) for a in actions]
    report(4, all(r.passed and r.residual <= 1e-9 for r in res), "residuals " + ", ".join(f"{r.residual:.1e}" for r in res))


EPS = 0.02


def _bent_circle_pair():
    rho1 = torus_translation_action(1)
    h = [q + EPS * E.exp(E.cos(q))]
    return rho1, conjugate_action(rho1, h, fixed_point_inverse(displacement(h, ["q"]), ["q"], 10))


def test_criterion_5_palais_averaging(report):
    t0 = time.perf_counter()
    s = np.linspace(0, 2 * math.pi, 4001)
    c1 = max(np.abs(EPS * np.exp(np.cos(s))).max(), np.abs(EPS * np.sin(s) * np.exp(np.cos(s))).max())
    rho1, rho2 = _bent_circle_pair()
    res = palais_average(rho1, rho2, 2048, samples=200)
    X = sample_base_domain(rho1, 100, 1.0, 5)
    G = rho1.group.sample(100, np.random.default_rng(6))
    ladder = [conjugation_residual(rho1, rho2, AveragedMap(rho1, rho2, GroupQuadrature(rho1.group, n)), X, G) for n in (2, 4, 8, 16)]
    decreasing = all(b < a for a, b in zip(ladder, ladder[1:]))
    node = node_equivariance_residual(res.phi if isinstance(res.phi, AveragedMap) else AveragedMap(rho1, rho2, GroupQuadrature(rho1.group, 2048)), X[:1])
    dt = time.perf_counter() - t0
    ok = c1 <= 0.1 and res.residual_conj <= 1e-6 and decreasing and node <= 1e-12 and dt < 20.0
    report(5, ok, f"|h-id|_C1 {c1:.3f}, N=2048 residual {res.residual_conj:.1e}, doublings {['%.1e' % r for r in ladder]}, "
                  f"node {node:.1e}, {dt:.1f} s")


def test_criterion_6_symplectomorphism_and_moment_map(report):
    rho1, rho2 = _bent_circle_pair()
    base = palais_average(rho1, rho2, 64)
    res = verify_equivalence_suite(rho1, rho2, base.phi, samples=1000, result=base)
    ok = res.residual_sympl <= 1e-8 and res.residual_moment <= 1e-6
    report(6, ok, f"symplectic {res.residual_sympl:.1e}, moment {res.residual_moment:.1e}")


def _drift(H, traj):
    vals = E.compile_exprs([H], traj.chart.variables).batch(traj.states)[:, 0]
    return float(np.abs(vals - vals[0]).max())


def test_criterion_7_implicit_midpoint(report):
    quartic = (x**2 + y**2) ** 2
    d4 = _drift(quartic, symplectic_integrate(quartic, PhasePoint(C1, (1.0, 0.0)), 1e-3, 10_000))
    quad = x**2 + y**2
    d2 = _drift(quad, symplectic_integrate(quad, PhasePoint(C1, (1.0, 0.0)), 1e-3, 100_000))
    report(7, d4 <= 1e-8 and d2 <= 1e-12, f"quartic drift {d4:.1e}, quadratic drift {d2:.1e}")


def test_criterion_8_action_variables(report):
    a1, a4 = action_variable_1dof(x**2 + y**2, 1.0), action_variable_1dof(x**2 + y**2, 4.0)
    report(8, abs(a1 - 0.5) <= 1e-8 and abs(a4 - 2.0) <= 1e-8, f"I(1)={a1:.12f}, I(4)={a4:.12f}")


def test_criterion_9_rigidity_end_to_end(report):
    t0 = time.perf_counter()
    r1, r2 = x1**2 + y1**2, x2**2 + y2**2
    G = MomentMapSystem(C2, (r1**2, r2))
    rep = classify_point(G, np.zeros(4))
    prof = radial_profile(r1**2, (0.0, 2.0), block=("x1", "y1"))
    s = np.linspace(0.0, 2.0, 1001)
    prof_err = float(np.abs(prof(s) - s**2).max())
    red = s1_reduce(G)
    fits = [str(f.expr) for f in red.fits]
    fit_res = max(f.residual for f in red.fits)
    v = degenerate_rigidity_experiment(G)
    names = {e.name for e in v.evidence}
    chain = {"origin_degenerate", "reduced_fit", "elliptic_component", "radial_profile", "rescaled_equals_invariant"} <= names
    bad = degenerate_rigidity_experiment(MomentMapSystem(C2, (x1 * y1, r2)))
    dt = time.perf_counter() - t0
    ok = (
        rep.degenerate
        and prof_err <= 1e-7
        and fits == ["I1^2", "I2"]
        and fit_res <= 1e-9
        and v.verdict == "RIGID"
        and chain
        and v.revalidate()
        and bad.verdict == "HYPOTHESIS-FAILED"
        and dt < 60.0
    )
    report(9, ok, f"degenerate={rep.degenerate}, profile err {prof_err:.1e}, fits {fits} ({fit_res:.1e}), "
                  f"verdict {v.verdict}, chain complete={chain}, x1*y1 -> {bad.verdict}, {dt:.1f} s")


def _run_all():
    out = []
    for f in sorted(SYSTEMS.glob("*.sys")):
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = cli_main(["run", str(f)])
        out.append((f.name, code, buf.getvalue().encode()))
    return out


def test_criterion_10_reports_are_reproducible(report):
    first, second = _run_all(), _run_all()
    same = first == second and all(len(b) > 0 for _, _, b in first)
    report(10, same, f"{len(first)} system files, identical={same}")
