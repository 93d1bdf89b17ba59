import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symrigid import _pykernels, kernels
from symrigid import expr as E
from symrigid.expr import compile_exprs
from symrigid.symplectic import DarbouxChart, hamiltonian_vector_field

BACKENDS = kernels.available_backends()
x, y = E.symbols("x y")


def test_python_backend_always_present():
    assert "python" in BACKENDS
    assert kernels.BACKEND in ("compiled", "python")


def test_stale_compiled_module_is_rejected(monkeypatch):
    import symrigid

    class Stale:
        KERNEL_ABI = kernels.KERNEL_ABI - 1

    monkeypatch.setitem(__import__("sys").modules, "symrigid._kernels", Stale)
    monkeypatch.setattr(symrigid, "_kernels", Stale, raising=False)
    monkeypatch.delenv("SYMRIGID_PURE", raising=False)
    assert kernels._load_compiled() is None


def test_pure_env_forces_fallback(monkeypatch):
    monkeypatch.setenv("SYMRIGID_PURE", "1")
    assert kernels._load_compiled() is None


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


EXPRS = [
    (x**2 + y**2) ** 2,
    E.sin(x) * E.exp(-y) + E.cos(x * y),
    E.sqrt(1 + x**2) - y**-2,
    (x + y) ** 3 * E.sin(x + y) - E.cos(x + y) ** 2,
]


@pytest.mark.skipif("compiled" not in BACKENDS, reason="compiled kernels not built")
@given(st.lists(st.floats(-3, 3, allow_nan=False).filter(lambda v: abs(v) > 1e-3), min_size=2, max_size=2))
def test_backends_agree_pointwise(p):
    prog = compile_exprs(EXPRS, ["x", "y"])
    a = kernels.eval_point(prog, np.array(p), BACKENDS["python"])
    b = kernels.eval_point(prog, np.array(p), BACKENDS["compiled"])
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_batch_matches_tree_evaluation(name):
    rng = np.random.default_rng(3)
    P = rng.uniform(0.2, 2.0, size=(50, 2))
    prog = compile_exprs(EXPRS, ["x", "y"])
    out = kernels.eval_batch(prog, P, BACKENDS[name])
    ref = np.array([[e.eval({"x": a, "y": b}) for e in EXPRS] for a, b in P])
    np.testing.assert_allclose(out, ref, rtol=1e-13)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_domain_errors_from_kernels(name):
    prog = compile_exprs([E.sqrt(x)], ["x"])
    with pytest.raises(E.DomainError):
        kernels.eval_batch(prog, np.array([[1.0], [-1.0]]), BACKENDS[name])


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_implicit_midpoint_backends(name):
    chart = DarbouxChart.standard(1)
    field = hamiltonian_vector_field((x**2 + y**2) ** 2, chart).program()
    traj, worst = kernels.implicit_midpoint(field, np.array([1.0, 0.0]), 1e-3, 200, backend=BACKENDS[name])
    assert traj.shape == (201, 2)
    assert worst <= 50
    other = "python" if name != "python" else name
    ref, _ = kernels.implicit_midpoint(field, np.array([1.0, 0.0]), 1e-3, 200, backend=BACKENDS[other])
    np.testing.assert_allclose(traj, ref, atol=1e-14)


def test_fixed_point_divergence():
    chart = DarbouxChart.standard(1)
    field = hamiltonian_vector_field((x**2 + y**2) ** 2, chart).program()
    with pytest.raises(kernels.FixedPointDivergence):
        kernels.implicit_midpoint(field, np.array([3.0, 0.0]), 1.0, 5)


def test_pure_python_codegen_uses_slots():
    r = x**2 + y**2
    prog = compile_exprs([E.sin(r) + r], ["x", "y"])
    out = np.empty((1, 1))
    _pykernels.eval_batch(prog, np.array([[0.5, 0.5]]), out)
    assert out[0, 0] == pytest.approx(np.sin(0.5) + 0.5, rel=1e-15)
