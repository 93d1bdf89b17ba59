"""Backend selection for the hot loops.

The compiled extension ``symrigid._kernels`` is used when it imports; otherwise
the pure-Python ``symrigid._pykernels`` takes over.  Setting the environment
variable ``SYMRIGID_PURE=1`` forces the fallback.  Both backends share status
codes, which are turned into exceptions here.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from types import ModuleType

import numpy as np

from symrigid import _pykernels
from symrigid.expr import DomainError, Program

OK, ERR_SQRT, ERR_ZERODIV, ERR_FIXED_POINT, ERR_NONCOMPACT, ERR_CRITICAL = range(6)


class FixedPointDivergence(RuntimeError):
    """The implicit midpoint fixed-point iteration did not converge (step too large)."""

    def __init__(self, step: int):
        super().__init__(f"fixed-point iteration diverged at step {step}; reduce dt")
        self.step = step


KERNEL_ABI = 2


def _load_compiled() -> ModuleType | None:
    if os.environ.get("SYMRIGID_PURE", "") not in ("", "0"):
        return None
    try:
        from symrigid import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    if getattr(_kernels, "KERNEL_ABI", None) != KERNEL_ABI:
        # stale build from an older program layout
        return None
    return _kernels


_compiled = _load_compiled()
_impl: ModuleType = _compiled if _compiled is not None else _pykernels
BACKEND = "compiled" if _compiled is not None else "python"


def available_backends() -> dict[str, ModuleType]:
    out = {"python": _pykernels}
    if _compiled is not None:
        out["compiled"] = _compiled
    else:
        try:
            from symrigid import _kernels  # type: ignore[attr-defined]

            if getattr(_kernels, "KERNEL_ABI", None) == KERNEL_ABI:
                out["compiled"] = _kernels
        except ImportError:
            pass
    return out


def use_backend(name: str) -> None:
    """Switch the active backend ("compiled" or "python") for this process."""
    global _impl, BACKEND
    backends = available_backends()
    if name not in backends:
        raise ValueError(f"backend {name!r} not available; have {sorted(backends)}")
    _impl = backends[name]
    BACKEND = name


def _raise_domain(code: int) -> None:
    if code == ERR_SQRT:
        raise DomainError("sqrt of negative value")
    if code == ERR_ZERODIV:
        raise DomainError("zero raised to a negative power")


def eval_point(prog: Program, x: np.ndarray, backend: ModuleType | None = None) -> np.ndarray:
    impl = backend or _impl
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (len(prog.variables),):
        raise ValueError(f"expected {len(prog.variables)} coordinates, got shape {x.shape}")
    out = np.empty(prog.n_out)
    code = impl.eval_point(prog, x, out)
    _raise_domain(code)
    return out


def eval_batch(prog: Program, X: np.ndarray, backend: ModuleType | None = None) -> np.ndarray:
    impl = backend or _impl
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(prog.variables):
        raise ValueError(f"expected points of dimension {len(prog.variables)}, got shape {X.shape}")
    out = np.empty((X.shape[0], prog.n_out))
    code = impl.eval_batch(prog, X, out)
    _raise_domain(code)
    return out


def implicit_midpoint(
    field: Program,
    x0: np.ndarray,
    dt: float,
    steps: int,
    tol: float = 1e-12,
    maxiter: int = 50,
    backend: ModuleType | None = None,
) -> tuple[np.ndarray, int]:
    """Integrate ``x' = field(x)``; returns the (steps+1, d) trajectory and max iterations used."""
    impl = backend or _impl
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    traj = np.empty((steps + 1, x0.shape[0]))
    code, failed, worst = impl.implicit_midpoint(field, x0, float(dt), int(steps), float(tol), int(maxiter), traj)
    if code == ERR_FIXED_POINT:
        raise FixedPointDivergence(failed)
    _raise_domain(code)
    return traj, worst


@dataclass
class TraceResult:
    status: int
    steps: int
    length: float
    area: float
    end: np.ndarray
    points: np.ndarray | None

    @property
    def closed(self) -> bool:
        return self.status == OK


def trace_level(
    field: Program,
    x0,
    h: float,
    *,
    normalize: bool,
    max_steps: int,
    section_point,
    section_normal,
    window: float,
    min_length: float = 0.0,
    stride: int = 0,
    backend: ModuleType | None = None,
) -> TraceResult:
    """RK4-trace a planar field from ``x0`` until it returns through the section line."""
    impl = backend or _impl
    res = impl.trace_level(
        field,
        np.ascontiguousarray(x0, dtype=np.float64),
        float(h),
        bool(normalize),
        int(max_steps),
        np.ascontiguousarray(section_point, dtype=np.float64),
        np.ascontiguousarray(section_normal, dtype=np.float64),
        float(window),
        int(stride),
        float(min_length),
    )
    status, steps, length, area, ex, ey, points = res
    _raise_domain(status)
    return TraceResult(
        status=status,
        steps=int(steps),
        length=float(length),
        area=float(area),
        end=np.array([ex, ey]),
        points=None if points is None else np.asarray(points, dtype=np.float64),
    )
