"""Pure-Python kernels, used when the compiled extension is unavailable.

Same signatures and status codes as ``_kernels.pyx``.  Scalar evaluation goes
through a Python closure generated from the postfix program; batch evaluation
runs the postfix program once over whole numpy columns.
"""

import math

import numpy as np

from symrigid.expr import (
    OP_ADD,
    OP_CONST,
    OP_COS,
    OP_EXP,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SIN,
    OP_SQRT,
    OP_STORE,
    OP_LOAD,
    OP_VAR,
)

OK, ERR_SQRT, ERR_ZERODIV, ERR_FIXED_POINT, ERR_NONCOMPACT, ERR_CRITICAL = 0, 1, 2, 3, 4, 5

_GL_NODES = (0.5 - 0.5 * math.sqrt(0.6), 0.5, 0.5 + 0.5 * math.sqrt(0.6))
_GL_WEIGHTS = (5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0)


class _KernelDomainError(Exception):
    def __init__(self, code):
        super().__init__(code)
        self.code = code


def _safe_sqrt(a):
    if a < 0.0:
        raise _KernelDomainError(ERR_SQRT)
    return math.sqrt(a)


def _safe_pow(a, k):
    if a == 0.0 and k < 0:
        raise _KernelDomainError(ERR_ZERODIV)
    try:
        return math.pow(a, k)
    except OverflowError:
        return math.copysign(math.inf, a) if k % 2 else math.inf


def _safe_exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _scalar_function(prog):
    """Build (and cache on the program) a closure ``f(x) -> tuple`` of outputs."""
    if prog._pyfunc is not None:
        return prog._pyfunc
    lines = ["def _f(x):"]
    outs = []
    tmp = 0
    ops, args, consts, offsets = prog.ops, prog.args, prog.consts, prog.offsets
    for k in range(prog.n_out):
        stack = []
        for i in range(offsets[k], offsets[k + 1]):
            op, arg = int(ops[i]), int(args[i])
            if op == OP_CONST:
                stack.append(repr(float(consts[arg])))
                continue
            if op == OP_VAR:
                stack.append(f"x[{arg}]")
                continue
            if op == OP_LOAD:
                stack.append(f"s{arg}")
                continue
            if op == OP_STORE:
                lines.append(f"    s{arg} = {stack[-1]}")
                stack[-1] = f"s{arg}"
                continue
            name = f"t{tmp}"
            tmp += 1
            if op in (OP_ADD, OP_MUL):
                b = stack.pop()
                a = stack.pop()
                sym = "+" if op == OP_ADD else "*"
                lines.append(f"    {name} = {a} {sym} {b}")
            else:
                a = stack.pop()
                if op == OP_NEG:
                    lines.append(f"    {name} = -{a}")
                elif op == OP_POW:
                    lines.append(f"    {name} = _pow({a}, {arg})")
                elif op == OP_SIN:
                    lines.append(f"    {name} = _sin({a})")
                elif op == OP_COS:
                    lines.append(f"    {name} = _cos({a})")
                elif op == OP_EXP:
                    lines.append(f"    {name} = _exp({a})")
                elif op == OP_SQRT:
                    lines.append(f"    {name} = _sqrt({a})")
            stack.append(name)
        outs.append(stack[0] if stack else "0.0")
    lines.append(f"    return ({', '.join(outs)},)")
    env = {"_pow": _safe_pow, "_sin": math.sin, "_cos": math.cos, "_exp": _safe_exp, "_sqrt": _safe_sqrt}
    exec(compile("\n".join(lines), "<symrigid-program>", "exec"), env)
    prog._pyfunc = env["_f"]
    return prog._pyfunc


def eval_point(prog, x, out):
    f = _scalar_function(prog)
    try:
        vals = f(x)
    except _KernelDomainError as exc:
        return exc.code
    for i, v in enumerate(vals):
        out[i] = v
    return OK


def eval_batch(prog, X, out):
    ops, args, consts, offsets = prog.ops, prog.args, prog.consts, prog.offsets
    n = X.shape[0]
    slots = [None] * prog.n_slots
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(prog.n_out):
            stack = []
            for i in range(offsets[k], offsets[k + 1]):
                op, arg = ops[i], args[i]
                if op == OP_CONST:
                    stack.append(np.full(n, consts[arg]))
                elif op == OP_VAR:
                    stack.append(X[:, arg])
                elif op == OP_LOAD:
                    stack.append(slots[arg])
                elif op == OP_STORE:
                    slots[arg] = stack[-1]
                elif op == OP_ADD:
                    b = stack.pop()
                    stack[-1] = stack[-1] + b
                elif op == OP_MUL:
                    b = stack.pop()
                    stack[-1] = stack[-1] * b
                elif op == OP_NEG:
                    stack[-1] = -stack[-1]
                elif op == OP_POW:
                    a = stack[-1]
                    if arg < 0 and np.any(a == 0.0):
                        return ERR_ZERODIV
                    stack[-1] = np.power(a, float(arg))
                elif op == OP_SIN:
                    stack[-1] = np.sin(stack[-1])
                elif op == OP_COS:
                    stack[-1] = np.cos(stack[-1])
                elif op == OP_EXP:
                    stack[-1] = np.exp(stack[-1])
                elif op == OP_SQRT:
                    a = stack[-1]
                    if np.any(a < 0.0):
                        return ERR_SQRT
                    stack[-1] = np.sqrt(a)
            out[:, k] = stack[0] if stack else 0.0
    return OK


def implicit_midpoint(prog, x0, dt, steps, tol, maxiter, traj):
    """Implicit midpoint rule with fixed-point iteration on the stage slope.

    Returns ``(status, failed_step, max_iterations_used)``.
    """
    f = _scalar_function(prog)
    d = len(x0)
    x = [float(v) for v in x0]
    comp = [0.0] * d
    traj[0, :] = x
    half = 0.5 * dt
    worst = 0
    try:
        for n in range(1, steps + 1):
            k = list(f(x))
            converged = False
            prev = math.inf
            for it in range(1, maxiter + 1):
                z = [x[i] + half * k[i] for i in range(d)]
                knew = f(z)
                delta = 0.0
                for i in range(d):
                    step_change = abs(dt * (knew[i] - k[i]))
                    if not step_change <= delta:
                        delta = step_change
                k = list(knew)
                if delta <= tol:
                    converged = True
                # past tol, keep polishing while the correction still shrinks
                if converged and (delta == 0.0 or delta >= prev):
                    break
                prev = delta
            if not converged or not all(math.isfinite(v) for v in k):
                return ERR_FIXED_POINT, n, it
            worst = max(worst, it)
            # compensated summation keeps roundoff drift from accumulating over long runs
            for i in range(d):
                y = dt * k[i] - comp[i]
                t = x[i] + y
                comp[i] = (t - x[i]) - y
                x[i] = t
            traj[n, :] = x
    except _KernelDomainError as exc:
        return exc.code, n, worst
    return OK, 0, worst


def _field(f, z, normalize):
    vx, vy = f(z)
    if normalize:
        nrm = math.hypot(vx, vy)
        if nrm == 0.0:
            return None
        return vx / nrm, vy / nrm
    return vx, vy


def _hermite(z0, d0, z1, d1, s):
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return (
        h00 * z0[0] + h10 * d0[0] + h01 * z1[0] + h11 * d1[0],
        h00 * z0[1] + h10 * d0[1] + h01 * z1[1] + h11 * d1[1],
    )


def _hermite_dy(z0, d0, z1, d1, s):
    s2 = s * s
    return (6 * s2 - 6 * s) * z0[1] + (3 * s2 - 4 * s + 1) * d0[1] + (-6 * s2 + 6 * s) * z1[1] + (3 * s2 - 2 * s) * d1[1]


def _green(z0, d0, z1, d1, a, b):
    # integral of x dy over the Hermite cubic on [a, b]; 3-point Gauss-Legendre is exact (degree 5)
    acc = 0.0
    w = b - a
    for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
        s = a + w * node
        acc += weight * _hermite(z0, d0, z1, d1, s)[0] * _hermite_dy(z0, d0, z1, d1, s)
    return acc * w


def trace_level(prog, x0, h, normalize, max_steps, sec_point, sec_normal, window, stride, min_length):
    """RK4 tracing of a planar field until it crosses the section line.

    The section is the line through ``sec_point`` with normal ``sec_normal``; a
    crossing counts when the signed distance goes from negative to nonnegative
    within ``window`` of ``sec_point`` after at least ``min_length`` of path.
    Returns ``(status, steps, length, area, end_x, end_y, points)`` where
    ``area`` is the integral of x dy along the traced path.
    """
    f = _scalar_function(prog)
    px, py = sec_point
    nx, ny = sec_normal
    z = (float(x0[0]), float(x0[1]))
    points = [z] if stride > 0 else None
    length = 0.0
    area = 0.0
    try:
        v = _field(f, z, normalize)
        if v is None:
            return ERR_CRITICAL, 0, 0.0, 0.0, z[0], z[1], points
        g_prev = (z[0] - px) * nx + (z[1] - py) * ny
        for step in range(1, max_steps + 1):
            k1 = v
            k2 = _field(f, (z[0] + 0.5 * h * k1[0], z[1] + 0.5 * h * k1[1]), normalize)
            if k2 is None:
                return ERR_CRITICAL, step, length, area, z[0], z[1], points
            k3 = _field(f, (z[0] + 0.5 * h * k2[0], z[1] + 0.5 * h * k2[1]), normalize)
            if k3 is None:
                return ERR_CRITICAL, step, length, area, z[0], z[1], points
            k4 = _field(f, (z[0] + h * k3[0], z[1] + h * k3[1]), normalize)
            if k4 is None:
                return ERR_CRITICAL, step, length, area, z[0], z[1], points
            z1 = (
                z[0] + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                z[1] + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
            )
            v1 = _field(f, z1, normalize)
            if v1 is None:
                return ERR_CRITICAL, step, length, area, z1[0], z1[1], points
            d0 = (h * v[0], h * v[1])
            d1 = (h * v1[0], h * v1[1])
            g1 = (z1[0] - px) * nx + (z1[1] - py) * ny
            near = math.hypot(z1[0] - px, z1[1] - py) < window
            if g_prev < 0.0 <= g1 and near and length + h >= min_length:
                lo, hi = 0.0, 1.0
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    pm = _hermite(z, d0, z1, d1, mid)
                    if (pm[0] - px) * nx + (pm[1] - py) * ny < 0.0:
                        lo = mid
                    else:
                        hi = mid
                tau = 0.5 * (lo + hi)
                end = _hermite(z, d0, z1, d1, tau)
                area += _green(z, d0, z1, d1, 0.0, tau)
                length += tau * h
                if points is not None:
                    points.append(end)
                return OK, step, length, area, end[0], end[1], points
            area += _green(z, d0, z1, d1, 0.0, 1.0)
            length += h
            z, v, g_prev = z1, v1, g1
            if points is not None and step % stride == 0:
                points.append(z)
    except _KernelDomainError as exc:
        return exc.code, step, length, area, z[0], z[1], points
    return ERR_NONCOMPACT, max_steps, length, area, z[0], z[1], points
