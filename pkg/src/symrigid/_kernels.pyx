# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: postfix-program evaluation, implicit midpoint, level tracing.

Mirrors ``symrigid._pykernels`` exactly (signatures, status codes, step logic).
"""

from libc.math cimport sin, cos, exp, sqrt, pow, fabs, hypot, isfinite, INFINITY
from libc.stdlib cimport malloc, free

# bumped whenever the program layout changes; the loader rejects mismatches
KERNEL_ABI = 2


cdef enum:
    OP_CONST = 0
    OP_VAR = 1
    OP_ADD = 2
    OP_MUL = 3
    OP_NEG = 4
    OP_POW = 5
    OP_SIN = 6
    OP_COS = 7
    OP_EXP = 8
    OP_SQRT = 9
    OP_STORE = 10
    OP_LOAD = 11


cdef enum:
    OK = 0
    ERR_SQRT = 1
    ERR_ZERODIV = 2
    ERR_FIXED_POINT = 3
    ERR_NONCOMPACT = 4
    ERR_CRITICAL = 5


cdef struct Prog:
    const int* ops
    const int* args
    const double* consts
    const int* offsets
    int n_out
    double* stack
    double* slots


cdef int _run(Prog* p, const double* x, double* out) noexcept nogil:
    cdef int k, i, sp, op, arg
    cdef double a
    cdef double* st = p.stack
    cdef double* sl = p.slots
    for k in range(p.n_out):
        sp = -1
        for i in range(p.offsets[k], p.offsets[k + 1]):
            op = p.ops[i]
            arg = p.args[i]
            if op == OP_CONST:
                sp += 1
                st[sp] = p.consts[arg]
            elif op == OP_VAR:
                sp += 1
                st[sp] = x[arg]
            elif op == OP_LOAD:
                sp += 1
                st[sp] = sl[arg]
            elif op == OP_STORE:
                sl[arg] = st[sp]
            elif op == OP_ADD:
                sp -= 1
                st[sp] = st[sp] + st[sp + 1]
            elif op == OP_MUL:
                sp -= 1
                st[sp] = st[sp] * st[sp + 1]
            elif op == OP_NEG:
                st[sp] = -st[sp]
            elif op == OP_POW:
                a = st[sp]
                if a == 0.0 and arg < 0:
                    return ERR_ZERODIV
                st[sp] = pow(a, <double>arg)
            elif op == OP_SIN:
                st[sp] = sin(st[sp])
            elif op == OP_COS:
                st[sp] = cos(st[sp])
            elif op == OP_EXP:
                st[sp] = exp(st[sp])
            elif op == OP_SQRT:
                if st[sp] < 0.0:
                    return ERR_SQRT
                st[sp] = sqrt(st[sp])
        out[k] = st[0] if sp >= 0 else 0.0
    return OK


cdef class _Bound:
    """Keeps the program arrays alive while a Prog struct points into them."""
    cdef const int[::1] ops
    cdef const int[::1] args
    cdef const double[::1] consts
    cdef const int[::1] offsets
    cdef Prog prog

    def __cinit__(self, program):
        self.ops = program.ops
        self.args = program.args
        self.consts = program.consts
        self.offsets = program.offsets
        self.prog.ops = &self.ops[0] if self.ops.shape[0] > 0 else NULL
        self.prog.args = &self.args[0] if self.args.shape[0] > 0 else NULL
        self.prog.consts = &self.consts[0]
        self.prog.offsets = &self.offsets[0]
        self.prog.n_out = program.n_out
        # one block: the stack, then the shared-subexpression slots
        cdef Py_ssize_t depth = program.stack_size
        cdef Py_ssize_t n_slots = program.n_slots
        self.prog.stack = <double*> malloc((depth + n_slots) * sizeof(double))
        if self.prog.stack == NULL:
            raise MemoryError()
        self.prog.slots = self.prog.stack + depth

    def __dealloc__(self):
        if self.prog.stack != NULL:
            free(self.prog.stack)


def eval_point(program, const double[::1] x, double[::1] out):
    cdef _Bound b = _Bound(program)
    cdef int code
    with nogil:
        code = _run(&b.prog, &x[0], &out[0])
    return code


def eval_batch(program, const double[:, ::1] X, double[:, ::1] out):
    cdef _Bound b = _Bound(program)
    cdef Py_ssize_t i, n = X.shape[0]
    cdef int code = OK
    with nogil:
        for i in range(n):
            code = _run(&b.prog, &X[i, 0], &out[i, 0])
            if code != OK:
                break
    return code


def implicit_midpoint(program, const double[::1] x0, double dt, long steps, double tol,
                      int maxiter, double[:, ::1] traj):
    cdef _Bound b = _Bound(program)
    cdef int d = x0.shape[0]
    cdef double* x = <double*> malloc(5 * d * sizeof(double))
    cdef double* k = x + d
    cdef double* knew = x + 2 * d
    cdef double* z = x + 3 * d
    cdef double* comp = x + 4 * d
    cdef long n = 0
    cdef int i, it = 0, worst = 0, code = OK, converged
    cdef double half = 0.5 * dt, delta, change, y, t, prev
    if x == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(d):
                x[i] = x0[i]
                comp[i] = 0.0
                traj[0, i] = x[i]
            for n in range(1, steps + 1):
                code = _run(&b.prog, x, k)
                if code != OK:
                    break
                converged = 0
                prev = INFINITY
                for it in range(1, maxiter + 1):
                    for i in range(d):
                        z[i] = x[i] + half * k[i]
                    code = _run(&b.prog, z, knew)
                    if code != OK:
                        break
                    delta = 0.0
                    for i in range(d):
                        change = fabs(dt * (knew[i] - k[i]))
                        if not change <= delta:
                            delta = change
                        k[i] = knew[i]
                    if delta <= tol:
                        converged = 1
                    if converged and (delta == 0.0 or delta >= prev):
                        break
                    prev = delta
                if code != OK:
                    break
                for i in range(d):
                    if not isfinite(k[i]):
                        converged = 0
                if not converged:
                    code = ERR_FIXED_POINT
                    break
                if it > worst:
                    worst = it
                for i in range(d):
                    y = dt * k[i] - comp[i]
                    t = x[i] + y
                    comp[i] = (t - x[i]) - y
                    x[i] = t
                    traj[n, i] = x[i]
    finally:
        free(x)
    if code != OK:
        return code, n, worst
    return OK, 0, worst


cdef inline int _field(Prog* p, double zx, double zy, bint normalize, double* v) noexcept nogil:
    cdef double z[2]
    cdef double nrm
    cdef int code
    z[0] = zx
    z[1] = zy
    code = _run(p, z, v)
    if code != OK:
        return code
    if normalize:
        nrm = hypot(v[0], v[1])
        if nrm == 0.0:
            return ERR_CRITICAL
        v[0] = v[0] / nrm
        v[1] = v[1] / nrm
    return OK


cdef inline void _hermite(double* z0, double* d0, double* z1, double* d1, double s, double* out) noexcept nogil:
    cdef double s2 = s * s
    cdef double s3 = s2 * s
    cdef double h00 = 2 * s3 - 3 * s2 + 1
    cdef double h10 = s3 - 2 * s2 + s
    cdef double h01 = -2 * s3 + 3 * s2
    cdef double h11 = s3 - s2
    out[0] = h00 * z0[0] + h10 * d0[0] + h01 * z1[0] + h11 * d1[0]
    out[1] = h00 * z0[1] + h10 * d0[1] + h01 * z1[1] + h11 * d1[1]


cdef inline double _hermite_dy(double* z0, double* d0, double* z1, double* d1, double s) noexcept nogil:
    cdef double s2 = s * s
    return (6 * s2 - 6 * s) * z0[1] + (3 * s2 - 4 * s + 1) * d0[1] + (-6 * s2 + 6 * s) * z1[1] + (3 * s2 - 2 * s) * d1[1]


cdef double _green(double* z0, double* d0, double* z1, double* d1, double a, double b) noexcept nogil:
    cdef double nodes[3]
    cdef double weights[3]
    cdef double p[2]
    cdef double acc = 0.0, w = b - a, s
    cdef int j
    nodes[0] = 0.5 - 0.5 * sqrt(0.6)
    nodes[1] = 0.5
    nodes[2] = 0.5 + 0.5 * sqrt(0.6)
    weights[0] = 5.0 / 18.0
    weights[1] = 8.0 / 18.0
    weights[2] = 5.0 / 18.0
    for j in range(3):
        s = a + w * nodes[j]
        _hermite(z0, d0, z1, d1, s, p)
        acc += weights[j] * p[0] * _hermite_dy(z0, d0, z1, d1, s)
    return acc * w


def trace_level(program, const double[::1] x0, double h, bint normalize, long max_steps,
                const double[::1] sec_point, const double[::1] sec_normal, double window,
                long stride, double min_length):
    cdef _Bound b = _Bound(program)
    cdef double z[2]
    cdef double z1[2]
    cdef double v[2]
    cdef double v1[2]
    cdef double k1[2]
    cdef double k2[2]
    cdef double k3[2]
    cdef double k4[2]
    cdef double d0[2]
    cdef double d1[2]
    cdef double pm[2]
    cdef double px = sec_point[0], py = sec_point[1], nx = sec_normal[0], ny = sec_normal[1]
    cdef double length = 0.0, area = 0.0, g_prev, g1, lo, hi, mid, tau
    cdef long step = 0
    cdef int code = OK, j
    cdef bint crossed = 0
    points = [(x0[0], x0[1])] if stride > 0 else None
    z[0] = x0[0]
    z[1] = x0[1]
    code = _field(&b.prog, z[0], z[1], normalize, v)
    if code != OK:
        return code, 0, 0.0, 0.0, z[0], z[1], points
    g_prev = (z[0] - px) * nx + (z[1] - py) * ny
    for step in range(1, max_steps + 1):
        with nogil:
            k1[0] = v[0]
            k1[1] = v[1]
            code = _field(&b.prog, z[0] + 0.5 * h * k1[0], z[1] + 0.5 * h * k1[1], normalize, k2)
            if code == OK:
                code = _field(&b.prog, z[0] + 0.5 * h * k2[0], z[1] + 0.5 * h * k2[1], normalize, k3)
            if code == OK:
                code = _field(&b.prog, z[0] + h * k3[0], z[1] + h * k3[1], normalize, k4)
            if code == OK:
                z1[0] = z[0] + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
                z1[1] = z[1] + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
                code = _field(&b.prog, z1[0], z1[1], normalize, v1)
            if code == OK:
                d0[0] = h * v[0]
                d0[1] = h * v[1]
                d1[0] = h * v1[0]
                d1[1] = h * v1[1]
                g1 = (z1[0] - px) * nx + (z1[1] - py) * ny
                if (g_prev < 0.0 <= g1 and hypot(z1[0] - px, z1[1] - py) < window
                        and length + h >= min_length):
                    lo = 0.0
                    hi = 1.0
                    for j in range(60):
                        mid = 0.5 * (lo + hi)
                        _hermite(z, d0, z1, d1, mid, pm)
                        if (pm[0] - px) * nx + (pm[1] - py) * ny < 0.0:
                            lo = mid
                        else:
                            hi = mid
                    tau = 0.5 * (lo + hi)
                    _hermite(z, d0, z1, d1, tau, pm)
                    area += _green(z, d0, z1, d1, 0.0, tau)
                    length += tau * h
                    crossed = 1
                else:
                    area += _green(z, d0, z1, d1, 0.0, 1.0)
                    length += h
                    z[0] = z1[0]
                    z[1] = z1[1]
                    v[0] = v1[0]
                    v[1] = v1[1]
                    g_prev = g1
        if code != OK:
            return code, step, length, area, z[0], z[1], points
        if crossed:
            if points is not None:
                points.append((pm[0], pm[1]))
            return OK, step, length, area, pm[0], pm[1], points
        if points is not None and step % stride == 0:
            points.append((z[0], z[1]))
    return ERR_NONCOMPACT, max_steps, length, area, z[0], z[1], points
