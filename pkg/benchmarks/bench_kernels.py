"""Compiled vs pure-Python kernels on the three hot loops.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints the best wall time per backend and the speedup.  Both backends must
agree to 1e-12 on every workload, otherwise the script exits with status 1.
"""

import argparse
import sys
import time

import numpy as np

from symrigid import expr as E
from symrigid import kernels
from symrigid.flows import action_variable_1dof
from symrigid.symplectic import DarbouxChart, hamiltonian_vector_field

x, y = E.symbols("x y")
x1, x2, y1, y2 = E.symbols("x1 x2 y1 y2")
C1, C2 = DarbouxChart.standard(1), DarbouxChart.standard(2)


def workloads():
    r1, r2 = x1**2 + y1**2, x2**2 + y2**2
    G = [r1**2, r2, E.exp(-r1) * E.cos(x2) + y1 * y2]
    prog = E.compile_exprs(G + [E.diff(g, v) for g in G for v in C2.variables], C2.variables)
    X = np.random.default_rng(0).uniform(-1, 1, (20_000, 4))
    quartic = hamiltonian_vector_field((x**2 + y**2) ** 2 + 0.1 * x**3, C1).program()

    def batch(be):
        return kernels.eval_batch(prog, X, backend=be)

    def midpoint(be):
        return kernels.implicit_midpoint(quartic, np.array([0.8, 0.0]), 1e-3, 5_000, backend=be)[0]

    def action(be):
        # level tracing goes through the module-level backend
        kernels.use_backend(next(k for k, v in kernels.available_backends().items() if v is be))
        return np.array([action_variable_1dof(x**2 + 0.5 * y**2 + 0.1 * x**3, c) for c in (0.2, 0.5, 1.0)])

    return {"eval_batch 20000x27": batch, "implicit_midpoint 5000 steps": midpoint, "action via level tracing": action}


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels unavailable (run: python3 setup.py build_ext --inplace); timing python only")
    ok = True
    print(f"{'workload':32s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, fn in workloads().items():
        tp, ref = best_of(lambda: fn(backends["python"]), args.repeat)
        if "compiled" in backends:
            tc, got = best_of(lambda: fn(backends["compiled"]), args.repeat)
            agree = np.allclose(got, ref, rtol=0, atol=1e-12)
            ok &= agree
            print(f"{name:32s} {tp:10.4f} {tc:10.4f} {tp / tc:7.1f}x{'' if agree else '  MISMATCH'}")
        else:
            print(f"{name:32s} {tp:10.4f} {'-':>10s} {'-':>8s}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
