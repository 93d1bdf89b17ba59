"""Command line entry point: ``symrigid COMMAND FILE ...``.

Exit codes: 0 when every requested check passes, 2 when a hypothesis or
precondition refuses the input, 1 for failed checks and errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np

from symrigid import expr as E
from symrigid import flows, lift, rigidity, singularity, svg
from symrigid.errors import (
    ActionAxiomViolated,
    CloudTooSpread,
    HypothesisViolated,
    Inconclusive,
    NotClose,
    NotInvariant,
    NotReducible,
    SymrigidError,
)
from symrigid.parser import ParseError
from symrigid.report import make_report, to_json, to_text
from symrigid.symplectic import check_involution
from symrigid.sysfile import SystemFile, load_system_file, parse_floats

EXIT = {"pass": 0, "fail": 1, "error": 1, "refused": 2}

# per-command defaults; flags and experiment options override them
DEFAULTS: dict[str, dict[str, Any]] = {
    "analyze": {"tol": 1e-9, "seed": 0, "grid": 5, "domain": 2.0, "samples": 100, "max-classes": 16},
    "lift": {"tol": 1e-9, "seed": 0, "samples": 64, "param-samples": 32},
    "conjugate": {"tol": 1e-6, "seed": 0, "quad-n": 64, "domain": 1.0, "samples": 1000, "closeness": 0.2},
    "flow": {"tol": 1e-8, "seed": 0, "dt": 1e-3, "steps": 1000},
    "reduce": {"tol": 1e-9, "seed": 0, "grid": 9},
    "rigidity-experiment": {"tol": 1e-9, "seed": 0},
    "leaf-experiment": {"tol": 1e-6, "seed": 0, "samples": 12},
}

_NUMERIC = {"tol": float, "seed": int, "grid": int, "domain": float, "samples": int, "quad-n": int, "dt": float,
            "steps": int, "closeness": float, "param-samples": int, "max-classes": int, "c": float}


class Outcome:
    def __init__(self, status: str, body: dict[str, Any], csv_rows: list[list[Any]] | None = None, svg_text: str | None = None):
        self.status, self.body, self.csv_rows, self.svg_text = status, body, csv_rows, svg_text


def _coerce(opts: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for k, v in opts.items():
        kind = _NUMERIC.get(k)
        if kind is not None and isinstance(v, str):
            try:
                v = kind(v)
            except ValueError:
                raise SymrigidError(f"option {k!r}: cannot read {v!r} as {kind.__name__}") from None
        out[k] = v
    return out


def _status(passed: bool) -> str:
    return "pass" if passed else "fail"


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(sf: SystemFile, o: dict[str, Any]) -> Outcome:
    names = [o["system"]] if o.get("system") else list(sf.systems)
    if not names:
        raise SymrigidError("the file defines no system to analyze")
    body: dict[str, Any] = {"systems": {}}
    summary: dict[str, list[str]] = {}
    ok = True
    for name in names:
        system = sf.system(name)
        inv = check_involution(system, samples=o["samples"], tol=o["tol"])
        ok &= inv.passed
        pts, ranks = singularity.scan_singular_points(system, box=o["domain"], grid=o["grid"])
        classes: dict[str, dict[str, Any]] = {}
        fixed: list[dict[str, Any]] = []
        for z, k in zip(pts, ranks):
            try:
                rep = singularity.classify_point(system, z, seed=o["seed"])
                d = rep.to_dict()
                key = f"rank {k}, " + ("degenerate" if rep.degenerate else f"williamson {tuple(rep.williamson)}")
            except Inconclusive as exc:
                d = {"point": z.tolist(), "rank": int(k), "inconclusive": str(exc)}
                key = f"rank {k}, inconclusive"
                ok = False
            cls = classes.setdefault(key, {"count": 0, "example": d})
            cls["count"] += 1
            if k == 0:
                fixed.append(d)
        lines = []
        for d in fixed:
            what = "degenerate" if d.get("degenerate") else f"non-degenerate, type {tuple(d['williamson'])}" if d.get("williamson") else "inconclusive"
            lines.append(f"fixed point {d['point']}: {what}")
        entry: dict[str, Any] = {
            "functions": [str(f) for f in system.functions],
            "involution": inv.to_dict(),
            "scan": {
                "box": o["domain"],
                "grid": o["grid"],
                "singular_grid_points": int(len(pts)),
                "classes": [dict(label=k, **v) for k, v in sorted(classes.items())][: o["max-classes"]],
            },
            "fixed_points": fixed,
        }
        if o.get("point"):
            z = np.array(parse_floats(str(o["point"])))
            rep = singularity.classify_point(system, z, seed=o["seed"])
            entry["point"] = {"point": z.tolist(), "regular": True} if rep is None else rep.to_dict()
            lines.append(f"point {z.tolist()}: " + ("regular" if rep is None else "degenerate" if rep.degenerate else f"type {tuple(rep.williamson)}"))
        body["systems"][name] = entry
        summary[name] = lines
    body["classification_summary"] = summary
    return Outcome(_status(ok), body)


def cmd_lift(sf: SystemFile, o: dict[str, Any]) -> Outcome:
    action = sf.action(o["action"])
    axioms = lift.check_action_axioms(action, seed=o["seed"])
    if not axioms.passed:
        raise ActionAxiomViolated(f"action {action.name!r} fails the action axioms: {axioms}")
    if o.get("raw-map"):
        comps = sf.map(o["raw-map"])
        lifted = lift.lift_from_components(action, comps)
        extra = set().union(*(c.free_vars() for c in lifted.components)) - set(lifted.chart.variables) - set(action.group.params)
        if extra:
            raise SymrigidError(f"raw map uses unknown names {sorted(extra)}; lifted coordinates are {list(lifted.chart.variables)}")
        origin = f"user map {o['raw-map']!r}"
    else:
        lifted = lift.cotangent_lift(action, seed=o["seed"])
        origin = "cotangent lift"
    inv = lift.verify_lift_invariance(lifted, param_samples=o["param-samples"], point_samples=o["samples"], tol=o["tol"], seed=o["seed"])
    closure = lift.hamiltonian_closure_residual(lifted, samples=500, tol=o["tol"], seed=o["seed"])
    body = {
        "action": action.name,
        "group": action.group.describe(),
        "lift": origin,
        "coordinates": list(lifted.chart.variables),
        "lifted_map": [str(c) for c in lifted.components] if lifted.components is not None else "numeric (D rho^-T p)",
        "moment_map": {p: str(mu) for p, mu in zip(action.group.params, lift.moment_map_of_lift(lifted))},
        "invariance": inv.to_dict(),
        "moment_map_closure": closure.to_dict(),
    }
    return Outcome(_status(inv.passed and closure.passed), body)


def cmd_conjugate(sf: SystemFile, o: dict[str, Any]) -> Outcome:
    rho1, rho2 = sf.action(o["action1"]), sf.action(o["action2"])
    body: dict[str, Any] = {"action1": rho1.name, "action2": rho2.name, "formula": rigidity.AVERAGING_FORMULA}
    if o.get("phi"):
        res = rigidity.verify_equivalence_suite(
            rho1, rho2, sf.map(o["phi"]), samples=o["samples"], domain=o["domain"], tol=o["tol"], seed=o["seed"]
        )
        body["phi"] = f"user map {o['phi']!r}"
        body["result"] = res.to_dict()
        return Outcome(_status(res.passed), body)
    try:
        res = rigidity.palais_average(rho1, rho2, o["quad-n"], o["domain"], closeness=o["closeness"], seed=o["seed"])
        # convergence table on a fixed sample set
        rng = np.random.default_rng(o["seed"] + 7)
        X = rigidity.sample_base_domain(rho1, 200, o["domain"], o["seed"] + 8)
        G = rho1.group.sample(200, rng)
        rows = []
        n = 2
        while n <= o["quad-n"]:
            avg = rigidity.AveragedMap(rho1, rho2, rigidity.GroupQuadrature(rho1.group, n))
            rows.append([n, rigidity.conjugation_residual(rho1, rho2, avg, X, G)])
            n *= 2
        res = rigidity.verify_equivalence_suite(
            rho1, rho2, res.phi, samples=o["samples"], domain=o["domain"], tol=o["tol"], seed=o["seed"], result=res
        )
    except (NotClose, CloudTooSpread) as exc:
        body["refusal"] = f"{type(exc).__name__}: {exc}"
        return Outcome("refused", body)
    body["result"] = res.to_dict()
    body["convergence"] = {"source": "conjugation_base at 200 fixed samples", "quad_n": [r[0] for r in rows], "residual": [r[1] for r in rows]}
    plot = svg.line_plot(
        [("residual_conj", [r[0] for r in rows], [r[1] for r in rows])],
        title=f"{rho1.name} vs {rho2.name}",
        xlabel="quadrature nodes N",
        ylabel="sup residual",
        logx=True,
        logy=True,
    ) if rows else None
    return Outcome(_status(res.passed), body, [["quad_n", "residual_conj"]] + rows, plot)


def _hamiltonian(system, sel):
    if sel is None:
        return 0
    if sel in system.names:
        return system.names.index(sel)
    try:
        i = int(sel)
    except ValueError:
        raise SymrigidError(f"unknown function {sel!r}; choose from {list(system.names)}") from None
    if not 0 <= i < system.n:
        raise SymrigidError(f"function index {i} out of range")
    return i


def cmd_flow(sf: SystemFile, o: dict[str, Any]) -> Outcome:
    system = sf.system(o.get("system"))
    if not o.get("x0"):
        raise SymrigidError("flow needs an initial point: --x0 'x1,...,y_n'")
    x0 = np.array(parse_floats(str(o["x0"])))
    if x0.shape != (system.chart.dim,):
        raise SymrigidError(f"x0 needs {system.chart.dim} coordinates")
    i = _hamiltonian(system, o.get("hamiltonian"))
    H = system.functions[i]
    traj = flows.symplectic_integrate(H, x0, o["dt"], o["steps"], chart=system.chart)
    vals = system.program().batch(traj.states)
    drift = float(np.abs(vals[:, i] - vals[0, i]).max())
    energy = {"check": "energy_drift", "residual": drift, "tol": o["tol"], "passed": drift <= o["tol"], "n_samples": len(traj)}
    conserved = flows.conserved_along_flow(system, traj, tol=o["tol"])
    body = {
        "hamiltonian": {"name": system.names[i], "expr": str(H)},
        "scheme": traj.scheme,
        "x0": x0.tolist(),
        "end": traj.end.tolist(),
        "energy": energy,
        "conserved": conserved.to_dict(),
        "max_fixed_point_iterations": traj.max_iterations,
    }
    header = ["t", *system.chart.variables, *system.names]
    rows = [[float(t), *map(float, s), *map(float, v)] for t, s, v in zip(traj.times, traj.states, vals)]
    plot = svg.curve_plot(
        traj.states[:, 0].tolist(),
        traj.states[:, system.n].tolist(),
        title=f"flow of {system.names[i]}",
        xlabel=system.chart.positions[0],
        ylabel=system.chart.momenta[0],
    )
    return Outcome(_status(energy["passed"] and conserved.passed), body, [header] + rows, plot)


def cmd_reduce(sf: SystemFile, o: dict[str, Any]) -> Outcome:
    system = sf.system(o.get("system"))
    try:
        red = flows.s1_reduce(system, grid=o["grid"], tol=o["tol"], seed=o["seed"])
    except (NotReducible, NotInvariant) as exc:
        return Outcome("refused", {"refusal": f"{type(exc).__name__}: {exc}"})
    return Outcome(_status(red.passed), {"reduced_system": red.to_dict()})


def cmd_rigidity(sf: SystemFile, o: dict[str, Any]) -> Outcome:
    system = sf.system(o.get("system"))
    verdict = flows.degenerate_rigidity_experiment(system, tol=o["tol"], seed=o["seed"])
    body = verdict.to_dict()
    body["revalidated"] = verdict.revalidate()
    if verdict.profile is not None:
        p = verdict.profile
        body["radial_profile"] = {
            "block": list(p.block),
            "nodes": int(len(p.s_nodes)),
            "fit": {"check": "profile_fit", "residual": p.fit_residual, "tol": 1e-7, "passed": p.fit_residual <= 1e-7, "n_samples": int(len(p.s_nodes))},
            "validation": {"check": "profile_validation", "residual": p.validation_residual, "tol": 1e-7, "passed": p.validation_residual <= 1e-7, "n_samples": 200},
            "slope_at_zero": p.slope_at_zero,
        }
    status = {"RIGID": "pass", "HYPOTHESIS-FAILED": "refused"}.get(verdict.verdict, "fail")
    if status == "pass" and not body["revalidated"]:
        status = "fail"
    return Outcome(status, body)


def cmd_leaf(sf: SystemFile, o: dict[str, Any]) -> Outcome:
    F = sf.system(o.get("system"))
    if not o.get("system-hat"):
        raise SymrigidError("leaf-experiment needs --system-hat")
    Fh = sf.system(o["system-hat"])
    if "c" not in o:
        raise SymrigidError("leaf-experiment needs a level --c")
    try:
        rep = rigidity.elliptic_leaf_rigidity_experiment(F, Fh, o["c"], tol=o["tol"], samples=o["samples"], seed=o["seed"])
    except HypothesisViolated as exc:
        return Outcome("refused", {"refusal": f"HypothesisViolated: {exc}"})
    return Outcome(_status(rep.passed), {"leaf": rep.to_dict()})


COMMANDS: dict[str, Callable[[SystemFile, dict[str, Any]], Outcome]] = {
    "analyze": cmd_analyze,
    "lift": cmd_lift,
    "conjugate": cmd_conjugate,
    "flow": cmd_flow,
    "reduce": cmd_reduce,
    "rigidity-experiment": cmd_rigidity,
    "leaf-experiment": cmd_leaf,
}


def execute(command: str, sf: SystemFile, options: dict[str, Any]) -> tuple[dict[str, Any], Outcome]:
    opts = dict(DEFAULTS[command])
    opts.update({k: v for k, v in options.items() if v is not None})
    opts = _coerce(opts)
    out = COMMANDS[command](sf, opts)
    config = {"file": sf.path, **opts}
    return make_report(command, config, out.body, out.status), out


def _write_csv(path: str, rows: list[list[Any]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _emit(report: dict[str, Any], fmt: str) -> None:
    sys.stdout.write(to_json(report) if fmt == "json" else to_text(report))


def _worst(statuses: list[str]) -> str:
    for s in ("error", "fail", "refused"):
        if s in statuses:
            return s
    return "pass"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="system file")
    common.add_argument("--tol", type=float, help="residual tolerance of the main checks")
    common.add_argument("--seed", type=int, help="seed for all sampling")
    common.add_argument("--grid", type=int, help="grid points per axis (analyze scan, reduce fit)")
    common.add_argument("--quad-n", dest="quad-n", type=int, help="quadrature nodes per circle factor")
    common.add_argument("--domain", type=float, help="half-width of the sampled box / ball radius")
    common.add_argument("--samples", type=int, help="number of random samples")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--csv", help="write plot data (CSV) here")
    common.add_argument("--svg", help="write a static SVG plot here")

    p = argparse.ArgumentParser(prog="symrigid", description="Lifts, moment maps, Williamson types and rigidity checks.")
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", parents=[common], help="involution, singular-point scan and classification")
    a.add_argument("--system")
    a.add_argument("--point", help="also classify this point (comma separated)")
    a = sub.add_parser("lift", parents=[common], help="cotangent lift, lambda invariance and moment map")
    a.add_argument("action")
    a.add_argument("--raw-map", dest="raw-map", help="check this user-supplied lifted map instead")
    a = sub.add_parser("conjugate", parents=[common], help="average two close actions and verify the conjugacy")
    a.add_argument("action1")
    a.add_argument("action2")
    a.add_argument("--phi", help="verify this user-supplied conjugacy instead of averaging")
    a.add_argument("--closeness", type=float)
    a = sub.add_parser("flow", parents=[common], help="implicit midpoint flow of one function")
    a.add_argument("--system")
    a.add_argument("--hamiltonian", help="function name or index (default: the first)")
    a.add_argument("--x0", help="initial point, comma separated")
    a.add_argument("--dt", type=float)
    a.add_argument("--steps", type=int)
    a = sub.add_parser("reduce", parents=[common], help="S1 reduction fit in the block invariants")
    a.add_argument("--system")
    a = sub.add_parser("rigidity-experiment", parents=[common], help="degenerate-singularity rigidity verdict")
    a.add_argument("--system")
    a = sub.add_parser("leaf-experiment", parents=[common], help="match an elliptic leaf to a nearby system")
    a.add_argument("--system")
    a.add_argument("--system-hat", dest="system-hat")
    a.add_argument("--c", type=float)
    a = sub.add_parser("run", parents=[common], help="run the [experiment] blocks of a file")
    a.add_argument("--only", action="append", help="run only this experiment (repeatable)")
    return p


_NOT_OPTIONS = {"command", "file", "format", "csv", "svg", "only"}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in _NOT_OPTIONS and v is not None}
    try:
        sf = load_system_file(args.file)
        if args.command != "run":
            report, out = execute(args.command, sf, flags)
            if args.csv:
                if out.csv_rows is None:
                    raise SymrigidError(f"{args.command} produces no CSV data")
                _write_csv(args.csv, out.csv_rows)
            if args.svg:
                if out.svg_text is None:
                    raise SymrigidError(f"{args.command} produces no plot")
                Path(args.svg).write_text(out.svg_text, encoding="utf-8")
            _emit(report, args.format)
            return EXIT[out.status]
        names = args.only or list(sf.experiments)
        if not names:
            raise SymrigidError("the file defines no [experiment] blocks")
        reports: dict[str, Any] = {}
        for name in names:
            if name not in sf.experiments:
                raise SymrigidError(f"unknown experiment {name!r}; defined: {sorted(sf.experiments)}")
            exp = sf.experiments[name]
            # experiment options override command-line flags
            opts = {**flags, **exp.options}
            report, out = execute(exp.command, sf, opts)
            reports[name] = report
            for kind, data, suffix in (("csv", out.csv_rows, ".csv"), ("svg", out.svg_text, ".svg")):
                target = getattr(args, kind)
                if target and data is not None:
                    Path(target).mkdir(parents=True, exist_ok=True)
                    dest = str(Path(target) / f"{name}{suffix}")
                    _write_csv(dest, data) if kind == "csv" else Path(dest).write_text(data, encoding="utf-8")
        status = _worst([r["status"] for r in reports.values()])
        _emit(make_report("run", {"file": sf.path, **flags}, {"experiments": reports}, status), args.format)
        return EXIT[status]
    except (ParseError, SymrigidError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
