"""Text format for systems, group actions, maps and experiment configs.

A file is a sequence of ``[section]`` headers followed by ``key = value``
lines; ``#`` starts a comment.  See ``docs/system-file.md`` for the grammar.
Every error carries the line and column it refers to.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from symrigid import expr as E
from symrigid.errors import SymrigidError
from symrigid.lift import ActionSpec, GroupSpec, conjugate_action, displacement, fixed_point_inverse
from symrigid.parser import ParseError, parse_expr
from symrigid.symplectic import DarbouxChart, MomentMapSystem

_HEADER = re.compile(r"^\[\s*([A-Za-z_-]+)(?:\s+([A-Za-z_][A-Za-z0-9_.-]*))?\s*\]$")
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_GROUP_FACTOR = re.compile(r"^(circle|line|torus)(?:\((\d+)\))?$")

SECTIONS_UNNAMED = ("chart", "functions", "systems")
SECTIONS_NAMED = ("action", "map", "experiment")
COMMANDS = ("analyze", "lift", "conjugate", "flow", "reduce", "rigidity-experiment", "leaf-experiment")


class SystemFileError(ParseError, SymrigidError):
    """Structural or validation error in a system file (located)."""


@dataclass
class Entry:
    key: str
    value: str
    line: int
    column: int  # column where the value starts


@dataclass
class Section:
    kind: str
    name: str | None
    line: int
    entries: list[Entry] = field(default_factory=list)

    def get(self, key: str) -> Entry | None:
        return next((e for e in self.entries if e.key == key), None)

    def label(self) -> str:
        return f"[{self.kind}{' ' + self.name if self.name else ''}]"


@dataclass
class Experiment:
    name: str
    command: str
    options: dict[str, str]
    line: int


@dataclass
class SystemFile:
    path: str
    chart: DarbouxChart | None
    functions: dict[str, E.Expr]
    systems: dict[str, MomentMapSystem]
    actions: dict[str, ActionSpec]
    maps: dict[str, tuple[E.Expr, ...]]
    experiments: dict[str, Experiment]

    def system(self, name: str | None = None) -> MomentMapSystem:
        if name is None:
            if len(self.systems) != 1:
                raise SymrigidError(f"choose a system: {sorted(self.systems)}")
            return next(iter(self.systems.values()))
        if name not in self.systems:
            raise SymrigidError(f"unknown system {name!r}; defined: {sorted(self.systems)}")
        return self.systems[name]

    def action(self, name: str) -> ActionSpec:
        if name not in self.actions:
            raise SymrigidError(f"unknown action {name!r}; defined: {sorted(self.actions)}")
        return self.actions[name]

    def map(self, name: str) -> tuple[E.Expr, ...]:
        if name not in self.maps:
            raise SymrigidError(f"unknown map {name!r}; defined: {sorted(self.maps)}")
        return self.maps[name]


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def split_sections(text: str) -> list[Section]:
    sections: list[Section] = []
    current: Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        if body.startswith("["):
            m = _HEADER.match(body)
            if m is None:
                raise SystemFileError(f"malformed section header {body!r}", lineno, indent + 1)
            kind, name = m.group(1), m.group(2)
            if kind in SECTIONS_UNNAMED:
                if name is not None:
                    raise SystemFileError(f"section [{kind}] takes no name", lineno, indent + 1)
            elif kind in SECTIONS_NAMED:
                if name is None:
                    raise SystemFileError(f"section [{kind} NAME] needs a name", lineno, indent + 1)
            else:
                raise SystemFileError(f"unknown section kind {kind!r}", lineno, indent + 2)
            current = Section(kind, name, lineno)
            sections.append(current)
            continue
        if current is None:
            raise SystemFileError("entry before any section header", lineno, indent + 1)
        if "=" not in line:
            raise SystemFileError("expected 'key = value'", lineno, indent + 1)
        eq = line.index("=")
        key = line[:eq].strip()
        if not key:
            raise SystemFileError("missing key before '='", lineno, indent + 1)
        rest = line[eq + 1 :]
        lead = len(rest) - len(rest.lstrip())
        value = rest.strip()
        if not value:
            raise SystemFileError(f"empty value for {key!r}", lineno, eq + 2)
        if current.get(key) is not None and current.kind not in ("functions", "systems"):
            raise SystemFileError(f"duplicate key {key!r} in {current.label()}", lineno, indent + 1)
        current.entries.append(Entry(key, value, lineno, eq + 2 + lead))
    return sections


def _split_list(entry: Entry, sep: str = ";") -> list[tuple[str, int]]:
    """Split a value on ``sep``; returns (piece, column) pairs."""
    out = []
    col = entry.column
    for piece in entry.value.split(sep):
        lead = len(piece) - len(piece.lstrip())
        if not piece.strip():
            raise SystemFileError(f"empty item in {entry.key!r}", entry.line, col)
        out.append((piece.strip(), col + lead))
        col += len(piece) + len(sep)
    return out


def _names(entry: Entry) -> list[str]:
    out = []
    col = entry.column
    for tok in entry.value.replace(",", " ").split():
        col = entry.value.index(tok, col - entry.column) + entry.column
        if not _NAME.match(tok):
            raise SystemFileError(f"invalid name {tok!r}", entry.line, col)
        out.append(tok)
    return out


def _int(entry: Entry, lo: int = 1) -> int:
    try:
        v = int(entry.value)
    except ValueError:
        raise SystemFileError(f"{entry.key} must be an integer, got {entry.value!r}", entry.line, entry.column) from None
    if v < lo:
        raise SystemFileError(f"{entry.key} must be at least {lo}", entry.line, entry.column)
    return v


def _expr(text: str, line: int, col: int, macros, allowed: set[str] | None, what: str) -> E.Expr:
    try:
        e = parse_expr(text, line=line, column=col, macros=macros)
    except SystemFileError:
        raise
    except ParseError as err:
        raise SystemFileError(f"{what}: {err.message}", err.line, err.column) from None
    if allowed is not None:
        extra = e.free_vars() - allowed
        if extra:
            raise SystemFileError(f"{what} uses unknown names {sorted(extra)}", line, col)
    return e


def _parse_chart(sec: Section | None) -> DarbouxChart:
    if sec is None:
        raise SystemFileError("missing [chart] section", 1, 1)
    known = {"n", "positions", "momenta", "periodic"}
    for e in sec.entries:
        if e.key not in known:
            raise SystemFileError(f"unknown chart key {e.key!r}", e.line, 1)
    n_e = sec.get("n")
    pos_e, mom_e = sec.get("positions"), sec.get("momenta")
    if pos_e is None and mom_e is None:
        if n_e is None:
            raise SystemFileError("[chart] needs n or positions/momenta", sec.line, 1)
        chart = DarbouxChart.standard(_int(n_e))
    else:
        if pos_e is None or mom_e is None:
            bad = pos_e or mom_e
            raise SystemFileError("give both positions and momenta", bad.line, 1)
        pos, mom = _names(pos_e), _names(mom_e)
        if len(pos) != len(mom):
            raise SystemFileError(f"{len(pos)} positions but {len(mom)} momenta", mom_e.line, mom_e.column)
        if n_e is not None and _int(n_e) != len(pos):
            raise SystemFileError(f"n = {n_e.value} disagrees with {len(pos)} positions", n_e.line, n_e.column)
        try:
            chart = DarbouxChart(tuple(pos), tuple(mom))
        except ValueError as exc:
            raise SystemFileError(str(exc), pos_e.line, pos_e.column) from None
    per_e = sec.get("periodic")
    if per_e is not None:
        per = _names(per_e)
        bad = [v for v in per if v not in chart.positions]
        if bad:
            raise SystemFileError(f"periodic names must be positions, got {bad}", per_e.line, per_e.column)
        chart = DarbouxChart(chart.positions, chart.momenta, frozenset(per))
    return chart


def _parse_group(entry: Entry, params_entry: Entry | None) -> GroupSpec:
    factors: list[str] = []
    col = entry.column
    for piece in entry.value.split("*"):
        m = _GROUP_FACTOR.match(piece.strip())
        if m is None:
            raise SystemFileError(f"unknown group {piece.strip()!r} (circle, torus(d), line(d), products with *)", entry.line, col)
        kind, d = m.group(1), int(m.group(2) or 1)
        if d < 1:
            raise SystemFileError("group dimension must be positive", entry.line, col)
        factors += ["circle" if kind in ("circle", "torus") else "line"] * d
        col += len(piece) + 1
    if params_entry is not None:
        params = _names(params_entry)
        if len(params) != len(factors):
            raise SystemFileError(f"group has {len(factors)} factors but {len(params)} params", params_entry.line, params_entry.column)
    else:
        nc = factors.count("circle")
        nl = factors.count("line")
        ic = il = 0
        params = []
        for f in factors:
            if f == "circle":
                ic += 1
                params.append("theta" if nc == 1 else f"theta{ic}")
            else:
                il += 1
                params.append("t" if nl == 1 else f"t{il}")
    return GroupSpec(tuple(factors), tuple(params))


def _parse_action(sec: Section, macros, actions: dict[str, ActionSpec]) -> ActionSpec:
    known = {"group", "params", "base", "periodic", "map", "conjugate", "by", "inverse", "inverse-iterations"}
    for e in sec.entries:
        if e.key not in known:
            raise SystemFileError(f"unknown action key {e.key!r}", e.line, 1)
    conj = sec.get("conjugate")
    if conj is not None:
        src = conj.value
        if src not in actions:
            raise SystemFileError(f"conjugate refers to undefined action {src!r} (define it earlier)", conj.line, conj.column)
        base_action = actions[src]
        by = sec.get("by")
        if by is None:
            raise SystemFileError("conjugate needs 'by = h_1; ...; h_m'", sec.line, 1)
        allowed = set(base_action.base)
        h = [_expr(t, by.line, c, macros, allowed, "conjugating map") for t, c in _split_list(by)]
        if len(h) != base_action.m:
            raise SystemFileError(f"conjugating map needs {base_action.m} components", by.line, by.column)
        inv = sec.get("inverse")
        if inv is not None:
            h_inv = [_expr(t, inv.line, c, macros, allowed, "inverse map") for t, c in _split_list(inv)]
            if len(h_inv) != base_action.m:
                raise SystemFileError(f"inverse map needs {base_action.m} components", inv.line, inv.column)
        else:
            it_e = sec.get("inverse-iterations")
            iterations = _int(it_e) if it_e is not None else 10
            deltas = displacement(h, base_action.base)
            h_inv = fixed_point_inverse(deltas, base_action.base, iterations)
        return conjugate_action(base_action, h, h_inv, name=sec.name)
    group_e, base_e, map_e = sec.get("group"), sec.get("base"), sec.get("map")
    for key, e in (("group", group_e), ("base", base_e), ("map", map_e)):
        if e is None:
            raise SystemFileError(f"action {sec.name!r} needs '{key} = ...'", sec.line, 1)
    group = _parse_group(group_e, sec.get("params"))
    base = _names(base_e)
    allowed = set(base) | set(group.params)
    comps = [_expr(t, map_e.line, c, macros, allowed, "action map") for t, c in _split_list(map_e)]
    if len(comps) != len(base):
        raise SystemFileError(f"action map needs {len(base)} components, got {len(comps)}", map_e.line, map_e.column)
    per_e = sec.get("periodic")
    periodic = set(_names(per_e)) if per_e else set()
    if not periodic <= set(base):
        raise SystemFileError("periodic names must be base coordinates", per_e.line, per_e.column)
    try:
        return ActionSpec(group, tuple(base), tuple(comps), frozenset(periodic), sec.name)
    except ValueError as exc:
        raise SystemFileError(str(exc), sec.line, 1) from None


def parse_system_text(text: str, path: str = "<string>") -> SystemFile:
    sections = split_sections(text)
    by_kind: dict[str, list[Section]] = {}
    for s in sections:
        by_kind.setdefault(s.kind, []).append(s)
    for kind in SECTIONS_UNNAMED:
        if len(by_kind.get(kind, [])) > 1:
            raise SystemFileError(f"section [{kind}] appears twice", by_kind[kind][1].line, 1)
    named_seen: dict[tuple[str, str], int] = {}
    for s in sections:
        if s.name is not None:
            key = (s.kind, s.name)
            if key in named_seen:
                raise SystemFileError(f"{s.label()} already defined on line {named_seen[key]}", s.line, 1)
            named_seen[key] = s.line

    fsec = (by_kind.get("functions") or [None])[0]
    csec = (by_kind.get("chart") or [None])[0]
    action_only = fsec is None and csec is None and "action" in by_kind
    functions: dict[str, E.Expr] = {}
    chart = None
    if not action_only:
        chart = _parse_chart(csec)
        allowed = set(chart.variables)
        if fsec is None or not fsec.entries:
            line = fsec.line if fsec else 1
            raise SystemFileError("the [functions] block is empty; define at least one function", line, 1)
        for e in fsec.entries:
            if not _NAME.match(e.key):
                raise SystemFileError(f"invalid function name {e.key!r}", e.line, 1)
            if e.key in functions:
                raise SystemFileError(f"function {e.key!r} defined twice", e.line, 1)
            if e.key in allowed:
                raise SystemFileError(f"function name {e.key!r} shadows a chart variable", e.line, 1)
            functions[e.key] = _expr(e.value, e.line, e.column, functions, allowed, f"function {e.key!r}")

    systems: dict[str, MomentMapSystem] = {}
    ssec = (by_kind.get("systems") or [None])[0]
    if ssec is not None and chart is None:
        raise SystemFileError("[systems] needs a [chart] and [functions]", ssec.line, 1)
    if chart is None:
        pass
    elif ssec is None:
        fs = tuple(functions.values())
        systems["main"] = MomentMapSystem(chart, fs, tuple(functions))
    else:
        for e in ssec.entries:
            if e.key in systems:
                raise SystemFileError(f"system {e.key!r} defined twice", e.line, 1)
            items = _split_list(e)
            comps = [_expr(t, e.line, c, functions, allowed, f"system {e.key!r}") for t, c in items]
            names = tuple(t if t in functions else f"{e.key.lower()}{i + 1}" for i, (t, _) in enumerate(items))
            if len(set(names)) != len(names):
                names = tuple(f"{e.key.lower()}{i + 1}" for i in range(len(items)))
            if len(comps) != chart.n:
                raise SystemFileError(f"system {e.key!r} needs {chart.n} functions, got {len(comps)}", e.line, e.column)
            systems[e.key] = MomentMapSystem(chart, tuple(comps), names)

    actions: dict[str, ActionSpec] = {}
    maps: dict[str, tuple[E.Expr, ...]] = {}
    experiments: dict[str, Experiment] = {}
    for s in sections:
        if s.kind == "action":
            actions[s.name] = _parse_action(s, functions, actions)
        elif s.kind == "map":
            comp = s.get("components")
            unknown = [e for e in s.entries if e.key != "components"]
            if unknown:
                raise SystemFileError(f"unknown map key {unknown[0].key!r}", unknown[0].line, 1)
            if comp is None:
                raise SystemFileError(f"map {s.name!r} needs 'components = ...'", s.line, 1)
            maps[s.name] = tuple(_expr(t, comp.line, c, functions, None, "map") for t, c in _split_list(comp))
    for s in sections:
        if s.kind != "experiment":
            continue
        cmd = s.get("command")
        if cmd is None:
            raise SystemFileError(f"experiment {s.name!r} needs 'command = ...'", s.line, 1)
        if cmd.value not in COMMANDS:
            raise SystemFileError(f"unknown command {cmd.value!r}; one of {', '.join(COMMANDS)}", cmd.line, cmd.column)
        opts = {e.key: e.value for e in s.entries if e.key != "command"}
        for e in s.entries:
            ref = _REFERENCES.get(e.key)
            if ref is None:
                continue
            table = {"system": systems, "action": actions, "map": maps}[ref]
            if e.value not in table:
                raise SystemFileError(f"{e.key} refers to undefined {ref} {e.value!r}", e.line, e.column)
        experiments[s.name] = Experiment(s.name, cmd.value, opts, s.line)
    return SystemFile(path, chart, functions, systems, actions, maps, experiments)


# experiment keys that name other definitions
_REFERENCES = {
    "system": "system",
    "system-hat": "system",
    "action": "action",
    "action1": "action",
    "action2": "action",
    "raw-map": "map",
    "phi": "map",
}


def load_system_file(path: str | Path) -> SystemFile:
    p = Path(path)
    return parse_system_text(p.read_text(encoding="utf-8"), str(p))


def parse_floats(text: str) -> list[float]:
    """Comma or space separated floats (points, initial conditions)."""
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise SymrigidError(f"expected numbers, got {text!r}") from None


def option(opts: dict[str, Any], key: str, default=None, kind=str):
    v = opts.get(key)
    if v is None:
        return default
    try:
        return kind(v)
    except ValueError:
        raise SymrigidError(f"option {key!r}: cannot read {v!r}") from None
