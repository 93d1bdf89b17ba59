"""Minimal symbolic expressions: exact differentiation and fast evaluation.

Trees are immutable and built through the smart constructors below, which fold
constants but perform no other simplification.  Zero-testing of derived
expressions is done numerically by the callers (see :mod:`symrigid.symplectic`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

Number = Union[int, float]


class UnboundVariable(KeyError):
    """Raised when an expression is evaluated without a value for one of its variables."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unbound variable {self.name!r}"


class DomainError(ValueError):
    """Raised for sqrt of a negative number or a negative power of zero."""


class Expr:
    __slots__ = ()

    # arithmetic sugar; every operator goes through the folding constructors
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, -1))

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    def __pow__(self, k):
        if isinstance(k, Const) and float(k.value).is_integer():
            k = int(k.value)
        if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
            raise TypeError("only integer exponents are supported (use sqrt for 1/2)")
        return power(self, int(k))

    def free_vars(self) -> frozenset[str]:
        out: set[str] = set()
        _collect_vars(self, out)
        return frozenset(out)

    def diff(self, v: str) -> "Expr":
        return diff(self, v)

    def eval(self, binding: Mapping[str, float]) -> float:
        return evaluate(self, binding)

    def subs(self, mapping: Mapping[str, "Expr | Number"]) -> "Expr":
        return substitute(self, mapping)

    def __str__(self) -> str:
        return _format(self, 0)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True, slots=True)
class Sin(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Cos(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Sqrt(Expr):
    arg: Expr


ZERO = Const(0.0)
ONE = Const(1.0)

_UNARY = (Neg, Sin, Cos, Exp, Sqrt)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool):
        return Const(float(x))
    if isinstance(x, str):
        return Var(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def const(value: Number) -> Const:
    return Const(float(value))


def var(name: str) -> Var:
    return Var(name)


def symbols(names: str | Iterable[str]) -> tuple[Var, ...]:
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    return tuple(Var(n) for n in names)


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Mul(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a: Expr, k: int) -> Expr:
    if k == 0:
        return ONE
    if k == 1:
        return a
    if isinstance(a, Const) and not (a.value == 0.0 and k < 0):
        return Const(a.value**k)
    return Pow(a, k)


def sin(a) -> Expr:
    a = as_expr(a)
    return Const(math.sin(a.value)) if isinstance(a, Const) else Sin(a)


def cos(a) -> Expr:
    a = as_expr(a)
    return Const(math.cos(a.value)) if isinstance(a, Const) else Cos(a)


def exp(a) -> Expr:
    a = as_expr(a)
    return Const(math.exp(a.value)) if isinstance(a, Const) else Exp(a)


def sqrt(a) -> Expr:
    a = as_expr(a)
    if isinstance(a, Const) and a.value >= 0.0:
        return Const(math.sqrt(a.value))
    return Sqrt(a)


def total(terms: Iterable[Expr | Number]) -> Expr:
    out: Expr = ZERO
    for t in terms:
        out = add(out, as_expr(t))
    return out


# ---------------------------------------------------------------------------
# traversal


def _collect_vars(e: Expr, out: set[str]) -> None:
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, (Add, Mul)):
        _collect_vars(e.left, out)
        _collect_vars(e.right, out)
    elif isinstance(e, Pow):
        _collect_vars(e.base, out)
    elif isinstance(e, _UNARY):
        _collect_vars(e.arg, out)


def diff(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``v``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Add):
        return add(diff(e.left, v), diff(e.right, v))
    if isinstance(e, Mul):
        return add(mul(diff(e.left, v), e.right), mul(e.left, diff(e.right, v)))
    if isinstance(e, Neg):
        return neg(diff(e.arg, v))
    if isinstance(e, Pow):
        db = diff(e.base, v)
        if _is_const(db, 0.0):
            return ZERO
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), db)
    du = diff(e.arg, v)
    if _is_const(du, 0.0):
        return ZERO
    if isinstance(e, Sin):
        return mul(cos(e.arg), du)
    if isinstance(e, Cos):
        return neg(mul(sin(e.arg), du))
    if isinstance(e, Exp):
        return mul(e, du)
    if isinstance(e, Sqrt):
        return mul(du, power(mul(Const(2.0), e), -1))
    raise TypeError(f"unknown node {type(e).__name__}")


def gradient(e: Expr, variables: Sequence[str]) -> list[Expr]:
    _check_distinct(variables)
    return [diff(e, v) for v in variables]


def hessian(e: Expr, variables: Sequence[str]) -> list[list[Expr]]:
    _check_distinct(variables)
    grad = [diff(e, v) for v in variables]
    return [[diff(g, v) for v in variables] for g in grad]


def jacobian(exprs: Sequence[Expr], variables: Sequence[str]) -> list[list[Expr]]:
    _check_distinct(variables)
    return [[diff(e, v) for v in variables] for e in exprs]


def _check_distinct(variables: Sequence[str]) -> None:
    if len(set(variables)) != len(variables):
        raise ValueError(f"variables must be distinct: {list(variables)}")


def substitute(e: Expr, mapping: Mapping[str, Expr | Number]) -> Expr:
    """Replace variables by expressions, refolding constants on the way up."""
    repl = {k: as_expr(v) for k, v in mapping.items()}
    cache: dict[Expr, Expr] = {}

    def go(node: Expr) -> Expr:
        hit = cache.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            out = node
        elif isinstance(node, Var):
            out = repl.get(node.name, node)
        elif isinstance(node, Add):
            out = add(go(node.left), go(node.right))
        elif isinstance(node, Mul):
            out = mul(go(node.left), go(node.right))
        elif isinstance(node, Neg):
            out = neg(go(node.arg))
        elif isinstance(node, Pow):
            out = power(go(node.base), node.exponent)
        elif isinstance(node, Sin):
            out = sin(go(node.arg))
        elif isinstance(node, Cos):
            out = cos(go(node.arg))
        elif isinstance(node, Exp):
            out = exp(go(node.arg))
        elif isinstance(node, Sqrt):
            out = sqrt(go(node.arg))
        else:
            raise TypeError(f"unknown node {type(node).__name__}")
        cache[node] = out
        return out

    return go(e)


def evaluate(e: Expr, binding: Mapping[str, float]) -> float:
    """Arithmetic value of ``e`` with variables taken from ``binding``."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(binding[e.name])
        except KeyError:
            raise UnboundVariable(e.name) from None
    if isinstance(e, Add):
        return evaluate(e.left, binding) + evaluate(e.right, binding)
    if isinstance(e, Mul):
        return evaluate(e.left, binding) * evaluate(e.right, binding)
    if isinstance(e, Neg):
        return -evaluate(e.arg, binding)
    if isinstance(e, Pow):
        b = evaluate(e.base, binding)
        if b == 0.0 and e.exponent < 0:
            raise DomainError(f"zero raised to negative power {e.exponent}")
        return math.pow(b, e.exponent)
    a = evaluate(e.arg, binding)
    if isinstance(e, Sin):
        return math.sin(a)
    if isinstance(e, Cos):
        return math.cos(a)
    if isinstance(e, Exp):
        try:
            return math.exp(a)
        except OverflowError:
            return math.inf
    if isinstance(e, Sqrt):
        if a < 0.0:
            raise DomainError(f"sqrt of negative value {a!r}")
        return math.sqrt(a)
    raise TypeError(f"unknown node {type(e).__name__}")


def count_nodes(e: Expr) -> int:
    if isinstance(e, (Const, Var)):
        return 1
    if isinstance(e, (Add, Mul)):
        return 1 + count_nodes(e.left) + count_nodes(e.right)
    if isinstance(e, Pow):
        return 1 + count_nodes(e.base)
    return 1 + count_nodes(e.arg)


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _format(e: Expr, ctx: int) -> str:
    if isinstance(e, Const):
        s = _fmt_number(e.value)
        return f"({s})" if e.value < 0 and ctx > _PREC_ADD else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        right = e.right
        if isinstance(right, Neg):
            s = f"{_format(e.left, _PREC_ADD)} - {_format(right.arg, _PREC_MUL)}"
        elif isinstance(right, Const) and right.value < 0:
            s = f"{_format(e.left, _PREC_ADD)} - {_fmt_number(-right.value)}"
        else:
            s = f"{_format(e.left, _PREC_ADD)} + {_format(right, _PREC_ADD + 1)}"
        prec = _PREC_ADD
    elif isinstance(e, Mul):
        s = f"{_format(e.left, _PREC_MUL)}*{_format(e.right, _PREC_NEG + 1)}"
        prec = _PREC_MUL
    elif isinstance(e, Neg):
        s = f"-{_format(e.arg, _PREC_NEG)}"
        prec = _PREC_NEG
    elif isinstance(e, Pow):
        k = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        s = f"{_format(e.base, _PREC_POW + 1)}^{k}"
        prec = _PREC_POW
    else:
        name = type(e).__name__.lower()
        return f"{name}({_format(e.arg, 0)})"
    return f"({s})" if prec < ctx else s


# ---------------------------------------------------------------------------
# compilation to a flat postfix program (consumed by symrigid.kernels)

OP_CONST, OP_VAR, OP_ADD, OP_MUL, OP_NEG, OP_POW, OP_SIN, OP_COS, OP_EXP, OP_SQRT, OP_STORE, OP_LOAD = range(12)

_UNARY_OPS = {Neg: OP_NEG, Sin: OP_SIN, Cos: OP_COS, Exp: OP_EXP, Sqrt: OP_SQRT}


def _children(node: Expr) -> tuple[Expr, ...]:
    if isinstance(node, (Add, Mul)):
        return (node.left, node.right)
    if isinstance(node, Pow):
        return (node.base,)
    if isinstance(node, (Const, Var)):
        return ()
    return (node.arg,)


def _payload(node: Expr):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Pow):
        return node.exponent
    return None


class Program:
    """Several expressions flattened into one postfix instruction stream.

    ``ops[offsets[i]:offsets[i+1]]`` computes output ``i`` from the input vector
    whose layout is ``variables``.  Structurally equal subtrees are computed
    once: the first evaluation is kept in a slot (``OP_STORE``) and later uses
    push it back (``OP_LOAD``).  Slots persist across outputs, so outputs must
    be evaluated in order.
    """

    __slots__ = ("variables", "ops", "args", "consts", "offsets", "stack_size", "n_slots", "n_out", "_pyfunc")

    def __init__(self, exprs: Sequence[Expr], variables: Sequence[str]):
        self.variables = tuple(variables)
        _check_distinct(self.variables)
        index = {v: i for i, v in enumerate(self.variables)}
        roots = [as_expr(e) for e in exprs]
        for e in roots:
            missing = e.free_vars() - index.keys()
            if missing:
                raise UnboundVariable(sorted(missing)[0])

        # hash-consing: canonical id per structurally distinct subtree
        canon_of: dict[int, int] = {}
        table: dict[tuple, int] = {}
        nodes: list[Expr] = []
        kids: list[tuple[int, ...]] = []
        for root in roots:
            todo: list[tuple[Expr, bool]] = [(root, False)]
            while todo:
                node, expanded = todo.pop()
                if id(node) in canon_of:
                    continue
                ch = _children(node)
                if not expanded and ch:
                    todo.append((node, True))
                    todo.extend((c, False) for c in reversed(ch) if id(c) not in canon_of)
                    continue
                key_kids = tuple(canon_of[id(c)] for c in ch)
                key = (type(node), _payload(node), key_kids)
                cid = table.get(key)
                if cid is None:
                    cid = table[key] = len(nodes)
                    nodes.append(node)
                    kids.append(key_kids)
                canon_of[id(node)] = cid
        uses = [0] * len(nodes)
        for kk in kids:
            for c in kk:
                uses[c] += 1
        for root in roots:
            uses[canon_of[id(root)]] += 1

        ops: list[int] = []
        args: list[int] = []
        consts: list[float] = []
        const_index: dict[float, int] = {}
        offsets = [0]
        slot_of: dict[int, int] = {}
        depth_max = 1
        for root in roots:
            depth = 0
            todo2: list[tuple[int, bool]] = [(canon_of[id(root)], False)]
            while todo2:
                cid, expanded = todo2.pop()
                node = nodes[cid]
                if cid in slot_of:
                    ops.append(OP_LOAD)
                    args.append(slot_of[cid])
                    depth += 1
                elif isinstance(node, Const):
                    if node.value not in const_index:
                        const_index[node.value] = len(consts)
                        consts.append(node.value)
                    ops.append(OP_CONST)
                    args.append(const_index[node.value])
                    depth += 1
                elif isinstance(node, Var):
                    ops.append(OP_VAR)
                    args.append(index[node.name])
                    depth += 1
                elif not expanded:
                    todo2.append((cid, True))
                    todo2.extend((c, False) for c in reversed(kids[cid]))
                    continue
                else:
                    if isinstance(node, Add):
                        ops.append(OP_ADD)
                        args.append(0)
                        depth -= 1
                    elif isinstance(node, Mul):
                        ops.append(OP_MUL)
                        args.append(0)
                        depth -= 1
                    elif isinstance(node, Pow):
                        ops.append(OP_POW)
                        args.append(node.exponent)
                    else:
                        ops.append(_UNARY_OPS[type(node)])
                        args.append(0)
                    if uses[cid] > 1:
                        slot_of[cid] = len(slot_of)
                        ops.append(OP_STORE)
                        args.append(slot_of[cid])
                depth_max = max(depth_max, depth)
            offsets.append(len(ops))
        self.ops = np.asarray(ops, dtype=np.int32)
        self.args = np.asarray(args, dtype=np.int32)
        self.consts = np.asarray(consts if consts else [0.0], dtype=np.float64)
        self.offsets = np.asarray(offsets, dtype=np.int32)
        self.stack_size = depth_max + 1
        self.n_slots = len(slot_of)
        self.n_out = len(offsets) - 1
        self._pyfunc = None

    def __call__(self, x) -> np.ndarray:
        from symrigid import kernels

        return kernels.eval_point(self, np.ascontiguousarray(x, dtype=np.float64))

    def batch(self, points) -> np.ndarray:
        """Evaluate at each row of ``points``; returns shape (n_points, n_out)."""
        from symrigid import kernels

        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        return kernels.eval_batch(self, pts)


def compile_exprs(exprs: Sequence[Expr] | Expr, variables: Sequence[str]) -> Program:
    if isinstance(exprs, Expr):
        exprs = [exprs]
    return Program(list(exprs), variables)
