"""Infix expression syntax.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom ("^" integer)?
    integer:= "-"? DIGITS | "(" "-"? DIGITS ")"
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC   := sin | cos | exp | sqrt

``pi`` is a reserved constant.  ``/`` is sugar for multiplication by a ``-1`` power.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping

from symrigid import expr as E

_FUNCS = {"sin": E.sin, "cos": E.cos, "exp": E.exp, "sqrt": E.sqrt}
_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass
class _Tok:
    kind: str
    text: str
    col: int  # 1-based


def _tokenize(text: str, line: int, col0: int) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", line, col0 + bad + 1)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), col0 + start + 1))
        pos = m.end()
    toks.append(_Tok("end", "", col0 + len(text) + 1))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok], line: int, macros: Mapping[str, E.Expr]):
        self.toks = toks
        self.i = 0
        self.line = line
        self.macros = macros

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise ParseError(msg, self.line, tok.col)

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text:
            what = "end of input" if tok.kind == "end" else repr(tok.text)
            self.fail(f"expected {text!r}, found {what}")
        return self.take()

    def parse(self) -> E.Expr:
        if self.peek().kind == "end":
            self.fail("empty expression")
        e = self.expr()
        if self.peek().kind != "end":
            self.fail(f"unexpected {self.peek().text!r}")
        return e

    def expr(self) -> E.Expr:
        e = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> E.Expr:
        e = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self) -> E.Expr:
        if self.peek().text == "-":
            self.take()
            return E.neg(self.unary())
        if self.peek().text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> E.Expr:
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            k = self.integer()
            if self.peek().text == "^":
                self.fail("chained '^' is ambiguous; use parentheses")
            return E.power(base, k)
        return base

    def integer(self) -> int:
        paren = self.peek().text == "("
        if paren:
            self.take()
        sign = 1
        if self.peek().text == "-":
            self.take()
            sign = -1
        tok = self.peek()
        if tok.kind != "num" or not tok.text.isdigit():
            self.fail("exponent must be an integer (use sqrt for square roots)")
        self.take()
        if paren:
            self.expect(")")
        return sign * int(tok.text)

    def atom(self) -> E.Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            return E.const(float(tok.text))
        if tok.kind == "name":
            self.take()
            if tok.text in _FUNCS:
                if self.peek().text != "(":
                    self.fail(f"function {tok.text} needs an argument in parentheses")
                self.take()
                arg = self.expr()
                self.expect(")")
                return _FUNCS[tok.text](arg)
            if tok.text == "pi":
                return E.const(math.pi)
            if tok.text in self.macros:
                return self.macros[tok.text]
            return E.var(tok.text)
        if tok.text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        self.fail(f"expected a number, name or '(', found {what}")
        raise AssertionError  # unreachable


def parse_expr(
    text: str,
    *,
    line: int = 1,
    column: int = 1,
    macros: Mapping[str, E.Expr] | None = None,
) -> E.Expr:
    """Parse ``text``; reported columns are offset so that ``text[0]`` sits at ``column``.

    Names found in ``macros`` are replaced by the mapped expression.
    """
    toks = _tokenize(text, line, column - 1)
    return _Parser(toks, line, macros or {}).parse()
