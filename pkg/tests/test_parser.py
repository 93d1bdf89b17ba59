import math

import pytest

from symrigid import expr as E
from symrigid.parser import ParseError, parse_expr


@pytest.mark.parametrize(
    "text, binding, expected",
    [
        ("x^2 + y^2", {"x": 1, "y": 1}, 2.0),
        ("(x^2 + y^2)^2", {"x": 1, "y": 1}, 4.0),
        ("sin(theta) * x", {"theta": 0.0, "x": 5.0}, 0.0),
        ("-x^2", {"x": 3.0}, -9.0),
        ("2^-1 * x", {"x": 4.0}, 2.0),
        ("x^(-2)", {"x": 2.0}, 0.25),
        ("exp(0) + sqrt(16) + cos(pi)", {}, 4.0),
        ("1.5e1 / 3", {}, 5.0),
        ("x - y - z", {"x": 1, "y": 2, "z": 3}, -4.0),
        ("x / y / z", {"x": 8, "y": 2, "z": 2}, 2.0),
    ],
)
def test_parse_and_evaluate(text, binding, expected):
    assert parse_expr(text).eval(binding) == pytest.approx(expected, abs=1e-15)


def test_unary_minus_binds_looser_than_power():
    # -x^2 is -(x^2), as usual
    assert parse_expr("-x^2").eval({"x": -2.0}) == -4.0


def test_macros_expand():
    r = parse_expr("x^2 + y^2")
    e = parse_expr("r^2 + 1", macros={"r": r})
    assert e.free_vars() == frozenset({"x", "y"})
    assert e.eval({"x": 1.0, "y": 1.0}) == 5.0


@pytest.mark.parametrize(
    "text, column, fragment",
    [
        ("x +", 4, "expected a number"),
        ("x ^ 0.5", 5, "integer"),
        ("sin x", 5, "parentheses"),
        ("x $ y", 3, "unexpected character"),
        ("(x + y", 7, "expected ')'"),
        ("x^2^3", 4, "chained"),
        ("", 1, "empty"),
        ("x y", 3, "unexpected 'y'"),
    ],
)
def test_errors_are_located(text, column, fragment):
    with pytest.raises(ParseError) as info:
        parse_expr(text, line=7)
    err = info.value
    assert err.line == 7
    assert err.column == column
    assert fragment in err.message


def test_column_offset():
    with pytest.raises(ParseError) as info:
        parse_expr("x + $", line=3, column=11)
    assert (info.value.line, info.value.column) == (3, 15)


def test_pi_constant():
    assert parse_expr("pi").eval({}) == math.pi
    assert isinstance(parse_expr("2*pi"), E.Const)
