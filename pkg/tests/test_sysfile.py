import pytest

from symrigid.sysfile import SystemFileError, parse_floats, parse_system_text

GOOD = """
# comment line
[chart]
n = 2

[functions]
r1 = x1^2 + y1^2   # trailing comment
r2 = x2^2 + y2^2

[systems]
G = r1^2 ; r2

[action rot]
group = circle
base = u v
map = u*cos(theta) + v*sin(theta) ; -u*sin(theta) + v*cos(theta)

[action rot2]
conjugate = rot
by = u + 0.01*v ; v
inverse = u - 0.01*v ; v

[map ident]
components = u ; v

[experiment go]
command = rigidity-experiment
system = G
"""


def test_parse_good_file():
    sf = parse_system_text(GOOD)
    assert sf.chart.variables == ("x1", "x2", "y1", "y2")
    G = sf.system("G")
    assert [str(f) for f in G.functions] == ["(x1^2 + y1^2)^2", "x2^2 + y2^2"]
    assert sf.action("rot").group.params == ("theta",)
    assert sf.action("rot2").m == 2
    assert len(sf.map("ident")) == 2
    assert sf.experiments["go"].command == "rigidity-experiment"


def test_default_system_collects_all_functions():
    sf = parse_system_text("[chart]\nn = 1\n[functions]\nh = x^2 + y^2\n")
    assert list(sf.systems) == ["main"]
    assert sf.system().names == ("h",)


def test_action_only_file():
    sf = parse_system_text("[action a]\ngroup = line\nbase = q\nmap = q + t\n")
    assert sf.chart is None and sf.systems == {}


def test_named_chart_and_periodic():
    sf = parse_system_text("[chart]\npositions = q\nmomenta = p\nperiodic = q\n[functions]\nh = p^2/2 - cos(q)\n")
    assert sf.chart.periodic == frozenset({"q"})


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("[chart]\nn = 1\n[functions]\n", 3, "empty"),
        ("[chart]\nn = 1\n", 1, "empty"),
        ("[chart]\nn = 1\n[functions]\nf = x^2 +\n", 4, "expected a number"),
        ("[chart]\nn = 1\n[functions]\nf = x*z\n", 4, "unknown names"),
        ("[chart]\nn = 0\n[functions]\nf = x\n", 2, "at least 1"),
        ("[chart]\nn = 1\n[functions]\nx = y\n", 4, "shadows"),
        ("[chart]\nn = 1\n[wibble]\n", 3, "unknown section"),
        ("n = 1\n", 1, "before any section"),
        ("[chart]\nn = 1\nn = 2\n", 3, "duplicate key"),
        ("[chart]\nn = 2\n[functions]\nf = x1\n[systems]\nS = f\n", 6, "needs 2 functions"),
        ("[chart]\nn = 1\n[functions]\nf = x\n[experiment e]\ncommand = analyze\nsystem = nope\n", 7, "undefined system"),
        ("[chart]\nn = 1\n[functions]\nf = x\n[experiment e]\ncommand = dance\n", 6, "unknown command"),
        ("[action a]\ngroup = sphere\nbase = q\nmap = q\n", 2, "unknown group"),
        ("[action a]\ngroup = circle\nbase = q\nmap = q + t\n", 4, "unknown names"),
        ("[action a]\nconjugate = b\nby = q\n", 2, "undefined action"),
        ("[chart]\nn = 1\n[functions]\nf = x\n[chart]\nn = 1\n", 5, "appears twice"),
        ("[chart]\nn = 1\n[functions]\nf = x\ng = f +\n", 5, "expected a number"),
    ],
)
def test_errors_are_located(text, line, fragment):
    with pytest.raises(SystemFileError) as info:
        parse_system_text(text)
    assert info.value.line == line
    assert fragment in str(info.value)


def test_expression_error_column_points_into_the_line():
    with pytest.raises(SystemFileError) as info:
        parse_system_text("[chart]\nn = 1\n[functions]\nf = x + $y\n")
    assert (info.value.line, info.value.column) == (4, 9)


def test_parse_floats():
    assert parse_floats("1, 2 3.5") == [1.0, 2.0, 3.5]
    with pytest.raises(Exception):
        parse_floats("1, two")
