import pytest

from conftest import SYSTEMS
from diffiety.dsl import parse, parse_file, to_dsl
from diffiety.errors import DSLSyntaxError, NotOrthonomic, UndeclaredSymbol

ODE = """\
independent x
dependent u, v, w
function F, G
u' = F(x,u,v,w,w'); v' = G(x,u,v,w,w')
"""


def test_ode_pair_text():
    spec = parse(ODE)
    assert (spec.n, spec.m) == (1, 3)
    assert [p.display() for p, _ in spec.equations] == ["u_x", "v_x"]
    assert str(spec.equations[0][1]) == "F"


def test_single_pde_text():
    spec = parse("independent x, y\ndependent u, v\nfunction F\nv_y = F(x,y,u,v,u_x,v_x,u_y)\n")
    assert (spec.n, spec.m) == (2, 2)
    assert spec.equations[0][0].display() == "v_y"


def test_free_jet_text():
    spec = parse("independent x\ndependent w\n")
    assert spec.equations == () and spec.m == 1


def test_bracket_and_prime_spellings():
    a = parse("independent x, y\ndependent u\nu[1,1] = u[2,0]^2\n")
    b = parse("independent x, y\ndependent u\nu_xy = u_xx**2\n")
    assert a == b
    c = parse("independent t\ndependent q\nq'' = -q\n")
    assert c.equations[0][0].order == 2


@pytest.mark.parametrize("path", sorted(SYSTEMS.glob("*.dsl")), ids=lambda p: p.stem)
def test_round_trip(path):
    spec = parse_file(path)
    again = parse(to_dsl(spec))
    assert again == spec
    assert to_dsl(again) == to_dsl(spec)


def test_implicit_symbol_round_trip():
    spec = parse_file(SYSTEMS / "noncontrollable.dsl")
    text = to_dsl(spec)
    assert "implicit f(u_x, v_x)" in text


@pytest.mark.parametrize("src, exc, line, col", [
    ("independent x\ndependent u\nu_x = q(x)\n", UndeclaredSymbol, 3, 7),
    ("independent x\ndependent u\nu_x = z\n", UndeclaredSymbol, 3, 7),
    ("independent x\ndependent u\nu_x = (x\n", DSLSyntaxError, 3, 1),
    ("independent x\ndependent u\nu_x = u_xx\n", NotOrthonomic, 3, 1),
    ("independent x\ndependent u\nu_x = 1; u_x = 2\n", NotOrthonomic, 3, 10),
    ("independent x\ndependent u\nu_x + 1 = 0\n", NotOrthonomic, 3, 1),
    ("dependent u\n", DSLSyntaxError, 1, 1),
])
def test_located_errors(src, exc, line, col):
    with pytest.raises(exc) as info:
        parse(src)
    assert (info.value.line, info.value.col) == (line, col)


def test_comments_and_blank_lines():
    spec = parse("# header\n\nindependent x  # time\ndependent u\n\nu' = x  # forced\n")
    assert str(spec.equations[0][1]) == "x"
