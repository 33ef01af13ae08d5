from conftest import chart
from diffiety.forms import (Combination, Finite, OneForm, TwoForm, bracket, contract, d, differential, evaluate,
                            lie, wedge)
from diffiety.symexpr import ONE, ZERO, Atom, Expr, symbol

x, y, u, v, f = (Atom.independent(i, n) for i, n in enumerate("xyuvf"))
X, Y, U, V, Fv = (Expr.atom(a) for a in (x, y, u, v, f))
dx, dy, du, dv, df = (OneForm.d(a) for a in (x, y, u, v, f))


def gamma_chart():
    """gamma = dv - f du - H dx - G dy in the five coordinates x, y, u, v, f."""
    H = symbol("H", Fv)
    G = symbol("G", Y, H * X + Fv * U - V, slot_names=("y", "w"))
    Hp = H.atoms[0].symbol.deriv(0)
    Gw = G.atoms[0].symbol.deriv(1)
    gamma = dv - du * Fv - dx * H - dy * G
    return gamma, H, G, Hp, Gw


def test_d_of_exact_and_constant_forms():
    assert d(dx).is_zero()
    assert d(differential(U * V * Fv)).is_zero()


def test_d_of_contact_form(free_jet):
    c = chart(free_jet, 2)
    w0, w1 = free_jet.w(0), free_jet.w(0, (0,))
    omega = c.contact_form(0)
    assert d(omega) == -wedge(OneForm.d(w1), OneForm.d(free_jet.x(0)))
    assert d(omega) == wedge(OneForm.d(free_jet.x(0)), OneForm.d(w1))
    assert omega == OneForm.d(w0) - OneForm.d(free_jet.x(0)) * Expr.atom(w1)


def test_d_gamma_modulo_gamma():
    gamma, H, G, Hp, Gw = gamma_chart()
    alpha = du + dx * Hp + dy * (Gw * (Hp * X + U))
    # the remainder is a multiple of gamma, so it vanishes modulo gamma
    assert d(gamma) - wedge(alpha, df) == wedge(gamma, dy) * Gw


def test_lie_total_derivative_shifts_contact_forms(single_pde):
    c = chart(single_pde, 3)
    D1 = c.D(0)
    for r, s in [(0, 0), (1, 0), (0, 1), (1, 1)]:
        multi = (0,) * r + (1,) * s
        assert lie(D1, c.contact_form(0, multi)) == c.contact_form(0, multi + (0,))


def test_lie_d2_beta0(single_pde):
    c = chart(single_pde, 3)
    F = single_pde.equations[0][1]
    sym = F.atoms[0].symbol
    alpha = lambda *m: c.contact_form(0, m)
    beta = lambda *m: c.contact_form(1, m)
    want = (alpha() * sym.deriv(2) + beta() * sym.deriv(3) + alpha(0) * sym.deriv(4)
            + beta(0) * sym.deriv(5) + alpha(1) * sym.deriv(6))
    assert lie(c.D(1), beta()) == want


def test_lie_x_alpha(ode_pair):
    c = chart(ode_pair, 3)
    F = ode_pair.equations[0][1].atoms[0].symbol
    X_ = c.D(0)
    want = (c.contact_form(0) * F.deriv(1) + c.contact_form(1) * F.deriv(2) + c.contact_form(2) * F.deriv(3)
            + c.contact_form(2, (0,)) * F.deriv(4))
    assert lie(X_, c.contact_form(0)) == want


def test_contract_on_wedge(free_jet):
    c = chart(free_jet, 2)
    x0, w0, w1 = free_jet.x(0), free_jet.w(0), free_jet.w(0, (0,))
    got = contract(c.D(0), wedge(OneForm.d(w0), OneForm.d(x0)))
    assert got == OneForm.d(x0) * Expr.atom(w1) - OneForm.d(w0)
    assert contract(c.D(0), TwoForm()).is_zero()


def test_cartan_formula_on_gamma():
    gamma, H, G, Hp, Gw = gamma_chart()
    Z = Finite({y: ONE, v: G})
    assert lie(Z, gamma) - differential(evaluate(gamma, Z)) == contract(Z, d(gamma))


def test_evaluate():
    gamma, *_ = gamma_chart()
    assert evaluate(gamma, Finite({u: ONE})) == -Fv
    assert evaluate(dx, Finite({x: ONE})) == ONE


def test_evaluate_contact_on_total_derivative(single_pde):
    c = chart(single_pde, 2)
    assert evaluate(c.contact_form(0, (0,)), c.D(0)) == ZERO
    assert evaluate(OneForm.d(single_pde.x(0)), c.D(0)) == ONE


def test_bracket_of_coordinate_fields():
    A = Finite({x: ONE, u: U})
    B = Finite({u: X})
    br = bracket(A, B, [x, u])
    # [A, B](u) = A(X) - B(U) = 1 - X
    assert br.on_coord(u) == ONE - X
    assert br.on_coord(x) == ZERO


def test_combination_preserves_contact(single_pde):
    c = chart(single_pde, 3)
    Z = Combination([(ONE, c.D(0)), (Expr.const(3), c.D(1))])
    assert Z.preserves_contact
    w = c.contact_form(0)
    assert lie(Z, w) == lie(c.D(0), w) + lie(c.D(1), w) * 3
    assert evaluate(lie(Z, w), c.D(1)) == ZERO


def test_printing():
    assert str(du * Fv - dv) == "f*du - dv"
    assert str(wedge(du, dx)) == "-dx^du"
