import pytest

from conftest import chart, load
from diffiety.ctrl import (Analysis, GoodFiltration, Settings, adj_closure, composition_series, derived_filtration,
                           hilbert_fit, obstruction_report, reduction_report, residual, system_shape)
from diffiety.errors import NoPolynomialTail, ShapeMismatch
from diffiety.forms import OneForm, lie
from diffiety.jetspace import Truncation
from diffiety.modlin import FormModule, adj, is_flat

T4 = Truncation(4, 2)


def analysis(name, order=4, **kw):
    return Analysis(load(name), Settings(truncation=Truncation(order, 2), **kw))


# -- Hilbert fits -------------------------------------------------------------

def test_fit_quadratic_dims():
    fit = hilbert_fit([(l + 1) * (l + 4) // 2 for l in range(7)])
    assert (fit.nu, fit.mu) == (1, 1)
    assert fit.coeffs == (1, 3, 2)
    assert all(fit.value(l) == (l + 1) * (l + 4) // 2 for l in range(12))


def test_fit_linear_dims():
    fit = hilbert_fit([l + 3 for l in range(6)])
    assert (fit.nu, fit.mu) == (0, 1)


def test_fit_constant_dims():
    fit = hilbert_fit([2] * 5)
    assert (fit.nu, fit.mu) == (-1, 2)


def test_fit_onset_after_irregular_start():
    fit = hilbert_fit([7, 1, 2, 3, 4, 5])
    assert fit.onset == 1 and (fit.nu, fit.mu) == (0, 1)


def test_fit_rejects_short_tail():
    with pytest.raises(NoPolynomialTail):
        hilbert_fit([1, 2, 4], max_degree=1)


# -- filtrations ----------------------------------------------------------------

def test_filtration_dims(ode_pair, single_pde, free_jet):
    assert GoodFiltration(chart(ode_pair, 4)).dims == [3, 4, 5, 6, 7]
    assert GoodFiltration(chart(single_pde, 4)).dims == [2, 5, 9, 14, 20]
    assert GoodFiltration(chart(free_jet, 4)).dims == [1, 2, 3, 4, 5]


def test_derived_filtration(single_pde, ode_pair):
    c = chart(single_pde, 4)
    filt = GoodFiltration(c)
    t = derived_filtration(filt, [c.D(0)])
    lvl = t.level(2)
    for r in range(3):
        assert lvl.contains(c.contact_form(0, (0,) * r)) and lvl.contains(c.contact_form(1, (0,) * r))
    assert lvl.rank == 6
    same = derived_filtration(filt, [])
    assert all(same.level(l).same_span(filt.level(l)) for l in range(3))
    co = chart(ode_pair, 4)
    fo = GoodFiltration(co)
    tx = derived_filtration(fo, [co.D(0)])
    assert all(tx.level(n).same_span(fo.level(n)) for n in range(4))


# -- residuals ------------------------------------------------------------------

def test_decoupled_r0():
    an = analysis("ode_pair_decoupled", 3)
    r = an.residual(0)
    c = an.chart
    assert r.rank == 2 and r.fit.nu == -1 and r.fit.mu == 2
    assert r.module.same_span(FormModule([c.contact_form(0), c.contact_form(1)], contact=True))
    assert all(r.checks.values())


def test_generic_pde_r0_is_trivial():
    r = analysis("single_pde", 4).residual(0)
    assert r.rank == 0 and r.chain[:2] == [2, 0] and r.note == "no first integrals"


def test_noncontrollable_r1_small_order():
    an = analysis("noncontrollable", 4)
    r = an.residual(1)
    assert r.rank == 4 and r.level == 3
    assert (r.fit.nu, r.fit.mu) == (0, 1)
    assert all(v for v in r.checks.values())
    m = r.module.level(r.level)
    lower = r.module.level(r.level - 1)
    for z in an.chart.fields():
        for g in lower.basis:
            assert m.contains(lie(z, g))


def test_residual_beyond_nu_is_everything():
    r = analysis("single_pde", 3).residual(2)
    assert r.is_everything


def test_escalation():
    an = analysis("noncontrollable", 2, escalate=1)
    r = an.residual(1)
    assert "escalated to order 4" in r.note and r.rank == 4


def test_no_escalation_raises():
    with pytest.raises(NoPolynomialTail):
        analysis("noncontrollable", 2).residual(1)


def test_growth_bound_for_first_integrals():
    r = analysis("ode_pair_decoupled", 3).residual(0)
    assert all(max(g) <= r.rank for g in r.growth)


def test_stable_residual_is_flat_and_adj_closed():
    r = analysis("ode_pair_decoupled", 3).residual(0)
    m = FormModule(r.module.basis)
    assert is_flat(m) and adj(m).same_span(m)


# -- obstructions ---------------------------------------------------------------

def test_ode_obstructions_match_closed_forms():
    rep = obstruction_report(load("ode_pair"), Truncation(3, 2))
    assert rep["match"] == {"P": True, "Q": True}
    assert not rep["values"]["P"].is_zero()


def test_rank_one_instance():
    an = analysis("ode_pair_rank1", 3)
    rep = an.obstruction_report()
    assert rep["values"]["P"].is_zero() and str(rep["values"]["Q"]) == "-2*w_xx"
    r = an.residual(0)
    assert r.rank == 1 and str(r.generators[0]) == "du - dw"


def test_pde_obstructions():
    rep = obstruction_report(load("single_pde"), Truncation(3, 2))
    assert rep["match"]["A"] and rep["match"]["B (Leibniz)"]
    assert not rep["match"]["B"]


def test_noncontrollable_obstructions_vanish():
    rep = obstruction_report(load("noncontrollable"), Truncation(3, 2))
    assert rep["values"]["A"].is_zero() and rep["values"]["B"].is_zero()


def test_shape_detection(free_jet):
    assert system_shape(load("ode_pair")) == "ode-pair"
    assert system_shape(load("single_pde")) == "single-pde"
    assert system_shape(free_jet) is None
    with pytest.raises(ShapeMismatch):
        obstruction_report(free_jet, Truncation(2, 2))


# -- series and reductions -------------------------------------------------------

def test_series_generic_ode():
    s = composition_series(load("ode_pair"), Truncation(3, 2))
    assert s.entries == [] and s.whole.is_everything


def test_series_decoupled():
    s = composition_series(load("ode_pair_decoupled"), Truncation(3, 2))
    assert [(e.k, e.rank) for e in s.entries] == [(0, 2)]


def test_series_noncontrollable():
    s = composition_series(load("noncontrollable"), T4)
    assert [(e.k, e.fit.nu, e.fit.mu) for e in s.entries] == [(1, 0, 1)]
    assert (s.whole.fit.nu, s.whole.fit.mu) == (1, 1)
    assert s.omitted[0] == (0, "trivial")


def test_reduction_of_decoupled():
    r = residual(load("ode_pair_decoupled"), 0, Truncation(3, 2))
    rs = reduction_report(r)
    assert [h.name for h in rs.hull] == ["x", "u", "v"]
    assert [(p.display(), q.display(), str(e)) for p, q, e in rs.equations] == [("u", "x", "F"), ("v", "x", "G")]


def test_reduction_of_noncontrollable():
    r = residual(load("noncontrollable"), 1, T4)
    rs = reduction_report(r)
    names = [h.name for h in rs.hull]
    assert names[:5] == ["x", "y", "u", "v", "f"] and "U f" in names
    eqs = {(p.display(), q.display()): str(e) for p, q, e in rs.equations}
    assert eqs == {("v", "u"): "f", ("v", "x"): "H(f)", ("v", "y"): "G(y, x*H(f) + u*f - v)"}


def test_adj_closure_of_gamma():
    r = residual(load("noncontrollable"), 1, T4)
    closed = adj_closure(r.module.level(0))
    assert closed.rank == 3 and is_flat(closed)
