"""Good filtrations, Hilbert fits, residual submodules, the composition series
and reduced-system reports."""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import combinations_with_replacement
from math import comb

from .errors import (DiffietyError, NoPolynomialTail, NoStabilization, NotFlat, NotGoodFiltration,
                     NotTooSpecialSuspect, ShapeMismatch, TruncationOverflow)
from .forms import Combination, Finite, OneForm, VectorField, d, evaluate, lie, off_independent
from .jetspace import ProlongedChart, SystemSpec, Truncation
from .modlin import (Echelon, FormModule, Tower, adj, adj_closed, cauchy, flatness_defects, h_module, iterate_ker,
                     ker_vf)
from .symexpr import (FUNC, INDEPENDENT, JET, ONE, ZERO, Atom, Expr, ZeroTest, atom_coords,
                      genericity_assumptions, nonzero_factors, partial, solve_relations)


@dataclass(frozen=True)
class Settings:
    truncation: Truncation = Truncation()
    zero_test: ZeroTest | None = None
    seed: int = 0
    max_iter: int = 12
    escalate: int = 0
    base_level: int = 0
    cross_check: bool = True


# ---------------------------------------------------------------------------
# Hilbert polynomials


@dataclass(frozen=True)
class HilbertFit:
    """``dim_l = sum_k c_k * binom(l, k)`` for ``l >= onset``.

    ``coeffs`` runs from ``c_{nu+1}`` down to ``c_0``.
    """

    nu: int
    mu: int
    coeffs: tuple
    onset: int
    dims: tuple

    def value(self, l: int) -> int:
        top = len(self.coeffs) - 1
        return sum(c * comb(l, top - i) for i, c in enumerate(self.coeffs))

    def as_dict(self) -> dict:
        top = len(self.coeffs) - 1
        return {
            "nu": self.nu, "mu": self.mu, "onset": self.onset, "dims": list(self.dims),
            "c": {str(top - i): c for i, c in enumerate(self.coeffs)},
        }


def _differences(seq: list, k: int) -> list:
    for _ in range(k):
        seq = [b - a for a, b in zip(seq, seq[1:])]
    return seq


def _gbinom(t: int, k: int) -> Fraction:
    out = Fraction(1)
    for i in range(k):
        out = out * (t - i) / (i + 1)
    return out


def hilbert_fit(dims, max_degree: int | None = None) -> HilbertFit:
    """Fit the eventually polynomial tail of ``dims`` in the binomial basis.

    The degree is the smallest one for which a tail of at least degree+2
    points has vanishing higher differences.
    """
    dims = [int(x) for x in dims]
    if not dims:
        raise NoPolynomialTail("no dimensions to fit")
    cap = len(dims) - 2 if max_degree is None else max_degree
    for deg in range(0, max(cap, 0) + 1):
        # smallest start s whose tail has vanishing (deg+1)-th differences
        s = len(dims) - (deg + 2)
        if s < 0:
            break
        if any(_differences(dims[s:], deg + 1)):
            continue
        while s > 0 and not any(_differences(dims[s - 1:], deg + 1)):
            s -= 1
        base = [dims[s + i] for i in range(deg + 1)]
        deltas = [_differences(base, k)[0] for k in range(deg + 1)]

        def p(l, deltas=deltas, s=s):
            return sum(dk * _gbinom(l - s, k) for k, dk in enumerate(deltas))

        at0 = [p(l) for l in range(deg + 1)]
        cs = [_differences(at0, k)[0] for k in range(deg + 1)]
        if any(c.denominator != 1 for c in cs):
            continue
        cs = [int(c) for c in cs]
        onset = s
        while onset > 0 and p(onset - 1) == dims[onset - 1]:
            onset -= 1
        coeffs = tuple(reversed(cs))
        if deg == 0:
            return HilbertFit(-1, cs[0], coeffs, onset, tuple(dims))
        return HilbertFit(deg - 1, cs[deg], coeffs, onset, tuple(dims))
    raise NoPolynomialTail(f"no polynomial of degree <= {cap} fits the tail of {dims}")


# ---------------------------------------------------------------------------
# good filtrations


def _gen_key(spec: SystemSpec, a: Atom):
    has_eq = a.index in spec.dependents_with_equations()
    return (0 if has_eq else 1, a.order, a.index, a.multi)


def _covector_order(forms) -> int:
    best = 0
    for w in forms:
        for c in off_independent(w):
            best = max(best, c.order)
    return best


def _domain(spec: SystemSpec, order: int) -> list:
    return spec.xs() + spec.parametric(order)


class GoodFiltration:
    """``Omega_0 ⊂ ... ⊂ Omega_L`` by contact forms of parametric coordinates
    of order at most ``l``."""

    def __init__(self, chart: ProlongedChart, zero_test: ZeroTest | None = None, check: bool = True):
        self.chart = chart
        self.spec = spec = chart.spec
        self.zero_test = zero_test
        self.L = chart.truncation.order
        self.schedule: list = []
        self.levels: list = []
        gens: list = []
        for l in range(self.L + 1):
            new = sorted((a for a in spec.parametric(l) if a.order == l), key=lambda a: _gen_key(spec, a))
            forms = [chart.contact_form(a.index, a.multi) for a in new]
            self.schedule.append(list(zip(new, forms)))
            gens = gens + forms
            self.levels.append(FormModule(gens, domain=_domain(spec, l), zero_test=zero_test, label=f"Omega_{l}",
                                          contact=True))
        self.dims = [m.rank for m in self.levels]
        self.condition1: list = []
        self.condition2: list = []
        self.onset = 0
        if check:
            self._check()

    def level(self, l: int) -> FormModule:
        return self.levels[l]

    def _image_vector(self, a: Atom, i: int, l: int):
        """Non-dx part of ``L_{D_i}`` of the contact form of ``a``, or ``None``
        if it leaves ``Omega_{l+1}``.

        Total derivatives commute on a compatible chart, so this Lie derivative
        is the contact form of ``value(a + i)``, which is
        ``sum dvalue/dc * theta_c``; it lies in ``Omega_{l+1}`` exactly when
        the value only involves coordinates of order at most ``l + 1``.
        """
        val = self.chart.value(a.with_extra(i))
        out = {}
        for c in val.coords():
            if c.kind == INDEPENDENT:
                continue
            if c.kind != JET or c.order > l + 1:
                return None
            out[c] = partial(val, c)
        return out

    def _check(self) -> None:
        chart = self.chart
        for l in range(self.L):
            images = []
            for a, _theta in self.schedule[l]:
                for i, z in enumerate(chart.fields()):
                    vec = self._image_vector(a, i, l)
                    if vec is None:
                        self.condition1.append((l, False))
                        raise NotGoodFiltration(
                            f"L_{{{z.label}}} of the contact form of {a.display()} leaves Omega_{l + 1}")
                    images.append(vec)
            self.condition1.append((l, True))
            # contact forms are determined by their non-dx part
            ech = Echelon(zero_test=self.zero_test)
            for g in self.levels[l].basis:
                ech.insert(_strip(g))
            for vec in images:
                ech.insert(vec)
            self.condition2.append((l, len(ech) == self.dims[l + 1]))
        bad = [l for l, ok in self.condition2 if not ok]
        if bad and bad[-1] == self.L - 1:
            raise NotGoodFiltration(f"Omega_{self.L - 1} + L_H Omega_{self.L - 1} is smaller than Omega_{self.L}")
        self.onset = bad[-1] + 1 if bad else 0

    def fit(self) -> HilbertFit:
        return hilbert_fit(self.dims, max_degree=self.spec.n)

    def tower(self) -> Tower:
        return Tower(self.level, self.L, label="Omega")


def _strip(w: OneForm) -> dict:
    return {c: v for c, v in w.coeffs.items() if c.kind != INDEPENDENT}


def build_filtration(spec: SystemSpec, t: Truncation = Truncation(), *, zero_test: ZeroTest | None = None,
                     chart: ProlongedChart | None = None, check: bool = True) -> GoodFiltration:
    chart = chart or ProlongedChart(spec, t)
    return GoodFiltration(chart, zero_test=zero_test, check=check)


# ---------------------------------------------------------------------------
# derived filtrations


class DerivedTower(Tower):
    """Level ``N`` of ``Omega(Z_1, ..., Z_r)_l``: Lie derivatives of the
    generators of ``Omega_l`` along words of length at most ``N``."""

    def __init__(self, filtration: GoodFiltration, fields: list, l: int = 0, label: str = ""):
        self.filtration = filtration
        self.fields = list(fields)
        self.base_level = l
        self._chains: dict = {}
        names = ",".join(z.label for z in self.fields)
        super().__init__(self._build, filtration.L, label or f"Omega({names})_{l}")

    def _chain(self, g: OneForm, word: tuple) -> OneForm:
        key = (id(g), word)
        got = self._chains.get(key)
        if got is None:
            got = g if not word else lie(self.fields[word[0]], self._chain(g, word[1:]))
            self._chains[key] = got
        return got

    def _build(self, n: int) -> FormModule:
        filt = self.filtration
        base = filt.level(self.base_level).basis
        words = []
        for k in range(n + 1):
            words.extend(combinations_with_replacement(range(len(self.fields)), k))
        gens = [self._chain(g, w) for g in base for w in words]
        order = max(_covector_order(gens), self.base_level)
        if order > filt.L:
            # levels stay inside the truncation order; the headroom is for Lie derivatives
            raise TruncationOverflow(f"level {n} of {self.label} needs covectors of order {order}")
        return FormModule(gens, domain=_domain(filt.spec, order), zero_test=filt.zero_test,
                          label=f"{self.label}[{n}]", contact=True)


def derived_filtration(filtration: GoodFiltration, fields: list, l: int = 0):
    """``Omega(Z_1..Z_r)_l`` as a tower; with no fields, the filtration itself."""
    if not fields:
        return filtration
    return DerivedTower(filtration, fields, l)


# ---------------------------------------------------------------------------
# residual submodules


@dataclass
class ResidualResult:
    k: int
    module: object
    level: int | None
    generators: list
    chain: list
    fit: HilbertFit | None
    stable: bool
    assumptions: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    is_everything: bool = False
    note: str = ""
    analysis: "Analysis | None" = None
    growth: list = field(default_factory=list)

    @property
    def rank(self) -> int:
        return len(self.generators)

    def at(self, n: int) -> FormModule:
        return self.module.level(n)


def _multi_words(k: int) -> list:
    return [(i,) for i in range(k)]


class Analysis:
    """Shared state (chart, filtration, towers) for one system and settings."""

    def __init__(self, spec: SystemSpec, settings: Settings = Settings()):
        self.spec = spec
        self.settings = settings
        self.zero_test = settings.zero_test
        self.chart = ProlongedChart(spec, settings.truncation)
        self._filtration = None
        self._residuals: dict = {}

    @property
    def n(self) -> int:
        return self.spec.n

    def filtration(self) -> GoodFiltration:
        if self._filtration is None:
            self._filtration = GoodFiltration(self.chart, zero_test=self.zero_test)
        return self._filtration

    def omega_fit(self) -> HilbertFit:
        return self.filtration().fit()

    # -- residuals --------------------------------------------------------
    def residual(self, k: int) -> ResidualResult:
        """``R^k``; when the truncation is too low to decide it retries with the truncation
        order raised by 2, at most ``settings.escalate`` times."""
        got = self._residuals.get(k)
        if got is None:
            try:
                got = self._residual(k)
            except (NoStabilization, TruncationOverflow, NoPolynomialTail):
                if self.settings.escalate <= 0:
                    raise
                t = self.settings.truncation
                bigger = Analysis(self.spec, replace(self.settings, truncation=Truncation(t.order + 2, t.headroom),
                                                     escalate=self.settings.escalate - 1))
                got = bigger.residual(k)
                got.note = (got.note + "; " if got.note else "") + f"escalated to order {bigger.settings.truncation.order}"
            self._residuals[k] = got
        return got

    def _everything(self, k: int, note: str) -> ResidualResult:
        filt = self.filtration()
        top = filt.levels[-1]
        fit = filt.fit()
        return ResidualResult(k, filt.tower(), filt.L, list(top.basis), list(filt.dims), fit, True,
                              [], {"closure": True, "flat": None, "adj": None}, True, note, self)

    def _residual(self, k: int) -> ResidualResult:
        if k < 0:
            raise ValueError("k must be nonnegative")
        filt = self.filtration()
        fit = filt.fit()
        if k >= self.n or k >= fit.nu + 1:
            return self._everything(k, "the derived filtration exhausts Omega")
        fields = self.chart.fields()
        l0 = self.settings.base_level
        z = fields[k]
        if k == 0:
            start = filt.level(l0)
            chain = iterate_ker(start, z, self.settings.max_iter)
            res = self._finite_result(chain, l0)
        else:
            tower = DerivedTower(filt, fields[:k], l0)
            chain = iterate_ker(tower, z, self.settings.max_iter)
            res = self._tower_result(k, chain)
        if self.settings.cross_check and self.n > 1:
            self._cross_check(k, res)
        return res

    def _finite_result(self, chain, l0: int) -> ResidualResult:
        m = chain.module
        filt = self.filtration()
        checks = {}
        note = ""
        # re-check at the next filtration level
        if l0 + 1 <= filt.L:
            again = iterate_ker(filt.level(l0 + 1), self.chart.D(0), self.settings.max_iter).module
            checks["next_level"] = again.same_span(m)
        checks["closure"] = all(m.contains(lie(z, g)) for z in self.chart.fields() for g in m.basis)
        defects = flatness_defects(m)
        checks["flat"] = not defects
        checks["adj"] = not adj_closed(m, m, h_module(m)) if m.rank else True
        growth = [self._growth(g) for g in m.basis]
        checks["growth"] = all(max(dims) <= m.rank for dims in growth)
        if m.rank == 0:
            note = "no first integrals"
        fit = hilbert_fit([m.rank] * 3)
        assumptions = _assumption_list([s for s in chain.steps], m.basis)
        res = ResidualResult(0, m, None, list(m.basis), chain.chain, fit, True, assumptions, checks,
                             False, note, self)
        res.growth = growth
        return res

    def _growth(self, g: OneForm, depth: int = 3) -> list:
        """``dim span{g, L_H g, ..., L_H^l g}`` for ``l = 0..depth``."""
        forms, frontier = [g], [g]
        dims = [FormModule(forms, contact=True).rank]
        for _ in range(depth):
            frontier = [lie(z, w) for z in self.chart.fields() for w in frontier]
            forms = forms + frontier
            dims.append(FormModule(forms, contact=True).rank)
        return dims

    def _tower_result(self, k: int, chain) -> ResidualResult:
        t = chain.module
        top = chain.level
        m = t.level(top)
        checks = {}
        if top >= 1:
            lower = t.level(top - 1)
            checks["closure"] = all(m.contains(lie(z, g)) for z in self.chart.fields() for g in lower.basis)
        else:
            checks["closure"] = None
        if m.rank and top >= 2:
            probe = t.level(top - 2)
            checks["flat"] = not flatness_defects(probe, m)
            hs = h_module(m)
            checks["adj"] = not adj_closed(probe, m, hs)
        else:
            checks["flat"] = None if m.rank else True
            checks["adj"] = None if m.rank else True
        dims = [t.level(i).rank for i in range(top + 1)]
        fit = hilbert_fit(dims, max_degree=k) if any(dims) else HilbertFit(-1, 0, (0,), 0, tuple(dims))
        steps = [s.level(top) if s.available(top) else s.level(top - 1) for s in chain.steps]
        assumptions = _assumption_list(steps, m.basis)
        note = "" if m.rank else "trivial"
        return ResidualResult(k, t, top, list(m.basis), chain.chain, fit, True, assumptions, checks,
                              False, note, self)

    def _perturbed_field(self, k: int) -> VectorField:
        rng = random.Random(self.settings.seed * 1009 + k)
        fields = self.chart.fields()
        terms = [(ONE, fields[k])]
        for j, z in enumerate(fields):
            if j == k:
                continue
            terms.append((Expr.const(rng.randint(1, 7)), z))
        return Combination(terms, label=f"{fields[k].label}+...")

    def _cross_check(self, k: int, res: ResidualResult) -> None:
        filt = self.filtration()
        z = self._perturbed_field(k)
        l0 = self.settings.base_level
        if k == 0:
            other = iterate_ker(filt.level(l0), z, self.settings.max_iter)
            same = other.module.rank == res.rank
        else:
            tower = DerivedTower(filt, self.chart.fields()[:k], l0)
            other = iterate_ker(tower, z, self.settings.max_iter)
            lv = min(other.level, res.level)
            same = other.module.level(lv).rank == res.module.level(lv).rank
        res.checks["perturbed_field"] = same
        if not same:
            raise NotTooSpecialSuspect(
                f"kernel chain for R^{k} changes under {z.label}: {res.chain} vs {other.chain}")

    # -- named obstructions ----------------------------------------------
    def obstruction_report(self) -> dict:
        shape = system_shape(self.spec)
        if shape == "ode-pair":
            return self._ode_obstructions()
        if shape == "single-pde":
            return self._pde_obstructions()
        raise ShapeMismatch("the system matches neither the ODE-pair nor the single-PDE shape")

    def _ode_obstructions(self) -> dict:
        spec, chart = self.spec, self.chart
        (pa, fa), (pb, fb) = sorted(spec.equations, key=lambda e: e[0].index)
        free = [j for j in range(spec.m) if j not in (pa.index, pb.index)][0]
        X = chart.D(0)
        u, v = spec.w(pa.index), spec.w(pb.index)
        w0, w1 = spec.w(free), spec.w(free, (0,))
        filt = self.filtration()
        om0 = filt.level(0)
        ker = ker_vf(om0, om0, X, label="Ker_X Omega_0")
        alpha, beta, gamma0 = (chart.contact_form(a.index, a.multi) for a in (u, v, w0))
        xi, zeta = _by_pivot(ker, [alpha, beta])
        basis = FormModule([xi, zeta, gamma0], contact=True)
        cx = basis.express(lie(X, xi))
        cz = basis.express(lie(X, zeta))
        if cx is None or cz is None:
            raise DiffietyError("Lie derivatives of the kernel basis left Omega_0")
        P, Q = cx[2], cz[2]

        def closed(Fh):
            return (partial(Fh, u) * partial(fa, w1) + partial(Fh, v) * partial(fb, w1)
                    + partial(Fh, w0) - chart.total_derivative(0, partial(Fh, w1)))

        Pc, Qc = closed(fa), closed(fb)
        return {
            "shape": "ode-pair",
            "kernel": [xi, zeta],
            "values": {"P": P, "Q": Q},
            "closed_forms": {"P": Pc, "Q": Qc},
            "match": {"P": P == Pc, "Q": Q == Qc},
            "extra": {"L_X xi": cx, "L_X zeta": cz},
        }

    def _pde_obstructions(self) -> dict:
        spec, chart = self.spec, self.chart
        ((p, F),) = spec.equations
        j = p.index
        other = 1 - j
        D1, D2 = chart.D(0), chart.D(1)
        u00, u10, u01 = spec.w(other), spec.w(other, (0,)), spec.w(other, (1,))
        v0, v1 = spec.w(j), spec.w(j, (0,))
        filt = self.filtration()
        tower = DerivedTower(filt, [D1], 0)
        k1 = ker_vf(tower.level(1), tower.level(2), D2)
        beta0, beta1 = chart.contact_form(j, ()), chart.contact_form(j, (0,))
        a00, a10 = chart.contact_form(other, ()), chart.contact_form(other, (0,))
        g0, g1 = _by_pivot(k1, [beta0, beta1])
        basis = FormModule([g0, g1, a00, a10], contact=True)
        cs = basis.express(lie(D2, g0))
        if cs is None:
            raise DiffietyError("L_D2 gamma left the expected span")
        A, B = cs[2], cs[3]
        Fu00, Fv0, Fu10, Fv1, Fu01 = (partial(F, a) for a in (u00, v0, u10, v1, u01))
        Ac = Fu00 + Fv0 * Fu01 + Fv1 * chart.total_derivative(0, Fu01) - chart.total_derivative(1, Fu01)
        B_literal = Fu01 + Fv1 * Fu01
        B_derived = Fu10 + Fv1 * Fu01
        return {
            "shape": "single-pde",
            "kernel": [g0, g1],
            "values": {"A": A, "B": B},
            "closed_forms": {"A": Ac, "B": B_literal, "B (Leibniz)": B_derived},
            "match": {"A": A == Ac, "B": B == B_literal, "B (Leibniz)": B == B_derived},
            "extra": {"gamma coefficient": cs[0], "gamma_1 coefficient": cs[1]},
        }

    # -- series -----------------------------------------------------------
    def composition_series(self) -> "CompositionSeries":
        entries, omitted, errors = [], [], []
        prev = None
        for k in range(self.n):
            try:
                r = self.residual(k)
            except DiffietyError as exc:
                errors.append((k, exc))
                continue
            if r.is_everything:
                omitted.append((k, "equals Omega"))
                break
            if r.rank == 0:
                omitted.append((k, "trivial"))
                continue
            if prev is not None and _same_result(prev, r):
                omitted.append((k, f"repeats R^{prev.k}"))
                continue
            entries.append(r)
            prev = r
        whole = self._everything(self.n, "Omega")
        reductions = {}
        for r in entries:
            try:
                reductions[r.k] = reduction_report(r)
            except DiffietyError as exc:
                reductions[r.k] = exc
        return CompositionSeries(entries, whole, omitted, errors, self, reductions)

    # -- reductions -------------------------------------------------------
    def reduction_report(self, res: ResidualResult, max_new: int = 12) -> "ReducedSystem":
        return reduction_report(res, max_new=max_new)


def _same_result(a: ResidualResult, b: ResidualResult) -> bool:
    if a.level is None and b.level is None:
        return a.module.same_span(b.module)
    lv = min(x for x in (a.level, b.level) if x is not None)
    return a.at(lv).same_span(b.at(lv))


def _by_pivot(m: FormModule, targets: list) -> list:
    """Basis elements whose expansion starts with the given generators."""
    out = []
    for t in targets:
        (c,) = [a for a, v in t.coeffs.items() if v.is_one() and a.kind != INDEPENDENT][:1]
        hits = [g for g in m.basis if g.coeff(c).is_one()]
        if not hits:
            raise DiffietyError(f"no kernel element with leading term d{c.display()}")
        out.append(hits[0])
    return out


def _assumption_list(modules, forms) -> list:
    raw = {}
    for m in modules:
        for e in getattr(m, "assumptions", []):
            raw.setdefault(e, None)
    for w in forms:
        for v in w.coeffs.values():
            for e in sorted(genericity_assumptions(v), key=str):
                raw.setdefault(e, None)
    seen = {}
    for e in raw:
        for f in nonzero_factors(e):
            seen.setdefault(f, None)
    return sorted(seen, key=lambda e: (e.size(), str(e)))


def system_shape(spec: SystemSpec) -> str | None:
    eqs = spec.equations
    if spec.n == 1 and spec.m == 3 and len(eqs) == 2:
        idx = {p.index for p, _ in eqs}
        if len(idx) == 2 and all(p.multi == (0,) for p, _ in eqs):
            return "ode-pair"
    if spec.n == 2 and spec.m == 2 and len(eqs) == 1:
        p, rhs = eqs[0]
        if p.multi == (1,):
            for c in rhs.coords():
                if c.kind == JET and (c.order > 1 or (c.index == p.index and c.multi == (1,))):
                    return None
            return "single-pde"
    return None


@dataclass
class CompositionSeries:
    entries: list
    whole: ResidualResult
    omitted: list
    errors: list
    analysis: Analysis
    reductions: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# reduced systems


@dataclass
class HullFunction:
    name: str
    expr: Expr
    path: tuple


@dataclass
class ReducedSystem:
    hull: list
    fields_used: list
    fields_omitted: list
    equations: list
    closed: list
    truncated: bool
    generators: list


def _field_label(a: Atom) -> str:
    if a.kind == INDEPENDENT:
        return a.name.upper()
    if a.kind == JET:
        return a.name.upper() + a.subscript()[len(a.name):]
    return "Z"


def _path_name(path: tuple, base: str) -> str:
    parts = []
    for lab in path:
        if parts and parts[-1][0] == lab:
            parts[-1][1] += 1
        else:
            parts.append([lab, 1])
    pre = " ".join(lab if k == 1 else f"{lab}^{k}" for lab, k in parts)
    return f"{pre} {base}" if pre else base


def _opaque(a: Atom, out: set) -> None:
    """Base hull atoms behind a symbol atom: implicit symbols stand for
    themselves, explicit ones are opened up to their arguments."""
    if a.kind != FUNC:
        out.add(a)
        return
    if a.symbol.relation is not None:
        out.add(a)
        return
    for arg in a.symbol.args:
        for b in solve_relations(arg).atoms:
            _opaque(b, out)


def dual_fields(m: FormModule) -> list:
    """Annihilating fields dual to the non-pivot coordinates of ``m``."""
    hs = h_module(m)
    out = []
    for z in hs:
        (free,) = [c for c, v in z.components.items() if v.is_one() and c not in _pivots(m)][:1]
        z.label = _field_label(free)
        z.free = free
        out.append(z)
    return out


def _pivots(m: FormModule) -> set:
    e = Echelon(zero_test=m.zero_test)
    inside = set(m.domain)
    for g in m.basis:
        e.insert({c: v for c, v in g.coeffs.items() if c in inside})
    return set(e.pivots)


def reduction_report(res: ResidualResult, max_new: int = 12) -> ReducedSystem:
    """Coordinate hull and reduced Pfaffian system of a residual module."""
    if res.rank == 0:
        return ReducedSystem([], [], [], [], [], False, [])
    if res.checks.get("flat") is False:
        raise NotFlat(f"R^{res.k} failed the Frobenius test")
    if res.level is None:
        seed = res.module
        top = res.module
    else:
        seed = res.at(0)
        top = res.at(res.level)
    # seed functions
    atoms: set = set()
    for g in seed.basis:
        for c, v in g.coeffs.items():
            atoms.add(c)
            for b in solve_relations(v).atoms:
                _opaque(b, atoms)
    hull: list = []
    ech = Echelon(colkey=lambda a: a.key)
    for a in sorted(atoms, key=_hull_key):
        e = Expr.atom(a)
        if ech.insert(_differential_vec(e))[0]:
            hull.append(HullFunction(a.display(), e, ()))
    fields = dual_fields(top)
    domain = set(top.domain)
    ordered = [z for z in fields if z.free.kind != INDEPENDENT] + [z for z in fields if z.free.kind == INDEPENDENT]
    used, truncated = set(), False
    queue = list(hull)
    added = 0
    while queue and added < max_new:
        h = queue.pop(0)
        for z in ordered:
            if not h.expr.coords() <= domain:
                truncated = True
                break
            val = z.apply(h.expr)
            if not val.num:
                continue
            used.add(z.label)
            if not val.coords() <= domain:
                truncated = True
                continue
            if ech.insert(_differential_vec(val))[0]:
                new = HullFunction(_path_name((z.label,) + h.path, _base_name(h)), val, (z.label,) + h.path)
                hull.append(new)
                queue.append(new)
                added += 1
                if added >= max_new:
                    truncated = True
                    break
    omitted = [z.label for z in ordered if z.label not in used]
    used_list = [z.label for z in ordered if z.label in used]
    # reduced equations from the seed generators
    eqs, closed = [], []
    e0 = Echelon()
    for g in seed.basis:
        e0.insert(g.coeffs)
    for i, p in enumerate(e0.pivots):
        row = e0.rows[i]
        for q in sorted(row, key=lambda a: (a.kind == INDEPENDENT, a.key)):
            if q is p:
                continue
            eqs.append((p, q, solve_relations(-row[q])))
    for g in seed.basis:
        dg = d(g)
        exact = None
        if dg.is_zero() and len(g.coeffs) == 1:
            ((c, v),) = g.coeffs.items()
            if v.is_one():
                exact = c.display()
        closed.append((g, dg.is_zero(), exact))
    return ReducedSystem(hull, used_list, omitted, eqs, closed, truncated, list(seed.basis))


def _base_name(h: HullFunction) -> str:
    if not h.path:
        return h.name
    return h.name.split(" ")[-1]


def _hull_key(a: Atom):
    return (a.kind == FUNC, a.kind != INDEPENDENT, a.key)


def _differential_vec(e: Expr) -> dict:
    out = {}
    for c in e.coords():
        v = partial(e, c)
        if v.num:
            out[c] = v
    return out


# ---------------------------------------------------------------------------
# Cauchy characteristics


def chart_domain(forms) -> list:
    """Covectors of ``forms`` plus every coordinate their coefficients use."""
    s = set()
    for w in forms:
        for c, v in w.coeffs.items():
            s.add(c)
            s |= v.coords()
    return sorted(s, key=lambda a: a.key)


def adj_closure(m: FormModule, max_steps: int = 8) -> FormModule:
    """Iterate ``adj`` over the full chart of the generators until the rank
    stops growing."""
    cur = m
    for _ in range(max_steps):
        dom = chart_domain(cur.basis)
        cur_full = FormModule(cur.basis, domain=dom, zero_test=cur.zero_test)
        nxt = adj(cur_full, h_module(cur_full, dom))
        if nxt.rank == cur.rank:
            return cur_full
        cur = nxt
    raise NoStabilization(f"adj closure still growing after {max_steps} steps")


def cauchy_fields(m: FormModule) -> list:
    """Cauchy characteristics of the adj closure of ``m``."""
    closed = adj_closure(m)
    return cauchy(closed, h_module(closed, closed.domain))


# ---------------------------------------------------------------------------
# module-level entry points


def residual(spec: SystemSpec, k: int, t: Truncation = Truncation(), settings: Settings | None = None) -> ResidualResult:
    return Analysis(spec, settings or Settings(truncation=t)).residual(k)


def obstruction_report(spec: SystemSpec, t: Truncation = Truncation()) -> dict:
    return Analysis(spec, Settings(truncation=t)).obstruction_report()


def composition_series(spec: SystemSpec, t: Truncation = Truncation(), settings: Settings | None = None):
    return Analysis(spec, settings or Settings(truncation=t)).composition_series()


__all__ = [
    "Settings", "HilbertFit", "hilbert_fit", "GoodFiltration", "build_filtration", "DerivedTower",
    "derived_filtration", "ResidualResult", "Analysis", "residual", "obstruction_report", "composition_series",
    "CompositionSeries", "ReducedSystem", "adj_closure", "cauchy_fields", "chart_domain", "reduction_report", "dual_fields", "system_shape",
]
