"""Solved-form systems, truncated prolongation, total derivatives and contact
forms."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

from .errors import InconsistentSystem, NotOrthonomic, TruncationOverflow
from .forms import ContactForm, OneForm, VectorField, differential
from .symexpr import (INDEPENDENT, JET, ONE, ZERO, Atom, Expr, FuncSymbol, apply_derivation, as_expr,
                      implicit_symbols, relation_solution, substitute)


@dataclass(frozen=True)
class Truncation:
    """Keep jet orders up to ``order``; Lie derivatives may use ``headroom``
    more orders internally."""

    order: int = 6
    headroom: int = 2

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("truncation order must be at least 1")
        if self.headroom < 2:
            raise ValueError("headroom must be at least 2")

    @property
    def cap(self) -> int:
        return self.order + self.headroom


def _contains(big: tuple, small: tuple) -> bool:
    cb, cs = Counter(big), Counter(small)
    return all(cb[k] >= v for k, v in cs.items())


def _minus(big: tuple, small: tuple) -> tuple:
    c = Counter(big)
    c.subtract(small)
    return tuple(sorted(c.elements()))


@dataclass(frozen=True)
class SystemSpec:
    """Equations ``w^j_I = rhs`` solved for distinct principal derivatives."""

    independents: tuple
    dependents: tuple
    equations: tuple = ()
    symbols: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "independents", tuple(self.independents))
        object.__setattr__(self, "dependents", tuple(self.dependents))
        object.__setattr__(self, "equations", tuple((a, as_expr(r)) for a, r in self.equations))
        object.__setattr__(self, "symbols", tuple(self.symbols))

    @property
    def n(self) -> int:
        return len(self.independents)

    @property
    def m(self) -> int:
        return len(self.dependents)

    def x(self, i: int) -> Atom:
        return Atom.independent(i, self.independents[i])

    def w(self, j: int, multi=()) -> Atom:
        return Atom.jet(j, multi, self.dependents[j], self.independents)

    def xs(self) -> list:
        return [self.x(i) for i in range(self.n)]

    def principal_equation(self, atom: Atom):
        """The equation whose principal derivative ``atom`` prolongs, if any."""
        if atom.kind != JET:
            return None
        for p, rhs in self.equations:
            if p.index == atom.index and _contains(atom.multi, p.multi):
                return p, rhs
        return None

    def is_principal(self, atom: Atom) -> bool:
        return self.principal_equation(atom) is not None

    def validate(self) -> None:
        """Raise :class:`NotOrthonomic` unless the system is in solved form."""
        prin = [p for p, _ in self.equations]
        for p in prin:
            if p.kind != JET or p.index >= self.m or p.name != self.dependents[p.index]:
                raise NotOrthonomic(f"left-hand side {p} is not a derivative of a dependent variable")
        for a in range(len(prin)):
            for b in range(len(prin)):
                if a != b and prin[a].index == prin[b].index and _contains(prin[b].multi, prin[a].multi):
                    if prin[a] is prin[b]:
                        raise NotOrthonomic(f"{prin[a]} is solved for twice")
                    raise NotOrthonomic(f"{prin[b]} is a derivative of the principal {prin[a]}")
        for p, rhs in self.equations:
            for c in sorted(rhs.coords(), key=lambda t: t.key):
                if c.kind == JET and self.is_principal(c):
                    raise NotOrthonomic(f"right-hand side of {p} contains the principal derivative {c}")
                if c.kind == JET and (c.index >= self.m or c.name != self.dependents[c.index]):
                    raise NotOrthonomic(f"right-hand side of {p} uses unknown variable {c}")

    def parametric(self, order: int) -> list:
        """Parametric jet atoms of order at most ``order``, in canonical order."""
        out = []
        for j in range(self.m):
            for k in range(order + 1):
                for multi in combinations_with_replacement(range(self.n), k):
                    a = self.w(j, multi)
                    if not self.is_principal(a):
                        out.append(a)
        return sorted(out, key=lambda a: a.key)

    def dependents_with_equations(self) -> list:
        return sorted({p.index for p, _ in self.equations})


class TotalDerivative(VectorField):
    """``D_i`` on a prolonged chart."""

    preserves_contact = True

    def __init__(self, chart: "ProlongedChart", i: int):
        super().__init__()
        self.chart = chart
        self.i = i
        self.label = f"D_{chart.spec.independents[i]}"
        self.coordinate = chart.spec.x(i)

    def on_coord(self, c: Atom) -> Expr:
        return self.chart.coordinate_image(self.i, c)

    def apply(self, e) -> Expr:
        return self.chart.total_derivative(self.i, e)


class ProlongedChart:
    """Parametric coordinates up to ``truncation.cap`` with principal
    derivatives eliminated through the prolonged equations."""

    def __init__(self, spec: SystemSpec, truncation: Truncation = Truncation()):
        spec.validate()
        self.spec = spec
        self.truncation = truncation
        self.cap = truncation.cap
        self._values: dict = {}
        self._busy: set = set()
        self._caches = [dict() for _ in range(spec.n)]
        self._fields = [TotalDerivative(self, i) for i in range(spec.n)]
        self.eliminated = self._eliminations()
        self._check_compatibility()

    def _eliminations(self) -> dict:
        """Parametric coordinates that implicit relations express through
        their symbols (``v_x -> H(f) + u_x*f``).  Their values are the solved
        expressions, which makes expressions canonical on the relation locus."""
        out = {}
        for sym in implicit_symbols([rhs for _, rhs in self.spec.equations]):
            sol = relation_solution(sym, lambda b: not self.spec.is_principal(b) and b not in out)
            if sol is not None:
                out[sol[0]] = sol[1]
        return out

    def normalize(self, e) -> Expr:
        """Rewrite eliminated coordinates occurring in ``e``."""
        e = as_expr(e)
        if not self.eliminated or not any(a in self.eliminated for a in e.atoms):
            return e
        return substitute(e, {a: self.value(a) for a in e.atoms if a in self.eliminated})

    @property
    def n(self) -> int:
        return self.spec.n

    def D(self, i: int) -> TotalDerivative:
        return self._fields[i]

    def fields(self) -> list:
        return list(self._fields)

    def coordinates(self, order: int | None = None) -> list:
        order = self.cap if order is None else order
        return self.spec.xs() + self.spec.parametric(order)

    def value(self, atom: Atom) -> Expr:
        """Expression of a jet coordinate in parametric coordinates."""
        if atom.kind != JET:
            return Expr.atom(atom)
        if atom.order > self.cap:
            raise TruncationOverflow(f"{atom} exceeds truncation order {self.cap}")
        got = self._values.get(atom)
        if got is not None:
            return got
        eq = self.spec.principal_equation(atom)
        if atom in self.eliminated:
            got = self.eliminated[atom]
            if any(a in self.eliminated for a in got.atoms):
                raise InconsistentSystem(f"implicit relations eliminate {atom} circularly")
        elif eq is None:
            got = Expr.atom(atom)
        else:
            if atom in self._busy:
                raise InconsistentSystem(f"substitution cycle through {atom}")
            self._busy.add(atom)
            try:
                p, rhs = eq
                extra = _minus(atom.multi, p.multi)
                if not extra:
                    got = self.normalize(rhs)
                else:
                    i = extra[-1]
                    prev = Atom.jet(atom.index, _minus(atom.multi, (i,)), atom.name, atom.inames)
                    got = self.total_derivative(i, self.value(prev))
            finally:
                self._busy.discard(atom)
        self._values[atom] = got
        return got

    def coordinate_image(self, i: int, c: Atom) -> Expr:
        if c.kind == INDEPENDENT:
            return ONE if c.index == i else ZERO
        if c.kind != JET:
            raise TypeError(f"{c} is not a coordinate")
        return self.value(c.with_extra(i))

    def total_derivative(self, i: int, e) -> Expr:
        return apply_derivation(self.normalize(e), lambda c: self.coordinate_image(i, c), self._caches[i])

    def omega_of(self, e) -> OneForm:
        """``de - sum D_i e dx_i``."""
        e = self.normalize(e)
        w = differential(e)
        for i in range(self.n):
            w = w - OneForm.d(self.spec.x(i)) * self.total_derivative(i, e)
        return w

    def contact_form(self, j: int, multi=()) -> ContactForm:
        """``omega_of(value(w^j_multi))``, completed lazily."""
        return self.contact_of(self.value(self.spec.w(j, multi)))

    def contact_of(self, e) -> ContactForm:
        """:meth:`omega_of` as a :class:`ContactForm`."""
        e = self.normalize(e)
        part = {c: v for c, v in differential(e).coeffs.items() if c.kind != INDEPENDENT}
        return ContactForm(part, self._fields)

    def _check_compatibility(self) -> None:
        # different elimination paths for the same principal derivative must agree
        eqs = self.spec.equations
        for a in range(len(eqs)):
            for b in range(a + 1, len(eqs)):
                pa, pb = eqs[a][0], eqs[b][0]
                if pa.index != pb.index:
                    continue
                union = tuple(sorted((Counter(pa.multi) | Counter(pb.multi)).elements()))
                if len(union) > self.cap:
                    continue
                via = []
                for p, rhs in (eqs[a], eqs[b]):
                    val = rhs
                    for i in _minus(union, p.multi):
                        val = self.total_derivative(i, val)
                    via.append(val)
                if via[0] != via[1]:
                    raise InconsistentSystem(f"{pa} and {pb} give incompatible values for their common derivative")


class PlainChart:
    """Finite coordinate chart without total derivatives."""

    def __init__(self, coords):
        self.coords = sorted(coords, key=lambda a: a.key)

    def coordinates(self, order: int | None = None) -> list:
        return list(self.coords)


def prolong(spec: SystemSpec, truncation: Truncation = Truncation()) -> ProlongedChart:
    return ProlongedChart(spec, truncation)


__all__ = ["SystemSpec", "Truncation", "ProlongedChart", "PlainChart", "TotalDerivative", "prolong", "FuncSymbol"]
