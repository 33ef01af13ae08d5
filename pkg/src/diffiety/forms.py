"""One- and two-forms over coordinate covectors, vector fields, and the
Cartan calculus needed by the module algorithms (d, Lie derivative,
interior product, pairing, bracket)."""
from __future__ import annotations

from typing import Iterable

from .symexpr import INDEPENDENT, ONE, ZERO, Atom, Expr, apply_derivation, as_expr, partial


def _key(a: Atom):
    return a.key


class OneForm:
    """``sum coeffs[c] dc`` over coordinate atoms ``c``; zero entries are dropped."""

    __slots__ = ("coeffs", "_hash")

    def __init__(self, coeffs: dict | None = None):
        self.coeffs = {c: v for c, v in (coeffs or {}).items() if v.num}
        self._hash = None

    @staticmethod
    def d(atom: Atom) -> "OneForm":
        return OneForm({atom: ONE})

    def coeff(self, c: Atom) -> Expr:
        return self.coeffs.get(c, ZERO)

    def support(self) -> list:
        return sorted(self.coeffs, key=_key)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self):
        return bool(self.coeffs)

    def __add__(self, other: "OneForm") -> "OneForm":
        if not other.coeffs:
            return self
        out = dict(self.coeffs)
        for c, v in other.coeffs.items():
            out[c] = out[c] + v if c in out else v
        return OneForm(out)

    def __neg__(self):
        return OneForm({c: -v for c, v in self.coeffs.items()})

    def __sub__(self, other: "OneForm") -> "OneForm":
        return self + (-other)

    def __mul__(self, k) -> "OneForm":
        k = as_expr(k)
        if not k.num:
            return ZERO_FORM
        if k.is_one():
            return self
        return OneForm({c: v * k for c, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, OneForm):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.coeffs.items()))
        return self._hash

    def max_order(self) -> int:
        """Highest jet order among covectors and coefficient coordinates."""
        best = 0
        for c, v in self.coeffs.items():
            best = max(best, c.order, *(a.order for a in v.coords()))
        return best

    def coords(self) -> set:
        """Covector coordinates plus the coordinates the coefficients use."""
        out = set(self.coeffs)
        for v in self.coeffs.values():
            out |= v.coords()
        return out

    def __str__(self):
        items = sorted(self.coeffs.items(), key=lambda t: (t[0].kind == INDEPENDENT, t[0].key))
        return format_terms([(v, "d" + c.display()) for c, v in items])

    def __repr__(self):
        return f"OneForm({self})"


ZERO_FORM = OneForm()


class ContactForm(OneForm):
    """A form annihilated by the given total derivatives, stored by its
    components off the independent covectors.

    The ``dx_i`` coefficients are fixed by ``w(D_i) = 0`` and are computed
    only when :attr:`coeffs` is first read.  Equality and hashing between
    contact forms use the stored part.
    """

    __slots__ = ("part", "fields", "_full")

    def __init__(self, part: dict, fields: list):
        self.part = {c: v for c, v in part.items() if v.num}
        self.fields = fields
        self._full = None
        self._hash = None

    @property
    def coeffs(self) -> dict:
        if self._full is None:
            full = dict(self.part)
            for z in self.fields:
                v = ZERO
                for c, a in self.part.items():
                    zc = z.on_coord(c)
                    if zc.num:
                        v = v - a * zc
                if v.num:
                    full[z.coordinate] = v
            self._full = full
        return self._full

    def is_zero(self) -> bool:
        return not self.part

    def __bool__(self):
        return bool(self.part)

    def _same(self, other) -> bool:
        return isinstance(other, ContactForm) and other.fields is self.fields

    def __add__(self, other):
        if self._same(other):
            out = dict(self.part)
            for c, v in other.part.items():
                out[c] = out[c] + v if c in out else v
            return ContactForm(out, self.fields)
        return OneForm(self.coeffs) + other

    def __neg__(self):
        return ContactForm({c: -v for c, v in self.part.items()}, self.fields)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, k):
        k = as_expr(k)
        if not k.num:
            return ContactForm({}, self.fields)
        if k.is_one():
            return self
        return ContactForm({c: v * k for c, v in self.part.items()}, self.fields)

    __rmul__ = __mul__

    def __eq__(self, other):
        if self._same(other):
            return self.part == other.part
        if isinstance(other, OneForm):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.part.items()))
        return self._hash


def off_independent(w: OneForm) -> dict:
    """Components of ``w`` off the independent covectors."""
    if isinstance(w, ContactForm):
        return w.part
    return {c: v for c, v in w.coeffs.items() if c.kind != INDEPENDENT}


def format_terms(terms: list) -> str:
    """Render ``[(coefficient, basis_name)]`` as a signed sum."""
    if not terms:
        return "0"
    out = []
    for k, (v, name) in enumerate(terms):
        s = str(v)
        neg = False
        if s == "1":
            body = name
        elif s == "-1":
            body, neg = name, True
        else:
            if s.startswith("-") and _top_level_single(s[1:]):
                s, neg = s[1:], True
            body = (s if _top_level_single(s) else f"({s})") + "*" + name
        if k == 0:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


def _top_level_single(s: str) -> bool:
    depth = 0
    for i, ch in enumerate(s):
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
        elif depth == 0 and ch in "+-" and i > 0 and s[i - 1] == " ":
            return False
        elif depth == 0 and ch == "/":
            return False
    return True


class TwoForm:
    """``sum coeffs[(p, q)] dp^dq`` with ``p`` before ``q`` in atom order."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: dict | None = None):
        self.coeffs = {k: v for k, v in (coeffs or {}).items() if v.num}

    def __add__(self, other: "TwoForm") -> "TwoForm":
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return TwoForm(out)

    def __neg__(self):
        return TwoForm({k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, k):
        k = as_expr(k)
        return TwoForm({p: v * k for p, v in self.coeffs.items()})

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        if not isinstance(other, TwoForm):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __str__(self):
        items = sorted(self.coeffs.items(), key=lambda t: (t[0][0].key, t[0][1].key))
        return format_terms([(v, f"d{p.display()}^d{q.display()}") for (p, q), v in items])

    def __repr__(self):
        return f"TwoForm({self})"


def wedge(a: OneForm, b: OneForm) -> TwoForm:
    out: dict = {}
    for p, u in a.coeffs.items():
        for q, v in b.coeffs.items():
            if p is q:
                continue
            if p.key < q.key:
                k, c = (p, q), u * v
            else:
                k, c = (q, p), -(u * v)
            out[k] = out[k] + c if k in out else c
    return TwoForm(out)


_DIFF_CACHE: dict = {}


def differential(e) -> OneForm:
    """``de`` expanded over coordinate covectors (chain rule through symbols)."""
    e = as_expr(e)
    got = _DIFF_CACHE.get(e)
    if got is None:
        got = OneForm({c: partial(e, c) for c in e.coords()})
        _DIFF_CACHE[e] = got
    return got


def d(w: OneForm) -> TwoForm:
    out = TwoForm()
    for c, v in w.coeffs.items():
        out = out + wedge(differential(v), OneForm.d(c))
    return out


# ---------------------------------------------------------------------------
# vector fields


class VectorField:
    """A derivation of the expression field, determined by its values on
    coordinates."""

    label = "Z"
    # True when Lie derivatives along the field map contact forms to contact forms
    preserves_contact = False

    def __init__(self):
        self._lie_cache: dict = {}

    def apply(self, e) -> Expr:
        raise NotImplementedError

    def on_coord(self, c: Atom) -> Expr:
        raise NotImplementedError

    def __call__(self, e) -> Expr:
        return self.apply(e)

    def __str__(self):
        return self.label


class Finite(VectorField):
    """``sum components[c] d/dc`` over finitely many coordinates."""

    def __init__(self, components: dict, label: str = "Z"):
        super().__init__()
        self.components = {c: as_expr(v) for c, v in components.items() if as_expr(v).num}
        self.label = label
        self._cache: dict = {}

    def on_coord(self, c: Atom) -> Expr:
        return self.components.get(c, ZERO)

    def apply(self, e) -> Expr:
        return apply_derivation(as_expr(e), self.on_coord, self._cache)

    def __eq__(self, other):
        return isinstance(other, Finite) and self.components == other.components

    def __hash__(self):
        return hash(frozenset(self.components.items()))

    def describe(self) -> str:
        items = sorted(self.components.items(), key=lambda t: t[0].key)
        return format_terms([(v, f"d/d{c.display()}") for c, v in items])

    def __repr__(self):
        return f"Finite({self.describe()})"


class Combination(VectorField):
    """``sum coef_k * field_k`` with expression coefficients."""

    def __init__(self, terms: Iterable, label: str = "Z"):
        super().__init__()
        self.terms = [(as_expr(k), f) for k, f in terms if as_expr(k).num]
        self.label = label
        self.preserves_contact = all(k.is_constant() and f.preserves_contact for k, f in self.terms)

    def on_coord(self, c: Atom) -> Expr:
        out = ZERO
        for k, f in self.terms:
            out = out + k * f.on_coord(c)
        return out

    def apply(self, e) -> Expr:
        out = ZERO
        for k, f in self.terms:
            out = out + k * f.apply(e)
        return out


def evaluate(w: OneForm, z: VectorField) -> Expr:
    """The pairing ``w(Z)``."""
    out = ZERO
    for c, v in w.coeffs.items():
        zc = z.on_coord(c)
        if zc.num:
            out = out + v * zc
    return out


def lie(z: VectorField, w: OneForm) -> OneForm:
    """``L_Z w = sum Z(a_c) dc + a_c d(Z c)`` for ``w = sum a_c dc``."""
    got = z._lie_cache.get(w)
    if got is not None:
        return got
    out: dict = {}

    def acc(c, v):
        if v.num:
            out[c] = out[c] + v if c in out else v

    if isinstance(w, ContactForm) and z.preserves_contact:
        # Z(x_i) is constant, so the dx_i terms of w only feed dx_i terms
        for c, a in w.part.items():
            acc(c, z.apply(a))
            zc = z.on_coord(c)
            if zc.num:
                for b, g in differential(zc).coeffs.items():
                    if b.kind != INDEPENDENT:
                        acc(b, a * g)
        got = ContactForm(out, w.fields)
        z._lie_cache[w] = got
        return got
    for c, a in w.coeffs.items():
        acc(c, z.apply(a))
        zc = z.on_coord(c)
        if zc.num:
            for b, g in differential(zc).coeffs.items():
                acc(b, a * g)
    got = OneForm(out)
    z._lie_cache[w] = got
    return got


def contract(z: VectorField, t: TwoForm) -> OneForm:
    """Interior product ``Z _| t`` with ``Z _| (dp^dq) = Z(p) dq - Z(q) dp``."""
    out = ZERO_FORM
    for (p, q), v in t.coeffs.items():
        zp, zq = z.on_coord(p), z.on_coord(q)
        terms = {}
        if zp.num:
            terms[q] = v * zp
        if zq.num:
            terms[p] = terms.get(p, ZERO) - v * zq
        out = out + OneForm(terms)
    return out


def bracket(x: VectorField, y: VectorField, coords: Iterable[Atom], label: str = "[X,Y]") -> Finite:
    """The commutator ``[X, Y]`` restricted to ``coords``."""
    return Finite({c: x.apply(y.on_coord(c)) - y.apply(x.on_coord(c)) for c in coords}, label)
