"""Linear algebra for modules of one-forms over the expression field.

A :class:`FormModule` is a finite span.  A :class:`Tower` is an increasing
family of finite spans ``level(0) ⊂ level(1) ⊂ ...`` standing in for an
infinitely generated module at truncation order; kernels and fixed points of
towers are computed level by level.
"""
from __future__ import annotations

import random
from typing import Callable, Iterable

from . import _poly as P

from .errors import NoStabilization, TruncationOverflow
from .forms import Combination, Finite, OneForm, VectorField, contract, d, evaluate, lie, off_independent, wedge
from .symexpr import DEFAULT_PRIME, INDEPENDENT, ONE, ZERO, Atom, Expr, ZeroTest

_SYMBOLIC = ZeroTest("symbolic")


def _atom_key(a):
    return a.key


def _int_key(i):
    return i


class Echelon:
    """Incremental fully reduced row echelon form over the expression field.

    Rows are dicts ``column -> Expr`` with pivot entry exactly 1 and zeros in
    every other pivot column.  ``pivot_rule="cheap"`` picks the simplest
    coefficient as pivot (constants first, then lowest degree, then column
    order); ``"leftmost"`` gives the classical RREF for ``colkey``.
    With ``track=True`` every row carries its expression as a combination of
    the inserted vectors (tags).
    """

    def __init__(self, colkey: Callable = _atom_key, pivot_rule: str = "cheap",
                 zero_test: ZeroTest | None = None, track: bool = False):
        self.colkey = colkey
        self.pivot_rule = pivot_rule
        self.zero_test = zero_test or _SYMBOLIC
        self.track = track
        self.rows: list = []
        self.tags: list = []
        self.pivots: list = []
        self.pidx: dict = {}
        # non-constant pivots divided by: the result holds where they are nonzero
        self.assumptions: list = []

    def __len__(self):
        return len(self.rows)

    def _is_zero(self, e: Expr) -> bool:
        if not e.num:
            return True
        if self.zero_test.mode == "symbolic":
            return False
        return self.zero_test(e)

    def _clean(self, vec: dict) -> dict:
        return {k: v for k, v in vec.items() if not self._is_zero(v)}

    def reduce(self, vec: dict, tag: dict | None = None):
        """Return ``(residual, tag)`` after subtracting pivot rows."""
        vec = dict(vec)
        tag = dict(tag) if tag is not None else ({} if self.track else None)
        hits = [c for c in vec if c in self.pidx]
        for p in hits:
            c = vec[p]
            i = self.pidx[p]
            for col, val in self.rows[i].items():
                vec[col] = vec[col] - c * val if col in vec else -(c * val)
            if tag is not None:
                for k, val in self.tags[i].items():
                    tag[k] = tag[k] - c * val if k in tag else -(c * val)
        vec = self._clean(vec)
        if tag is not None:
            tag = {k: v for k, v in tag.items() if v.num}
        return vec, tag

    def _choose(self, vec: dict):
        if self.pivot_rule == "leftmost":
            return min(vec, key=self.colkey)

        def cost(c):
            v = vec[c]
            return (0 if v.is_constant() else 1, v.size(), self.colkey(c))

        return min(vec, key=cost)

    def insert(self, vec: dict, tag: dict | None = None):
        """Insert a vector.  Returns ``(independent, tag)``; for a dependent
        vector ``tag`` expresses ``vec - sum(...)`` as a zero combination."""
        vec, tag = self.reduce(vec, tag)
        if not vec:
            return False, tag
        p = self._choose(vec)
        if not vec[p].is_constant():
            self.assumptions.append(vec[p])
        inv = vec[p].inverse()
        row = {c: (ONE if c is p else v * inv) for c, v in vec.items()}
        rtag = {k: v * inv for k, v in tag.items()} if tag is not None else None
        for i, other in enumerate(self.rows):
            c = other.get(p)
            if c is None:
                continue
            new = dict(other)
            for col, val in row.items():
                new[col] = new[col] - c * val if col in new else -(c * val)
            self.rows[i] = self._clean(new)
            if rtag is not None:
                ot = dict(self.tags[i])
                for k, val in rtag.items():
                    ot[k] = ot[k] - c * val if k in ot else -(c * val)
                self.tags[i] = {k: v for k, v in ot.items() if v.num}
        self.rows.append(row)
        self.tags.append(rtag)
        self.pivots.append(p)
        self.pidx[p] = len(self.rows) - 1
        return True, rtag


class FormModule:
    """Span of finitely many one-forms.

    ``domain`` lists the coordinates on which annihilating vector fields are
    sought; by default the covectors, the coordinates the coefficients depend
    on, and the independent variables among them.

    With ``contact=True`` the generators are contact forms, which are fixed by
    their components off the independent covectors; span computations then
    drop the ``dx_i`` columns (whose coefficients are the largest), and
    :meth:`contains`, :meth:`reduce` and :meth:`express` expect contact forms.
    :attr:`full_echelon` keeps every column for the exterior calculus.
    """

    is_tower = False

    def __init__(self, generators: Iterable[OneForm] = (), *, domain: Iterable[Atom] | None = None,
                 zero_test: ZeroTest | None = None, label: str = "", contact: bool = False):
        self.zero_test = zero_test or _SYMBOLIC
        self.generators = [g for g in generators]
        self.label = label
        self.contact = contact
        self.echelon = Echelon(zero_test=self.zero_test)
        self.basis = []
        for g in self.generators:
            if self.echelon.insert(self.vector(g))[0]:
                self.basis.append(g)
        self._domain = None if domain is None else sorted(set(domain), key=_atom_key)
        self._tagged = None
        self._full = None if contact else self.echelon
        self.assumptions = list(self.echelon.assumptions)

    def vector(self, w: OneForm) -> dict:
        """Coordinates of ``w`` used by the span computations."""
        if not self.contact:
            return w.coeffs
        return off_independent(w)

    @property
    def full_echelon(self) -> Echelon:
        if self._full is None:
            self._full = Echelon(zero_test=self.zero_test)
            for g in self.basis:
                self._full.insert(g.coeffs)
        return self._full

    @property
    def rank(self) -> int:
        return len(self.basis)

    def __len__(self):
        return self.rank

    def level(self, n: int) -> "FormModule":
        return self

    @property
    def domain(self) -> list:
        if self._domain is None:
            s = set()
            for g in self.basis:
                s |= g.coords()
            self._domain = sorted(s, key=_atom_key)
        return self._domain

    def reduce(self, w: OneForm) -> OneForm:
        if self.contact:
            vec, _ = self.full_echelon.reduce(w.coeffs)
        else:
            vec, _ = self.echelon.reduce(w.coeffs)
        return OneForm(vec)

    def contains(self, w: OneForm) -> bool:
        return not self.echelon.reduce(self.vector(w))[0]

    def contains_module(self, other: "FormModule") -> bool:
        return all(self.contains(g) for g in other.basis)

    def same_span(self, other: "FormModule") -> bool:
        return self.rank == other.rank and self.contains_module(other)

    def express(self, w: OneForm) -> list | None:
        """Coefficients of ``w`` in :attr:`basis`, or ``None`` if ``w`` is not
        in the span."""
        if self._tagged is None:
            self._tagged = Echelon(zero_test=self.zero_test, track=True)
            for i, g in enumerate(self.basis):
                self._tagged.insert(self.vector(g), {i: ONE})
        vec, tag = self._tagged.reduce(self.vector(w), {})
        if vec:
            return None
        return [-tag.get(i, ZERO) for i in range(self.rank)]

    def __str__(self):
        return "span{" + ", ".join(str(g) for g in self.basis) + "}"

    def __repr__(self):
        return f"FormModule(rank={self.rank})"


def span(forms: Iterable[OneForm], **kw) -> FormModule:
    return FormModule(forms, **kw)


def contains(m: FormModule, w: OneForm) -> bool:
    return m.contains(w)


class Tower:
    """Increasing family of finite modules indexed by a truncation level.

    ``builder(n)`` returns level ``n`` and may raise :class:`TruncationOverflow`
    when the chart cannot support it.
    """

    is_tower = True

    def __init__(self, builder: Callable[[int], FormModule], top: int, label: str = ""):
        self._builder = builder
        self._levels: dict = {}
        self._failed: set = set()
        self.hint = top
        self.label = label

    def level(self, n: int) -> FormModule:
        if n < 0:
            raise ValueError("negative level")
        got = self._levels.get(n)
        if got is None:
            if n in self._failed:
                raise TruncationOverflow(f"level {n} of {self.label or 'tower'} exceeds truncation")
            try:
                got = self._builder(n)
            except TruncationOverflow:
                self._failed.add(n)
                raise
            self._levels[n] = got
        return got

    def available(self, n: int) -> bool:
        try:
            self.level(n)
            return True
        except TruncationOverflow:
            return False

    def top(self) -> int:
        """Highest level that can be built (-1 if none)."""
        n = self.hint
        while n >= 0 and not self.available(n):
            n -= 1
        return n

    def ranks(self, upto: int | None = None) -> list:
        upto = self.top() if upto is None else upto
        return [self.level(i).rank for i in range(upto + 1)]


# ---------------------------------------------------------------------------
# kernels


def modp_rank(vectors: list, seed: int = 0, prime: int = DEFAULT_PRIME, retries: int = 8) -> int | None:
    """Rank of the vectors evaluated at a random point modulo ``prime``.

    A lower bound for the rank over the expression field: a minor that is
    nonzero at a point is nonzero.  ``None`` if every sampled point hits a
    pole.
    """
    ids = set()
    for v in vectors:
        for e in v.values():
            ids.update(a.id for a in e.atoms)
    rng = random.Random(seed)
    for _ in range(retries):
        point = {i: rng.randrange(1, prime) for i in sorted(ids)}
        rows = []
        for v in vectors:
            row = {}
            for c, e in v.items():
                den = P.evaluate_mod(e.den, point, prime)
                if not den:
                    break
                val = P.evaluate_mod(e.num, point, prime) * pow(den, -1, prime) % prime
                if val:
                    row[c] = val
            else:
                rows.append(row)
                continue
            break
        else:
            return _rank_mod(rows, prime)
    return None


def _rank_mod(rows: list, prime: int) -> int:
    pivots: dict = {}
    for row in rows:
        row = dict(row)
        for c, prow in pivots.items():
            k = row.get(c)
            if k:
                for cc, vv in prow.items():
                    row[cc] = (row.get(cc, 0) - k * vv) % prime
                row = {cc: vv for cc, vv in row.items() if vv}
        if row:
            c = min(row, key=str)
            inv = pow(row[c], -1, prime)
            pivots[c] = {cc: vv * inv % prime for cc, vv in row.items()}
    return len(pivots)


def ker_vf(m: FormModule, ambient: FormModule, z: VectorField, label: str = "") -> FormModule:
    """Largest submodule ``K ⊆ m`` with ``L_Z K ⊆ ambient``.

    The basis is the reduced echelon form of the coefficient vectors over
    ``m.basis`` (leftmost pivots in generator order).
    """
    if ambient.contact and getattr(z, "preserves_contact", False):
        residuals = [ambient.echelon.reduce(ambient.vector(lie(z, g)))[0] for g in m.basis]
    else:
        residuals = [ambient.full_echelon.reduce(lie(z, g).coeffs)[0] for g in m.basis]
    if residuals and all(residuals) and modp_rank(residuals) == len(residuals):
        # independent residuals: the kernel is zero
        return FormModule([], domain=m._domain, zero_test=m.zero_test, label=label, contact=m.contact)
    e = Echelon(zero_test=m.zero_test, track=True)
    kernel = []
    for i, r in enumerate(residuals):
        indep, tag = e.insert(r, {i: ONE})
        if not indep:
            kernel.append(tag)
    rref = Echelon(colkey=_int_key, pivot_rule="leftmost", zero_test=m.zero_test)
    for kv in kernel:
        rref.insert(kv)
    order = sorted(range(len(rref.rows)), key=lambda i: rref.pivots[i])
    forms = []
    for i in order:
        w = OneForm()
        for j, c in sorted(rref.rows[i].items()):
            w = w + m.basis[j] * c
        forms.append(w)
    out = FormModule(forms, domain=m._domain, zero_test=m.zero_test, label=label, contact=m.contact)
    out.assumptions += list(e.assumptions) + list(rref.assumptions)
    return out


class KernelTower(Tower):
    """Levelwise ``ker_vf(base(N), base(N+1), Z)``."""

    def __init__(self, base: Tower, z: VectorField, label: str = ""):
        self.base = base
        self.field = z
        super().__init__(lambda n: ker_vf(base.level(n), base.level(n + 1), z), base.hint - 1, label)


class KerChain:
    """Result of :func:`iterate_ker`."""

    def __init__(self, module, chain: list, stable: bool, steps: list, level: int | None = None):
        self.module = module
        self.chain = chain
        self.stable = stable
        self.steps = steps
        self.level = level

    def __repr__(self):
        return f"KerChain(chain={self.chain}, stable={self.stable}, level={self.level})"


def iterate_ker(m, z: VectorField, max_iter: int = 12) -> KerChain:
    """Iterate ``Ker_Z`` until the span stops shrinking.

    For a finite module each step is ``ker_vf(K, K, Z)``.  For a tower the
    ranks are compared at the two highest levels both towers reach; the
    returned chain lists ranks at the final comparison level and the returned
    module is the last tower that did not shrink, reported at its top level.
    """
    if not m.is_tower:
        steps = [m]
        cur = m
        for _ in range(max_iter):
            nxt = ker_vf(cur, cur, z)
            steps.append(nxt)
            if nxt.rank == cur.rank:
                return KerChain(nxt, [s.rank for s in steps], True, steps)
            cur = nxt
        raise NoStabilization(f"kernel chain still shrinking after {max_iter} steps: {[s.rank for s in steps]}")
    steps = [m]
    cur = m
    top = m.top()
    for _ in range(max_iter):
        nxt = KernelTower(cur, z)
        nxt.hint = top - 1
        ntop = nxt.top()
        if ntop < 1:
            raise NoStabilization("truncation exhausted before the kernel chain stabilized")
        steps.append(nxt)
        if all(nxt.level(lv).rank == cur.level(lv).rank for lv in (ntop, ntop - 1)):
            # cur is the fixed point; it reaches one level further than nxt
            chain = [s.level(ntop).rank for s in steps]
            return KerChain(cur, chain, True, steps, top)
        cur, top = nxt, ntop
    raise NoStabilization(f"kernel chain still shrinking after {max_iter} steps")


# ---------------------------------------------------------------------------
# annihilators, Adj, flatness, Cauchy characteristics


def h_module(m: FormModule, domain: Iterable[Atom] | None = None, label: str = "Z") -> list:
    """Basis of vector fields on ``domain`` annihilated by every generator.

    Each field is normalized to have component 1 on one free coordinate and 0
    on the others; independents come first among free coordinates.
    """
    dom = sorted(set(domain if domain is not None else m.domain), key=_atom_key)
    inside = set(dom)
    e = Echelon(zero_test=m.zero_test)
    for g in m.basis:
        e.insert({c: v for c, v in g.coeffs.items() if c in inside})
    free = [c for c in dom if c not in e.pidx]
    out = []
    for k, f in enumerate(free):
        comps = {f: ONE}
        for i, row in enumerate(e.rows):
            v = row.get(f)
            if v is not None:
                comps[e.pivots[i]] = -v
        name = f"d/d{f.display()}" if f.kind != INDEPENDENT else f"H_{f.display()}"
        out.append(Finite(comps, label=name))
    return out


def adj(m: FormModule, fields: list | None = None) -> FormModule:
    """Span of the generators and ``X _| d(theta)`` for ``X`` in ``H(m)``."""
    if m.rank == 0:
        return m
    hs = h_module(m) if fields is None else fields
    extra = [contract(x, d(g)) for g in m.basis for x in hs]
    return FormModule(list(m.basis) + extra, domain=m._domain, zero_test=m.zero_test)


def adj_closed(m: FormModule, ambient: FormModule, fields: list) -> list:
    """Forms ``X _| d(theta)`` that fall outside ``ambient`` (empty when closed)."""
    bad = []
    for g in m.basis:
        dg = d(g)
        for x in fields:
            w = contract(x, dg)
            if ambient.full_echelon.reduce(w.coeffs)[0]:
                bad.append((g, x, w))
    return bad


def _reduced_two_form(t, ech: Echelon):
    """Image of a two-form in the exterior square of the quotient by the rows."""
    subst = {}
    for i, p in enumerate(ech.pivots):
        subst[p] = OneForm({c: -v for c, v in ech.rows[i].items() if c is not p})
    out = None
    for (p, q), v in t.coeffs.items():
        a = subst[p] if p in subst else OneForm.d(p)
        b = subst[q] if q in subst else OneForm.d(q)
        if a.is_zero() or b.is_zero():
            continue
        term = wedge(a, b) * v
        out = term if out is None else out + term
    return out


def flatness_defects(m: FormModule, ambient: FormModule | None = None) -> list:
    """Generators whose exterior derivative is nonzero modulo ``ambient``
    (default ``m``), decided by substituting the echelon pivots."""
    amb = m if ambient is None else ambient
    bad = []
    for g in m.basis:
        r = _reduced_two_form(d(g), amb.full_echelon)
        if r is not None and not r.is_zero():
            bad.append((g, r))
    return bad


def is_flat(m: FormModule, ambient: FormModule | None = None) -> bool:
    """Frobenius condition ``d(theta) = 0 mod m`` for every generator."""
    return not flatness_defects(m, ambient)


def cauchy(m: FormModule, fields: list | None = None, ambient: FormModule | None = None) -> list:
    """Fields ``Z`` in the span of ``H(m)`` with ``Z _| d(theta)`` in ``m``
    (or ``ambient``) for every generator."""
    amb = m if ambient is None else ambient
    hs = h_module(m) if fields is None else fields
    if not hs:
        return []
    dgs = [d(g) for g in m.basis]
    # columns are (generator index, covector)
    cols: list = []
    for k, x in enumerate(hs):
        vec = {}
        for j, dg in enumerate(dgs):
            r, _ = amb.full_echelon.reduce(contract(x, dg).coeffs)
            for c, v in r.items():
                vec[(j, c)] = v
        cols.append(vec)
    e = Echelon(colkey=lambda t: (t[0], t[1].key), zero_test=m.zero_test, track=True)
    kernel = []
    for k, vec in enumerate(cols):
        indep, tag = e.insert(vec, {k: ONE})
        if not indep:
            kernel.append(tag)
    rref = Echelon(colkey=_int_key, pivot_rule="leftmost", zero_test=m.zero_test)
    for kv in kernel:
        rref.insert(kv)
    out = []
    for i in sorted(range(len(rref.rows)), key=lambda i: rref.pivots[i]):
        row = rref.rows[i]
        if len(row) == 1:
            (k,) = row
            out.append(hs[k])
        else:
            comps: dict = {}
            for k, c in sorted(row.items()):
                for a, v in hs[k].components.items():
                    comps[a] = comps.get(a, ZERO) + c * v
            out.append(Finite(comps, label="C"))
    return out


def annihilates(m: FormModule, fields: list) -> bool:
    return all(not evaluate(g, x).num for g in m.basis for x in fields)


__all__ = [
    "Echelon", "FormModule", "Tower", "KernelTower", "KerChain", "span", "contains", "ker_vf",
    "iterate_ker", "h_module", "adj", "adj_closed", "is_flat", "flatness_defects", "cauchy",
    "annihilates", "Combination",
]
