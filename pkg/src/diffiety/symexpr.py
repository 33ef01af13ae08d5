"""Exact rational expressions over jet atoms and uninterpreted function symbols.

An :class:`Expr` is a reduced fraction of two sparse integer polynomials
(see :mod:`._poly`) whose indeterminates are :class:`Atom` objects.  The sign
convention and the printed term order both follow the atom sort key, so the
normal form does not depend on the order in which atoms were created.

Atoms are interned: two atoms are equal exactly when they are the same object.
"""
from __future__ import annotations

import random
import threading
from fractions import Fraction
from math import gcd as igcd
from typing import Callable, Iterable

from . import _poly as P
from .errors import DegenerateImplicitRelation, DivisionByZero, ProbeExhausted

INDEPENDENT, JET, FUNC = 0, 1, 2

# 2**61 - 1
DEFAULT_PRIME = 2305843009213693951

_LOCK = threading.RLock()

# id -> Atom; ids are assigned in creation order and never reused
ATOMS: list = []


class Atom:
    """Indeterminate of the expression field.

    Use the constructors :meth:`independent`, :meth:`jet` and :meth:`func`;
    they return interned instances.
    """

    __slots__ = ("kind", "name", "index", "multi", "symbol", "inames", "id", "key", "__weakref__")
    _table: dict = {}

    def __init__(self, *a, **k):  # pragma: no cover - use the constructors
        raise TypeError("use Atom.independent / Atom.jet / Atom.func")

    @classmethod
    def _intern(cls, kind, name, index, multi, symbol, inames):
        ident = (kind, name, index, multi, symbol, inames)
        with _LOCK:
            atom = cls._table.get(ident)
            if atom is None:
                atom = object.__new__(cls)
                atom.kind = kind
                atom.name = name
                atom.index = index
                atom.multi = multi
                atom.symbol = symbol
                atom.inames = inames
                atom.id = len(ATOMS)
                ATOMS.append(atom)
                if kind == INDEPENDENT:
                    atom.key = (0, index, name)
                elif kind == JET:
                    atom.key = (1, index, len(multi), multi, name)
                else:
                    atom.key = (2, name, len(multi), multi, symbol.args_key)
                cls._table[ident] = atom
            return atom

    @classmethod
    def independent(cls, i: int, name: str) -> "Atom":
        return cls._intern(INDEPENDENT, name, i, (), None, ())

    @classmethod
    def jet(cls, j: int, multi: Iterable[int], name: str, inames: tuple[str, ...] = ()) -> "Atom":
        """Jet coordinate ``w^j_I``; ``multi`` lists independent indices with repetition."""
        return cls._intern(JET, name, j, tuple(sorted(multi)), None, tuple(inames))

    @classmethod
    def func(cls, symbol: "FuncSymbol", slots: Iterable[int] = ()) -> "Atom":
        slots = tuple(sorted(slots))
        if slots and symbol.relation is not None:
            raise ValueError(f"derivatives of implicit symbol {symbol.name} are rewritten, not stored")
        return cls._intern(FUNC, symbol.name, 0, slots, symbol, ())

    @property
    def order(self) -> int:
        return len(self.multi) if self.kind == JET else 0

    def with_extra(self, k: int) -> "Atom":
        """Same kind with one more index/slot ``k``."""
        if self.kind == JET:
            return Atom.jet(self.index, self.multi + (k,), self.name, self.inames)
        if self.kind == FUNC:
            return Atom.func(self.symbol, self.multi + (k,))
        raise ValueError("independent atoms have no derivatives")

    def __lt__(self, other):
        return self.key < other.key

    def __reduce__(self):
        if self.kind == INDEPENDENT:
            return (Atom.independent, (self.index, self.name))
        if self.kind == JET:
            return (Atom.jet, (self.index, self.multi, self.name, self.inames))
        return (Atom.func, (self.symbol, self.multi))

    # display -------------------------------------------------------------
    def subscript(self) -> str:
        """``u_{10}``-style name (counts per independent variable)."""
        if self.kind != JET or not self.multi:
            return self.display()
        n = max(len(self.inames), max(self.multi) + 1)
        counts = [self.multi.count(i) for i in range(n)]
        sep = "," if max(counts) > 9 else ""
        return f"{self.name}_{{{sep.join(map(str, counts))}}}"

    def classical(self) -> str:
        """``u_xy``-style name when the independent names are single letters."""
        if self.kind != JET:
            return self.display()
        if not self.multi:
            return self.name
        if self.inames and all(len(s) == 1 for s in self.inames) and len(self.inames) <= 3:
            return self.name + "_" + "".join(self.inames[i] for i in self.multi)
        return self.subscript()

    def display(self) -> str:
        if self.kind == INDEPENDENT:
            return self.name
        if self.kind == JET:
            return self.classical()
        sym = self.symbol
        head = sym.name
        if self.multi:
            if len(sym.args) == 1:
                head += "'" * len(self.multi)
            else:
                head += "_{" + " ".join(sym.slot_label(k) for k in self.multi) + "}"
        if sym.show_args:
            head += "(" + ", ".join(str(a) for a in sym.args) + ")"
        return head

    def dsl(self) -> str:
        if self.kind == FUNC:
            if self.multi:
                raise ValueError("derivative atoms have no DSL spelling")
            if self.symbol.relation is not None:
                return self.symbol.name
            return self.symbol.name + "(" + ", ".join(a.to_dsl() for a in self.symbol.args) + ")"
        if self.kind == JET and self.multi and self.classical() == self.subscript():
            n = max(len(self.inames), max(self.multi) + 1)
            return f"{self.name}[{','.join(str(self.multi.count(i)) for i in range(n))}]"
        return self.classical()

    def __repr__(self):
        return f"Atom({self.display()})"

    __str__ = display


class FuncSymbol:
    """Uninterpreted function applied to argument expressions.

    ``relation`` (optional) is an expression ``R(args..., self)`` whose zero set
    defines the symbol implicitly.  Interned by ``(name, args)``.
    """

    __slots__ = ("name", "args", "slot_names", "relation", "jacobian", "args_key", "__weakref__")
    _table: dict = {}

    def __new__(cls, name: str, args: Iterable, slot_names: Iterable[str] | None = None):
        args = tuple(as_expr(a) for a in args)
        with _LOCK:
            sym = cls._table.get((name, args))
            if sym is None:
                sym = object.__new__(cls)
                sym.name = name
                sym.args = args
                sym.slot_names = tuple(slot_names) if slot_names else None
                sym.relation = None
                sym.jacobian = None
                sym.args_key = tuple(str(a) for a in args)
                cls._table[(name, args)] = sym
            elif slot_names and sym.slot_names is None:
                sym.slot_names = tuple(slot_names)
            return sym

    def __reduce__(self):
        return (FuncSymbol, (self.name, self.args, self.slot_names))

    @property
    def atom(self) -> Atom:
        return Atom.func(self)

    @property
    def expr(self) -> "Expr":
        return Expr.atom(Atom.func(self))

    def deriv(self, *slots: int) -> "Expr":
        """The formal derivative ``F_{slots}`` as an expression."""
        if self.relation is not None:
            raise ValueError("use implicit_partial for implicit symbols")
        return Expr.atom(Atom.func(self, slots))

    @property
    def show_args(self) -> bool:
        return len(self.args) == 1 or any(not a.is_atom() for a in self.args)

    def slot_label(self, k: int) -> str:
        if self.slot_names:
            return self.slot_names[k]
        a = self.args[k]
        return str(a) if a.is_atom() else str(k + 1)

    def __repr__(self):
        return f"FuncSymbol({self.name}/{len(self.args)})"


def declare_implicit(name: str, args: Iterable, relation: Callable[["Expr"], "Expr"],
                     slot_names: Iterable[str] | None = None) -> FuncSymbol:
    """Declare ``name(args)`` implicitly through ``relation(self) == 0``.

    The Jacobian ``dR/dself`` must not vanish identically.
    """
    sym = FuncSymbol(name, args, slot_names)
    rel = as_expr(relation(sym.expr))
    if sym.relation is not None:
        if sym.relation != rel:
            raise ValueError(f"symbol {name} already carries a different relation")
        return sym
    jac = partial(rel, sym.atom, frozenset({sym}))
    if jac.is_zero():
        raise DegenerateImplicitRelation(f"relation for {name} does not depend on {name}")
    allowed = set()
    for a in sym.args:
        allowed |= a.coords()
    for b in rel.atoms:
        if b is sym.atom:
            continue
        extra = atom_coords(b) - allowed
        if extra:
            raise ValueError(f"relation for {name} depends on {sorted(map(str, extra))} outside its arguments")
    sym.relation = rel
    sym.jacobian = jac
    return sym


def _mono_key(m: tuple) -> tuple:
    """Display and sign-normalization order: higher degree first, then by atoms."""
    return (-sum(e for _, e in m), tuple(sorted((ATOMS[v].key, -e) for v, e in m)))


def _lead_coeff(p: dict) -> int:
    return p[min(p, key=_mono_key)]


class Expr:
    """Canonical fraction ``num/den`` of sparse integer polynomials.

    ``gcd(num, den) = 1`` including integer content, and the leading
    coefficient of ``den`` (lexicographic in the atom order) is positive, so
    two expressions are equal exactly when their fields are equal.
    """

    __slots__ = ("num", "den", "_hash", "_str", "_atoms")

    def __init__(self, num: dict, den: dict):
        # trusted constructor: arguments already canonical
        self.num = num
        self.den = den
        self._hash = None
        self._str = None
        self._atoms = None

    # construction --------------------------------------------------------
    @staticmethod
    def const(value) -> "Expr":
        q = Fraction(value)
        if not q:
            return ZERO
        return Expr(P.const(q.numerator), P.const(q.denominator))

    @staticmethod
    def atom(a: Atom) -> "Expr":
        return Expr(P.var(a.id), P.P_ONE)

    @staticmethod
    def _build(num: dict, den: dict, reduced: bool = False) -> "Expr":
        if not num:
            return ZERO
        if not den:
            raise DivisionByZero("division by an expression identical to zero")
        dc = P.const_value(den)
        if dc is not None:
            if dc == 1:
                return Expr(num, P.P_ONE)
            g = igcd(P.content(num), dc)
            if dc < 0:
                g = -g
            if g != 1:
                num = {m: c // g for m, c in num.items()}
                dc //= g
            return Expr(num, P.P_ONE if dc == 1 else P.const(dc))
        g = P.P_ONE if reduced else P.gcd(num, den)
        if g != P.P_ONE:
            num = P.exact_div(num, g)
            den = P.exact_div(den, g)
            dc = P.const_value(den)
            if dc is not None:
                return Expr._build(num, den)
        if _lead_coeff(den) < 0:
            num, den = P.neg(num), P.neg(den)
        return Expr(num, den)

    # queries -------------------------------------------------------------
    @property
    def atoms(self) -> tuple:
        """Atoms occurring in the expression, in canonical order."""
        if self._atoms is None:
            ids = P.variables(self.num) | P.variables(self.den)
            self._atoms = tuple(sorted((ATOMS[i] for i in ids), key=lambda a: a.key))
        return self._atoms

    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return P.is_const(self.num) and P.is_const(self.den)

    def is_one(self) -> bool:
        return self.num == P.P_ONE and self.den == P.P_ONE

    def is_atom(self) -> bool:
        if self.den != P.P_ONE or len(self.num) != 1:
            return False
        ((m, c),) = self.num.items()
        return c == 1 and len(m) == 1 and m[0][1] == 1

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("not a constant")
        return Fraction(self.num.get((), 0), self.den.get((), 1))

    def is_polynomial(self) -> bool:
        return P.is_const(self.den)

    def size(self) -> tuple:
        """Cost measure used for pivot selection: (total degree, term count)."""
        return (P.total_degree(self.num) + P.total_degree(self.den), len(self.num) + len(self.den))

    def total_degree(self) -> int:
        return max(P.total_degree(self.num), P.total_degree(self.den))

    def coords(self) -> frozenset:
        """Coordinate atoms (independent and jet) this expression depends on."""
        out = set()
        for a in self.atoms:
            out |= atom_coords(a)
        return frozenset(out)

    def numerator(self) -> "Expr":
        return Expr(self.num, P.P_ONE)

    def denominator(self) -> "Expr":
        return Expr(self.den, P.P_ONE)

    # arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = as_expr(other)
        if not other.num:
            return self
        if not self.num:
            return other
        d1, d2 = self.den, other.den
        if d1 == d2:
            num = P.add(self.num, other.num)
            if d1 is P.P_ONE or d1 == P.P_ONE:
                return Expr(num, P.P_ONE) if num else ZERO
            return Expr._build(num, d1)
        if d2 == P.P_ONE:
            return Expr._build(P.add(self.num, P.mul(other.num, d1)), d1, reduced=True)
        if d1 == P.P_ONE:
            return Expr._build(P.add(other.num, P.mul(self.num, d2)), d2, reduced=True)
        g = P.gcd(d1, d2)
        if g == P.P_ONE:
            return Expr._build(P.add(P.mul(self.num, d2), P.mul(other.num, d1)), P.mul(d1, d2), reduced=True)
        c1, c2 = P.exact_div(d2, g), P.exact_div(d1, g)
        return Expr._build(P.add(P.mul(self.num, c1), P.mul(other.num, c2)), P.mul(d1, c1))

    __radd__ = __add__

    def __neg__(self):
        return Expr(P.neg(self.num), self.den)

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) + (-self)

    def __mul__(self, other):
        other = as_expr(other)
        if not self.num or not other.num:
            return ZERO
        if self.den == P.P_ONE and other.den == P.P_ONE:
            return Expr(P.mul(self.num, other.num), P.P_ONE)
        # cross-cancel so the product of reduced fractions is already reduced
        n1, d1, n2, d2 = self.num, self.den, other.num, other.den
        g1 = P.gcd(n1, d2)
        if g1 != P.P_ONE:
            n1, d2 = P.exact_div(n1, g1), P.exact_div(d2, g1)
        g2 = P.gcd(n2, d1)
        if g2 != P.P_ONE:
            n2, d1 = P.exact_div(n2, g2), P.exact_div(d1, g2)
        return Expr._build(P.mul(n1, n2), P.mul(d1, d2), reduced=True)

    __rmul__ = __mul__

    def inverse(self) -> "Expr":
        if not self.num:
            raise DivisionByZero("division by an expression identical to zero")
        return Expr._build(self.den, self.num)

    def __truediv__(self, other):
        return self * as_expr(other).inverse()

    def __rtruediv__(self, other):
        return as_expr(other) * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported")
        if k < 0:
            return self.inverse() ** (-k)
        if k == 0:
            return ONE
        return Expr(P.power(self.num, k), P.power(self.den, k))

    def __eq__(self, other):
        if not isinstance(other, Expr):
            if isinstance(other, (int, Fraction, Atom)):
                other = as_expr(other)
            else:
                return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((frozenset(self.num.items()), frozenset(self.den.items())))
        return self._hash

    def __bool__(self):
        return bool(self.num)

    def _den_key(self):
        if self.den is P.P_ONE or self.den == P.P_ONE:
            return ()
        return frozenset(self.den.items())

    # formal differentiation with respect to an atom treated as independent
    def pdiff(self, a: Atom) -> "Expr":
        dn = P.derivative(self.num, a.id)
        if P.is_const(self.den):
            if not dn:
                return ZERO
            return Expr._build(dn, self.den)
        dd = P.derivative(self.den, a.id)
        if not dd:
            if not dn:
                return ZERO
            return Expr._build(dn, self.den)
        return Expr._build(P.sub(P.mul(dn, self.den), P.mul(self.num, dd)), P.mul(self.den, self.den))

    # printing ------------------------------------------------------------
    def __str__(self):
        if self._str is None:
            self._str = self._format(lambda a: a.display())
        return self._str

    def __repr__(self):
        return f"Expr({self})"

    def to_dsl(self) -> str:
        return self._format(lambda a: a.dsl())

    def _format(self, name) -> str:
        num = _format_poly(self.num, name)
        if self.den == P.P_ONE:
            return num
        den = _format_poly(self.den, name)
        if len(self.num) > 1:
            num = f"({num})"
        if len(self.den) > 1 or not _simple(den):
            den = f"({den})"
        return f"{num}/{den}"


def _format_poly(p: dict, name) -> str:
    if not p:
        return "0"
    parts = []
    for m in sorted(p, key=_mono_key):
        c = p[m]
        factors = []
        for v, k in sorted(m, key=lambda t: ATOMS[t[0]].key):
            nm = name(ATOMS[v])
            nm = nm if _simple(nm) else f"({nm})"
            factors.append(nm if k == 1 else f"{nm}^{k}")
        mono = "*".join(factors)
        sign = "-" if c < 0 else "+"
        c = abs(c)
        if not mono:
            body = str(c)
        elif c == 1:
            body = mono
        else:
            body = f"{c}*{mono}"
        parts.append((sign, body))
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


def _simple(name: str) -> bool:
    depth = 0
    for ch in name:
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
        elif depth == 0 and ch in " +-*/^":
            return False
    return True


ZERO = Expr({}, P.P_ONE)
ONE = Expr(P.P_ONE, P.P_ONE)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Atom):
        return Expr.atom(x)
    if isinstance(x, (int, Fraction)):
        return Expr.const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def normalize(tree) -> Expr:
    """Evaluate a raw expression tree into canonical form.

    Trees are nested tuples ``(op, *children)`` with ``op`` one of ``+ - * / **``
    (``-`` with one child negates); leaves are :class:`Expr`, :class:`Atom`,
    ints or fractions.
    """
    if isinstance(tree, (Expr, Atom, int, Fraction)):
        return as_expr(tree)
    op, *args = tree
    if op == "**":
        base, k = args
        return normalize(base) ** int(k)
    vals = [normalize(a) for a in args]
    if op == "+":
        out = ZERO
        for v in vals:
            out = out + v
        return out
    if op == "-":
        if len(vals) == 1:
            return -vals[0]
        out = vals[0]
        for v in vals[1:]:
            out = out - v
        return out
    if op == "*":
        out = ONE
        for v in vals:
            out = out * v
        return out
    if op == "/":
        out = vals[0]
        for v in vals[1:]:
            if v.is_zero():
                raise DivisionByZero("division by an expression identical to zero")
            out = out / v
        return out
    raise ValueError(f"unknown operator {op!r}")


# ---------------------------------------------------------------------------
# dependency structure and differentiation

_COORDS_CACHE: dict = {}


def atom_coords(a: Atom) -> frozenset:
    """Coordinate atoms an atom depends on (itself for coordinates)."""
    got = _COORDS_CACHE.get(a)
    if got is None:
        if a.kind != FUNC:
            got = frozenset((a,))
        else:
            s = set()
            for arg in a.symbol.args:
                for b in arg.atoms:
                    s |= atom_coords(b)
            got = frozenset(s)
        _COORDS_CACHE[a] = got
    return got


_PARTIAL_CACHE: dict = {}


def _atom_partial(b: Atom, a: Atom, frozen: frozenset) -> Expr:
    if b is a:
        return ONE
    if b.kind != FUNC:
        return ZERO
    key = (b, a, frozen)
    got = _PARTIAL_CACHE.get(key)
    if got is not None:
        return got
    sym = b.symbol
    if sym.relation is not None:
        if sym in frozen or sym.jacobian is None:
            got = ZERO
        else:
            top = partial(sym.relation, a, frozen | {sym})
            got = ZERO if top.is_zero() else -top / sym.jacobian
    elif a.kind != FUNC and a not in atom_coords(b):
        got = ZERO
    else:
        got = ZERO
        for k, arg in enumerate(sym.args):
            da = partial(arg, a, frozen)
            if not da.is_zero():
                got = got + Expr.atom(b.with_extra(k)) * da
    _PARTIAL_CACHE[key] = got
    return got


def _derive(e: Expr, image: Callable[[Atom], Expr]) -> Expr:
    """``sum_b de/db * image(b)`` over the atoms ``b`` of ``e``.

    With ``den = c * prod f_i^k_i`` this uses
    ``D(n/den) = (Dn - n * sum k_i Df_i/f_i) / den`` over one common
    denominator, so the result is reduced by a single gcd.
    """
    n, ln = _derive_poly(e.num, image)
    if P.is_const(e.den):
        return Expr._build(n, P.mul(ln, e.den)) if n else ZERO
    parts = [(n, ln)] if n else []
    _, fs = P.factors(e.den)
    for f, k in fs:
        m, lf = _derive_poly(f, image)
        if m:
            parts.append((P.mul(P.scale(m, -k), e.num), P.mul(lf, f)))
    if not parts:
        return ZERO
    num, den = parts[0]
    for a, q in parts[1:]:
        num, den = _add_fractions(num, den, a, q)
    return Expr._build(num, P.mul(den, e.den))


def _add_fractions(n1: dict, d1: dict, n2: dict, d2: dict) -> tuple:
    if d1 == d2:
        return P.add(n1, n2), d1
    g = P.gcd(d1, d2)
    c2, c1 = P.exact_div(d2, g), P.exact_div(d1, g)
    return P.add(P.mul(n1, c2), P.mul(n2, c1)), P.mul(d1, c2)


def _derive_poly(p: dict, image) -> tuple:
    """``(N, L)`` with ``N/L`` the derivative of the polynomial ``p``."""
    by_den: dict = {}
    for v, dp in P.all_derivatives(p).items():
        img = image(ATOMS[v])
        if not img.num:
            continue
        key = img._den_key()
        slot = by_den.get(key)
        if slot is None:
            slot = by_den[key] = (img.den, {})
        P.addmul_into(slot[1], dp, img.num)
    num, den = {}, P.P_ONE
    for q, acc in by_den.values():
        acc = P.clean(acc)
        if acc:
            num, den = _add_fractions(num, den, acc, q)
    return num, den


def partial(e: Expr, a: Atom, frozen: frozenset = frozenset()) -> Expr:
    """Formal partial derivative with the chain rule through function symbols.

    ``frozen`` lists implicit symbols to hold fixed (used to differentiate
    their defining relations).
    """
    e = as_expr(e)
    if not e.num:
        return ZERO
    return _derive(e, lambda b: _atom_partial(b, a, frozen))


def implicit_partial(sym: FuncSymbol, a: Atom) -> Expr:
    """``-(dR/da)/(dR/dsym)`` for an implicitly defined symbol."""
    if sym.relation is None:
        raise ValueError(f"{sym.name} is not implicit")
    if sym.jacobian is None or sym.jacobian.is_zero():
        raise DegenerateImplicitRelation(sym.name)
    return _atom_partial(sym.atom, a, frozenset())


def apply_derivation(e: Expr, image: Callable[[Atom], Expr], cache: dict) -> Expr:
    """Apply the derivation sending each coordinate ``c`` to ``image(c)``.

    Function atoms are handled by the chain rule; ``cache`` memoizes the image
    of every atom and must be private to the derivation.
    """
    e = as_expr(e)
    if not e.num:
        return ZERO
    return _derive(e, lambda b: _atom_image(b, image, cache))


def _atom_image(b: Atom, image, cache) -> Expr:
    got = cache.get(b)
    if got is not None:
        return got
    if b.kind != FUNC:
        got = as_expr(image(b))
    elif b.symbol.relation is not None:
        got = ZERO
        for c in sorted(atom_coords(b), key=lambda t: t.key):
            zc = as_expr(image(c))
            if not zc.is_zero():
                got = got + _atom_partial(b, c, frozenset()) * zc
    else:
        got = ZERO
        for k, arg in enumerate(b.symbol.args):
            za = apply_derivation(arg, image, cache)
            if not za.is_zero():
                got = got + Expr.atom(b.with_extra(k)) * za
    cache[b] = got
    return got


def substitute(e, mapping: dict) -> Expr:
    """Replace atoms by expressions (``mapping: Atom -> Expr``).

    Function atoms are replaced only as wholes; their arguments are untouched.
    """
    e = as_expr(e)
    if not any(a in mapping for a in e.atoms):
        return e

    def ev(p: dict) -> Expr:
        acc = ZERO
        for m, c in p.items():
            t = Expr.const(c)
            for v, k in m:
                a = ATOMS[v]
                t = t * (as_expr(mapping[a]) if a in mapping else Expr.atom(a)) ** k
            acc = acc + t
        return acc

    return ev(e.num) / ev(e.den)


def relation_solution(sym: FuncSymbol, allowed=None):
    """``(b, expr)`` with ``b == expr`` on the zero set of ``sym.relation``,
    for the last atom ``b`` (in atom order, jet coordinates only) the
    relation is linear in with constant coefficient; ``None`` if there is no
    such atom.  ``allowed`` optionally filters the candidates."""
    rel = sym.relation
    if rel is None:
        return None
    for b in reversed(rel.atoms):
        if b.kind != JET or (allowed is not None and not allowed(b)):
            continue
        k = rel.pdiff(b)
        if k.is_constant() and k.num and not k.pdiff(b).num:
            return b, Expr.atom(b) - rel / k
    return None


def implicit_symbols(exprs) -> list:
    """Implicit symbols reachable from ``exprs`` (through symbol arguments)."""
    out, seen = [], set()

    def visit(e):
        for a in e.atoms:
            if a.kind != FUNC or a.symbol in seen:
                continue
            seen.add(a.symbol)
            for arg in a.symbol.args:
                visit(arg)
            if a.symbol.relation is not None:
                out.append(a.symbol)

    for e in exprs:
        visit(as_expr(e))
    return out


def solve_relations(e) -> Expr:
    """Rewrite ``e`` with the relations of the implicit symbols it contains.

    For ``H(f) + u_x*f - v_x = 0`` this replaces ``v_x`` by ``H(f) + u_x*f``.
    The result equals ``e`` on the zero set of the relations.
    """
    e = as_expr(e)
    for sym in implicit_symbols([e]):
        sol = relation_solution(sym)
        if sol is not None and sol[0] in e.atoms:
            e = substitute(e, {sol[0]: sol[1]})
    return e


# ---------------------------------------------------------------------------
# zero testing

class ZeroTest:
    """Zero-test policy shared by the linear algebra.

    ``mode`` is ``"symbolic"`` (exact) or ``"probabilistic"`` (Schwartz-Zippel
    evaluation over a prime field with an explicit seed).
    """

    def __init__(self, mode: str = "symbolic", seed: int = 0, trials: int = 3,
                 prime: int = DEFAULT_PRIME, retries: int = 20):
        if mode not in ("symbolic", "probabilistic"):
            raise ValueError(f"unknown zero-test mode {mode!r}")
        self.mode = mode
        self.seed = seed
        self.trials = trials
        self.prime = prime
        self.retries = retries
        self._rng = random.Random(seed)

    def __call__(self, e: Expr) -> bool:
        if self.mode == "symbolic":
            return e.is_zero()
        return probe_zero(e, self._rng, self.trials, self.prime, self.retries)[0]


def probe_zero(e: Expr, rng: random.Random, trials: int = 3, prime: int = DEFAULT_PRIME,
               retries: int = 20) -> tuple[bool, float]:
    """Evaluate at random points mod ``prime``.

    Returns ``(is_zero, bound)``; a ``False`` verdict is certain, a ``True``
    verdict is wrong with probability at most ``bound``.
    """
    e = as_expr(e)
    atoms = e.atoms
    if not atoms:
        return e.is_zero(), 0.0
    deg = max(e.total_degree(), 1)
    for _ in range(trials):
        for _attempt in range(retries):
            point = {a.id: rng.randrange(1, prime) for a in atoms}
            if P.evaluate_mod(e.den, point, prime) == 0:
                continue
            break
        else:
            raise ProbeExhausted("every sample hit a zero of the denominator")
        if P.evaluate_mod(e.num, point, prime):
            return False, 0.0
    return True, (deg / prime) ** trials


def is_zero(e: Expr, mode: str = "symbolic", *, seed: int = 0, trials: int = 3,
            prime: int = DEFAULT_PRIME) -> bool:
    if mode == "symbolic":
        return as_expr(e).is_zero()
    if mode == "probabilistic":
        return probe_zero(e, random.Random(seed), trials, prime)[0]
    raise ValueError(f"unknown zero-test mode {mode!r}")


def genericity_assumptions(e: Expr) -> set:
    """Expressions assumed nonzero for ``e`` to be meaningful."""
    out = set()
    if not e.is_polynomial():
        out.add(e.denominator())
    for a in e.atoms:
        if a.kind == FUNC and a.symbol.jacobian is not None:
            out.add(a.symbol.jacobian)
    return out


def nonzero_factors(e: Expr, max_terms: int = 400) -> list:
    """Irreducible non-constant factors of numerator and denominator, each
    with positive leading coefficient; a factor too large to factor cheaply
    is kept whole."""
    out = []
    for p in (e.num, e.den):
        if P.is_const(p):
            continue
        if len(p) > max_terms:
            fs = [(p, 1)]
        else:
            fs = P.factors(p)[1]
        for f, _ in fs:
            if P.is_const(f):
                continue
            if _lead_coeff(f) < 0:
                f = P.neg(f)
            out.append(Expr(f, P.P_ONE))
    return out


def symbol(name: str, *args, slot_names=None) -> Expr:
    """Convenience: the expression ``name(args)`` for an explicit symbol."""
    return FuncSymbol(name, args, slot_names).expr
