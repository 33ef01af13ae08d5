"""Sparse integer polynomials keyed by variable ids.

A polynomial is a ``dict`` mapping a monomial to a nonzero ``int``; a
monomial is a tuple of ``(var_id, exponent)`` pairs sorted by ``var_id``.
Dicts are never mutated after construction.  FLINT is used only for gcds and
exact divisions, on contexts spanning the few variables actually involved:
building a FLINT context over hundreds of variables costs far more than the
arithmetic itself.
"""
from __future__ import annotations

from bisect import bisect_left
from math import gcd as igcd

import flint

ONE_MONO: tuple = ()
P_ONE = {(): 1}


def const(c: int) -> dict:
    return {(): c} if c else {}


def var(v: int) -> dict:
    return {((v, 1),): 1}


def mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    if len(a) < len(b):
        a, b = b, a
    for t in b:
        v = t[0]
        # (v,) sorts before every (v, e)
        i = bisect_left(a, (v,))
        if i < len(a) and a[i][0] == v:
            a = a[:i] + ((v, a[i][1] + t[1]),) + a[i + 1:]
        else:
            a = a[:i] + (t,) + a[i:]
    return a


def add(p: dict, q: dict) -> dict:
    if len(p) < len(q):
        p, q = q, p
    out = dict(p)
    for m, c in q.items():
        s = out.get(m, 0) + c
        if s:
            out[m] = s
        else:
            del out[m]
    return out


def sub(p: dict, q: dict) -> dict:
    out = dict(p)
    for m, c in q.items():
        s = out.get(m, 0) - c
        if s:
            out[m] = s
        else:
            del out[m]
    return out


def neg(p: dict) -> dict:
    return {m: -c for m, c in p.items()}


def scale(p: dict, k: int) -> dict:
    if not k:
        return {}
    return {m: c * k for m, c in p.items()}


def mul(p: dict, q: dict) -> dict:
    if not p or not q:
        return {}
    if len(p) < len(q):
        p, q = q, p
    if len(q) >= 64 and len(p) * len(q) >= BIG_PRODUCT:
        ids = _narrow(p, q)
        if ids is not None:
            pos = {v: i for i, v in enumerate(ids)}
            return _from_flint(_to_flint(p, ids, pos) * _to_flint(q, ids, pos), ids)
    if len(q) == 1:
        ((mq, cq),) = q.items()
        if not mq:
            return scale(p, cq)
        return {mono_mul(m, mq): c * cq for m, c in p.items()}
    out: dict = {}
    get = out.get
    for mq, cq in q.items():
        for mp, cp in p.items():
            m = mono_mul(mp, mq)
            out[m] = get(m, 0) + cp * cq
    return {m: c for m, c in out.items() if c}


def power(p: dict, k: int) -> dict:
    out = P_ONE
    base = p
    while k:
        if k & 1:
            out = mul(out, base)
        k >>= 1
        if k:
            base = mul(base, base)
    return out


def derivative(p: dict, v: int) -> dict:
    out = {}
    for m, c in p.items():
        for i, (w, e) in enumerate(m):
            if w == v:
                nm = m[:i] + ((v, e - 1),) + m[i + 1:] if e > 1 else m[:i] + m[i + 1:]
                out[nm] = c * e
                break
            if w > v:
                break
    return out


def variables(p: dict) -> set:
    s = set()
    for m in p:
        for v, _ in m:
            s.add(v)
    return s


def is_const(p: dict) -> bool:
    return not p or (len(p) == 1 and () in p)


def const_value(p: dict) -> int | None:
    """The integer value of a constant polynomial, else ``None``."""
    if not p:
        return 0
    if len(p) == 1 and () in p:
        return p[()]
    return None


def content(p: dict) -> int:
    g = 0
    for c in p.values():
        g = igcd(g, c)
        if g == 1:
            break
    return g


def total_degree(p: dict) -> int:
    return max((sum(e for _, e in m) for m in p), default=0)


def evaluate_mod(p: dict, point: dict, prime: int) -> int:
    acc = 0
    for m, c in p.items():
        t = c
        for v, e in m:
            t = t * pow(point[v], e, prime) % prime
        acc = (acc + t) % prime
    return acc


# ---------------------------------------------------------------------------
# gcd support through FLINT

_CTX: dict = {}

# Above this many variables FLINT conversions cost more than they save.
FLINT_MAX_VARS = 160
BIG_PRODUCT = 4096


def _narrow(*ps) -> tuple | None:
    s = set()
    for p in ps:
        s |= variables(p)
        if len(s) > FLINT_MAX_VARS:
            return None
    return tuple(sorted(s))


def _ctx(ids: tuple):
    ctx = _CTX.get(ids)
    if ctx is None:
        ctx = flint.fmpz_mpoly_ctx.get(tuple(f"v{i}" for i in ids), "lex")
        _CTX[ids] = ctx
    return ctx


def _to_flint(p: dict, ids: tuple, pos: dict):
    ctx = _ctx(ids)
    n = len(ids)
    d = {}
    for m, c in p.items():
        e = [0] * n
        for v, k in m:
            e[pos[v]] = k
        d[tuple(e)] = c
    return ctx.from_dict(d)


def _from_flint(f, ids: tuple) -> dict:
    out = {}
    rng = range(len(ids))
    for e, c in f.to_dict().items():
        # FLINT hands back fmpz exponents
        out[tuple([(ids[i], int(e[i])) for i in rng if e[i]])] = int(c)
    return out


def _split(p: dict, s: set) -> dict:
    """Group terms by their monomial part outside ``s``."""
    groups: dict = {}
    for m, c in p.items():
        inner = tuple(t for t in m if t[0] in s)
        outer = tuple(t for t in m if t[0] not in s)
        g = groups.get(outer)
        if g is None:
            groups[outer] = {inner: c}
        else:
            g[inner] = c
    return groups


_FACTORS: dict = {}


def factors(p: dict) -> tuple:
    """``(content, ((factor, multiplicity), ...))`` of a small polynomial (cached)."""
    key = frozenset(p.items())
    got = _FACTORS.get(key)
    if got is None:
        ids = tuple(sorted(variables(p)))
        pos = {v: i for i, v in enumerate(ids)}
        c, fs = _to_flint(p, ids, pos).factor()
        got = (int(c), tuple((_from_flint(f, ids), int(k)) for f, k in fs))
        if len(_FACTORS) > 20000:
            _FACTORS.clear()
        _FACTORS[key] = got
    return got


def divide_by(p: dict, f: dict) -> dict | None:
    """``p / f`` if ``f`` divides ``p`` exactly, else ``None``.

    ``p`` is split by the monomials outside ``vars(f)``; each coefficient must
    be divisible, so a failing block ends the test early."""
    vf = variables(f)
    ids = tuple(sorted(vf))
    pos = {v: i for i, v in enumerate(ids)}
    ff = _to_flint(f, ids, pos)
    out = {}
    for outer, part in _split(p, vf).items():
        pf = _to_flint(part, ids, pos)
        q, r = divmod(pf, ff)
        if not r.is_zero():
            return None
        for inner, c in _from_flint(q, ids).items():
            out[mono_mul(outer, inner)] = c
    return out


def gcd_small(big: dict, small: dict) -> dict:
    """``gcd(big, small)`` through the factorization of ``small``."""
    c, fs = factors(small)
    g = const(igcd(content(big), c)) if c else P_ONE
    cur = big
    for f, k in fs:
        for _ in range(k):
            q = divide_by(cur, f)
            if q is None:
                break
            cur = q
            g = mul(g, f)
    return g


def gcd(p: dict, q: dict) -> dict:
    """Gcd over Z[vars] (integer content included) with the sign FLINT picks."""
    if not p:
        return q
    if not q:
        return p
    if len(p) < len(q):
        p, q = q, p
    if len(q) <= 200 and len(p) >= 4 * len(q):
        if is_const(q):
            return const(igcd(content(p), next(iter(q.values()))))
        return gcd_small(p, q)
    vp, vq = variables(p), variables(q)
    if not vp or not vq:
        return const(igcd(content(p), content(q)))
    if len(vp | vq) <= FLINT_MAX_VARS:
        ids = tuple(sorted(vp | vq))
        pos = {v: i for i, v in enumerate(ids)}
        g = _to_flint(p, ids, pos).gcd(_to_flint(q, ids, pos))
        return P_ONE if g.is_one() else _from_flint(g, ids)
    if len(vp) > len(vq):
        p, q, vp, vq = q, p, vq, vp
    ids = tuple(sorted(vp))
    pos = {v: i for i, v in enumerate(ids)}
    g = _to_flint(p, ids, pos)
    # q = sum_outer outer * Q_outer with Q_outer over vp
    s = set(vp)
    for part in _split(q, s).values():
        g = g.gcd(_to_flint(part, ids, pos))
        if g.is_one():
            return P_ONE
    return _from_flint(g, ids)


def exact_div(p: dict, g: dict) -> dict:
    """``p / g`` assuming exact divisibility."""
    vg = variables(g)
    if not vg:
        k = g.get((), 1)
        if k == 1:
            return p
        return {m: c // k for m, c in p.items()}
    if len(g) <= 200 and len(p) >= 4 * len(g):
        allv = None
    else:
        allv = variables(p) | vg
    if allv is not None and len(allv) <= FLINT_MAX_VARS:
        ids = tuple(sorted(allv))
        pos = {v: i for i, v in enumerate(ids)}
        return _from_flint(_to_flint(p, ids, pos) // _to_flint(g, ids, pos), ids)
    ids = tuple(sorted(vg))
    pos = {v: i for i, v in enumerate(ids)}
    gf = _to_flint(g, ids, pos)
    out = {}
    for outer, part in _split(p, set(vg)).items():
        qf = _to_flint(part, ids, pos) // gf
        for inner, c in _from_flint(qf, ids).items():
            out[mono_mul(outer, inner)] = c
    return out


def all_derivatives(p: dict) -> dict:
    """``{var: d p / d var}`` for every variable of ``p`` in one pass."""
    out: dict = {}
    for m, c in p.items():
        for i, (v, e) in enumerate(m):
            nm = m[:i] + ((v, e - 1),) + m[i + 1:] if e > 1 else m[:i] + m[i + 1:]
            d = out.get(v)
            if d is None:
                out[v] = {nm: c * e}
            else:
                d[nm] = c * e
    return out


def addmul_into(acc: dict, p: dict, q: dict) -> None:
    """``acc += p*q`` in place; may leave zero coefficients (see :func:`clean`)."""
    if len(p) < len(q):
        p, q = q, p
    get = acc.get
    for mq, cq in q.items():
        for mp, cp in p.items():
            m = mono_mul(mp, mq)
            acc[m] = get(m, 0) + cp * cq


def clean(acc: dict) -> dict:
    return {m: c for m, c in acc.items() if c}
