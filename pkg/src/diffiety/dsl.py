"""Input language for solved-form systems.

Example::

    independent x, y
    dependent u, v
    function H, G(y, w)
    implicit f(u_x, v_x): H(f) + u_x*f = v_x
    v_y = f*u_y + G(y, H(f)*x + f*u - v)

Statements are separated by newlines or ``;`` and ``#`` starts a comment.
Jet coordinates are written ``u_xy`` (single-letter independents), ``u[1,2]``
(derivative counts per independent) or ``u'``, ``u''`` when there is one
independent variable.  ``^`` and ``**`` both mean power.
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import DiffietyError, DSLSyntaxError, NotOrthonomic, UndeclaredSymbol
from .jetspace import SystemSpec
from .symexpr import FUNC, JET, Atom, Expr, FuncSymbol, declare_implicit

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*$")
_KEYWORDS = ("independent", "dependent", "functions", "function", "implicit")


@dataclass
class _Stmt:
    text: str
    line: int
    col: int  # 1-based column of text[0]


def _located(exc_type, message: str, line: int, col: int) -> DiffietyError:
    if exc_type is DSLSyntaxError:
        return DSLSyntaxError(message, line, col)
    exc = exc_type(f"{line}:{col}: {message}")
    exc.line, exc.col = line, col
    return exc


def _statements(src: str) -> list:
    out = []
    for ln, raw in enumerate(src.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        depth, start = 0, 0
        cuts = []
        for i, ch in enumerate(line):
            if ch in "([":
                depth += 1
            elif ch in ")]":
                depth -= 1
            elif ch == ";" and depth <= 0:
                cuts.append((start, i))
                start, depth = i + 1, 0
        cuts.append((start, len(line)))
        for a, b in cuts:
            chunk = line[a:b]
            stripped = chunk.lstrip()
            if stripped.strip():
                out.append(_Stmt(stripped.rstrip(), ln, a + 1 + len(chunk) - len(stripped)))
    return out


def _split_top(text: str, sep: str = ",") -> list:
    """Split at top-level ``sep``; returns ``(piece, offset)`` pairs."""
    out, depth, start = [], 0, 0
    for i, ch in enumerate(text + sep):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == sep and depth == 0:
            piece = text[start:i]
            lead = len(piece) - len(piece.lstrip())
            out.append((piece.strip(), start + lead))
            start = i + 1
    return out


class _Parser:
    def __init__(self):
        self.independents: list = []
        self.dependents: list = []
        self.functions: dict = {}  # name -> slot names or None
        self.implicit: dict = {}  # name -> FuncSymbol
        self.equations: list = []
        self.eq_pos: list = []

    # -- names ------------------------------------------------------------
    def _declare(self, name: str, line: int, col: int) -> None:
        if not _IDENT.match(name) or name in _KEYWORDS:
            raise _located(DSLSyntaxError, f"invalid name {name!r}", line, col)
        taken = set(self.independents) | set(self.dependents) | set(self.functions) | set(self.implicit)
        if name in taken:
            raise _located(DSLSyntaxError, f"{name!r} is declared twice", line, col)

    def _jet(self, j: int, multi) -> Expr:
        return Expr.atom(Atom.jet(j, multi, self.dependents[j], tuple(self.independents)))

    def _name(self, name: str, local: dict, line: int, col: int) -> Expr:
        if name in local:
            return local[name]
        if name in self.independents:
            return Expr.atom(Atom.independent(self.independents.index(name), name))
        if name in self.dependents:
            return self._jet(self.dependents.index(name), ())
        if name in self.implicit:
            return self.implicit[name].expr
        base = name.rstrip("_")
        if base != name and base in self.dependents:
            # primes were rewritten to underscores
            if len(self.independents) != 1:
                raise _located(DSLSyntaxError, "primes need exactly one independent variable", line, col)
            return self._jet(self.dependents.index(base), (0,) * (len(name) - len(base)))
        if "_" in name:
            base, suffix = name.rsplit("_", 1)
            if base in self.dependents and suffix and all(ch in self.independents for ch in suffix):
                return self._jet(self.dependents.index(base), tuple(self.independents.index(ch) for ch in suffix))
        raise _located(UndeclaredSymbol, f"undeclared symbol {name!r}", line, col)

    # -- expressions ------------------------------------------------------
    def expr(self, text: str, line: int, col: int, local: dict | None = None) -> Expr:
        local = local or {}
        src = text.replace("'", "_")
        try:
            tree = ast.parse(src, mode="eval")
        except SyntaxError as exc:
            raise _located(DSLSyntaxError, exc.msg, line, col + max((exc.offset or 1) - 1, 0)) from None
        return self._node(tree.body, line, col, local)

    def _node(self, node, line: int, col: int, local: dict) -> Expr:
        def at(n):
            return line + n.lineno - 1, col + n.col_offset

        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, int):
                raise _located(DSLSyntaxError, "only integer constants are allowed", *at(node))
            return Expr.const(node.value)
        if isinstance(node, ast.Name):
            return self._name(node.id, local, *at(node))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = self._node(node.operand, line, col, local)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, (ast.Pow, ast.BitXor)):
                k = self._int(node.right, line, col)
                return self._node(node.left, line, col, local) ** k
            a = self._node(node.left, line, col, local)
            b = self._node(node.right, line, col, local)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                if not b.num:
                    raise _located(DSLSyntaxError, "division by zero", *at(node.right))
                return a / b
        if isinstance(node, ast.Subscript):
            return self._subscript(node, line, col)
        if isinstance(node, ast.Call):
            return self._call(node, line, col, local)
        raise _located(DSLSyntaxError, "unsupported expression", *at(node))

    def _int(self, node, line: int, col: int) -> int:
        sign = 1
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            sign, node = -1, node.operand
        if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
            return sign * node.value
        raise _located(DSLSyntaxError, "exponent must be an integer literal", line + node.lineno - 1,
                       col + node.col_offset)

    def _subscript(self, node, line: int, col: int) -> Expr:
        pos = (line + node.lineno - 1, col + node.col_offset)
        if not isinstance(node.value, ast.Name) or node.value.id not in self.dependents:
            raise _located(DSLSyntaxError, "only dependent variables take derivative counts", *pos)
        sl = node.slice
        items = sl.elts if isinstance(sl, ast.Tuple) else [sl]
        counts = [self._int(n, line, col) for n in items]
        if len(counts) != len(self.independents) or any(c < 0 for c in counts):
            raise _located(DSLSyntaxError, f"expected {len(self.independents)} nonnegative counts", *pos)
        multi = tuple(i for i, c in enumerate(counts) for _ in range(c))
        return self._jet(self.dependents.index(node.value.id), multi)

    def _call(self, node, line: int, col: int, local: dict) -> Expr:
        pos = (line + node.lineno - 1, col + node.col_offset)
        if not isinstance(node.func, ast.Name) or node.keywords:
            raise _located(DSLSyntaxError, "malformed function application", *pos)
        name = node.func.id
        args = [self._node(a, line, col, local) for a in node.args]
        if name in self.implicit:
            sym = self.implicit[name]
            if tuple(args) != sym.args:
                raise _located(DSLSyntaxError, f"implicit {name} is declared with other arguments", *pos)
            return sym.expr
        if name not in self.functions:
            raise _located(UndeclaredSymbol, f"undeclared function {name!r}", *pos)
        slots = self.functions[name]
        if slots is not None and len(slots) != len(args):
            raise _located(DSLSyntaxError, f"{name} takes {len(slots)} arguments", *pos)
        if not args:
            raise _located(DSLSyntaxError, f"{name} needs arguments", *pos)
        return FuncSymbol(name, args, slots).expr

    # -- statements -------------------------------------------------------
    def statement(self, st: _Stmt) -> None:
        head = st.text.split(None, 1)
        kw = head[0] if head else ""
        rest = head[1] if len(head) > 1 else ""
        off = st.col + len(st.text) - len(rest)
        if kw in ("independent", "dependent"):
            if self.equations or self.implicit:
                raise _located(DSLSyntaxError, "variables must be declared before use", st.line, st.col)
            target = self.independents if kw == "independent" else self.dependents
            for name, o in _split_top(rest):
                self._declare(name, st.line, off + o)
                target.append(name)
        elif kw in ("function", "functions"):
            for item, o in _split_top(rest):
                m = re.match(r"([A-Za-z][A-Za-z0-9_]*)\s*(?:\((.*)\))?$", item)
                if not m:
                    raise _located(DSLSyntaxError, f"bad function declaration {item!r}", st.line, off + o)
                self._declare(m.group(1), st.line, off + o)
                slots = None
                if m.group(2) is not None:
                    slots = tuple(s.strip() for s in m.group(2).split(","))
                    if not all(_IDENT.match(s) for s in slots):
                        raise _located(DSLSyntaxError, "slot names must be identifiers", st.line, off + o)
                self.functions[m.group(1)] = slots
        elif kw == "implicit":
            self._implicit(rest, st.line, off)
        else:
            self._equation(st)

    def _implicit(self, text: str, line: int, col: int) -> None:
        m = re.match(r"([A-Za-z][A-Za-z0-9_]*)\s*\((.*?)\)\s*:(.*)$", text)
        if not m:
            raise _located(DSLSyntaxError, "expected 'implicit name(args): lhs = rhs'", line, col)
        name = m.group(1)
        self._declare(name, line, col)
        args = [self.expr(a, line, col + m.start(2) + o) for a, o in _split_top(m.group(2))]
        body = m.group(3)
        bcol = col + m.start(3)
        sides = _split_top(body, "=")
        if len(sides) != 2:
            raise _located(DSLSyntaxError, "the relation needs exactly one '='", line, bcol)
        (lt, lo), (rt, ro) = sides

        def relation(s):
            local = {name: s}
            return self.expr(lt, line, bcol + lo, local) - self.expr(rt, line, bcol + ro, local)

        try:
            sym = declare_implicit(name, args, relation)
        except ValueError as exc:
            raise _located(DSLSyntaxError, str(exc), line, col) from None
        self.implicit[name] = sym

    def _equation(self, st: _Stmt) -> None:
        sides = _split_top(st.text, "=")
        if len(sides) != 2:
            raise _located(DSLSyntaxError, "expected a declaration or 'lhs = rhs'", st.line, st.col)
        (lt, lo), (rt, ro) = sides
        lhs = self.expr(lt, st.line, st.col + lo)
        if not lhs.is_atom() or lhs.atoms[0].kind != JET:
            raise _located(NotOrthonomic, f"left-hand side {lt!r} is not a single derivative", st.line, st.col + lo)
        rhs = self.expr(rt, st.line, st.col + ro)
        self.equations.append((lhs.atoms[0], rhs))
        self.eq_pos.append((st.line, st.col))
        try:
            self.spec().validate()
        except NotOrthonomic as exc:
            raise _located(NotOrthonomic, str(exc), st.line, st.col) from None

    def spec(self) -> SystemSpec:
        return SystemSpec(tuple(self.independents), tuple(self.dependents), tuple(self.equations),
                          tuple(self.implicit.values()))


def parse(src: str) -> SystemSpec:
    """Parse DSL text into a :class:`SystemSpec`.

    Raises :class:`DSLSyntaxError`, :class:`UndeclaredSymbol` or
    :class:`NotOrthonomic`; each carries ``line`` and ``col``.
    """
    p = _Parser()
    for st in _statements(src):
        p.statement(st)
    if not p.independents:
        raise DSLSyntaxError("no independent variables declared", 1, 1)
    return p.spec()


# ---------------------------------------------------------------------------
# printing


def _symbols(exprs) -> tuple:
    """Explicit function slot data and implicit symbols in dependency order."""
    explicit: dict = {}
    implicit: list = []
    seen: set = set()

    def visit(e: Expr):
        for a in e.atoms:
            if a.kind != FUNC:
                continue
            sym = a.symbol
            if sym in seen:
                continue
            seen.add(sym)
            for arg in sym.args:
                visit(arg)
            if sym.relation is not None:
                visit(sym.relation)
                implicit.append(sym)
            elif explicit.get(sym.name) is None:
                explicit[sym.name] = sym.slot_names

    for e in exprs:
        visit(e)
    return explicit, implicit


def to_dsl(spec: SystemSpec) -> str:
    """Render ``spec`` so that ``parse(to_dsl(spec)) == spec``."""
    lines = ["independent " + ", ".join(spec.independents)]
    if spec.dependents:
        lines.append("dependent " + ", ".join(spec.dependents))
    explicit, implicit = _symbols([rhs for _, rhs in spec.equations])
    if explicit:
        items = [name if slots is None else f"{name}({', '.join(slots)})" for name, slots in explicit.items()]
        lines.append("function " + ", ".join(items))
    for sym in implicit:
        args = ", ".join(a.to_dsl() for a in sym.args)
        lines.append(f"implicit {sym.name}({args}): {sym.relation.to_dsl()} = 0")
    for p, rhs in spec.equations:
        lines.append(f"{p.dsl()} = {rhs.to_dsl()}")
    return "\n".join(lines) + "\n"


def parse_file(path) -> SystemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


__all__ = ["parse", "parse_file", "to_dsl"]
