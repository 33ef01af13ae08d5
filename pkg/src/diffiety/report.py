"""Report documents: plain JSON-compatible dicts with ``schema: 1``.

Every value is a string, number, bool, list or dict, so a report survives
``json.loads(json.dumps(doc))`` unchanged.  Expressions and forms are
rendered with :func:`str` (canonical, hence deterministic).
"""
from __future__ import annotations

import json

from .forms import INDEPENDENT, OneForm, VectorField, format_terms
from .symexpr import Expr

SCHEMA = 1


def expr_out(e: Expr) -> str:
    return str(e)


def form_out(w: OneForm) -> dict:
    items = sorted(w.coeffs.items(), key=lambda t: (t[0].kind == INDEPENDENT, t[0].key))
    return {"text": str(w), "terms": [[c.display(), str(v)] for c, v in items]}


def field_out(z: VectorField) -> dict:
    comps = getattr(z, "components", {})
    items = sorted(comps.items(), key=lambda t: t[0].key)
    return {"label": z.label, "text": format_terms([(v, f"d/d{c.display()}") for c, v in items]),
            "terms": [[c.display(), str(v)] for c, v in items]}


def fit_out(fit) -> dict | None:
    return None if fit is None else fit.as_dict()


def residual_out(r) -> dict:
    return {
        "k": r.k,
        "rank": r.rank,
        "level": r.level,
        "equals_omega": r.is_everything,
        "chain": list(r.chain),
        "hilbert": fit_out(r.fit),
        "stable": r.stable,
        "generators": [form_out(g) for g in r.generators] if not r.is_everything else [],
        "checks": {k: v for k, v in sorted(r.checks.items())},
        "growth": [list(g) for g in r.growth],
        "assumptions": [expr_out(e) for e in r.assumptions],
        "note": r.note,
    }


def reduction_out(rs) -> dict:
    if isinstance(rs, Exception):
        return {"error": error_out(rs)}
    return {
        "hull": [{"name": h.name, "value": str(h.expr)} for h in rs.hull],
        "fields_used": list(rs.fields_used),
        "fields_omitted": list(rs.fields_omitted),
        "equations": [{"lhs": f"d{p.display()}/d{q.display()}", "rhs": str(e)} for p, q, e in rs.equations],
        "closed": [{"generator": str(g), "closed": c, "exact_of": ex} for g, c, ex in rs.closed],
        "truncated": rs.truncated,
    }


def obstruction_out(rep: dict) -> dict:
    return {
        "shape": rep["shape"],
        "kernel": [form_out(w) for w in rep["kernel"]],
        "values": {k: str(v) for k, v in rep["values"].items()},
        "closed_forms": {k: str(v) for k, v in rep["closed_forms"].items()},
        "match": dict(rep["match"]),
    }


def error_out(exc: Exception) -> dict:
    out = {"code": getattr(exc, "code", "error"), "message": str(exc)}
    if hasattr(exc, "line"):
        out["line"], out["col"] = exc.line, exc.col
        prefix = f"{exc.line}:{exc.col}: "
        if out["message"].startswith(prefix):
            out["message"] = out["message"][len(prefix):]
    return out


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def loads(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
    return doc


# ---------------------------------------------------------------------------
# text rendering


def _fit_line(fit: dict | None) -> str:
    if fit is None:
        return "-"
    cs = ", ".join(f"c{k}={v}" for k, v in sorted(fit["c"].items(), key=lambda t: -int(t[0])))
    return f"nu={fit['nu']} mu={fit['mu']} ({cs}) onset={fit['onset']}"


def _residual_text(r: dict, out: list) -> None:
    head = f"R^{r['k']}: "
    if r["equals_omega"]:
        out.append(head + "Omega")
        return
    lvl = "" if r["level"] is None else f" at level {r['level']}"
    out.append(head + f"rank {r['rank']}{lvl}, Ker chain {r['chain']}")
    if r["note"]:
        out.append(f"  {r['note']}")
    out.append(f"  Hilbert: {_fit_line(r['hilbert'])}")
    for g in r["generators"]:
        out.append(f"  {g['text']}")
    checks = ", ".join(f"{k}={'yes' if v else ('n/a' if v is None else 'NO')}" for k, v in r["checks"].items())
    out.append(f"  checks: {checks}")


def render_text(doc: dict) -> str:
    out: list = []
    if "error" in doc:
        e = doc["error"]
        loc = f" at {e['line']}:{e['col']}" if "line" in e else ""
        return f"error [{e['code']}]{loc}: {e['message']}\n"
    sysd = doc["system"]
    out.append(f"system: {', '.join(sysd['independents'])} -> {', '.join(sysd['dependents'])}")
    for eq in sysd["equations"]:
        out.append(f"  {eq['lhs']} = {eq['rhs']}")
    s = doc["settings"]
    out.append(f"truncation order {s['order']} (+{s['headroom']}), seed {s['seed']}, zero test {s['zero_test']}")
    if "filtration" in doc:
        f = doc["filtration"]
        out.append(f"Omega_l dims: {f['dims']} (good from l={f['onset']})")
        out.append(f"Hilbert: {_fit_line(f['hilbert'])}")
    for r in doc.get("residuals", []):
        _residual_text(r, out)
    if "series" in doc:
        names = [f"R^{e['k']}" for e in doc["series"]["entries"]] + ["Omega"]
        out.append("composition series: " + " < ".join(names))
        for k, why in doc["series"]["omitted"]:
            out.append(f"  R^{k} omitted: {why}")
        for e in doc["series"]["errors"]:
            out.append(f"  R^{e['k']} failed: [{e['error']['code']}] {e['error']['message']}")
    if "obstructions" in doc:
        ob = doc["obstructions"]
        out.append(f"obstructions ({ob['shape']}):")
        for k, v in ob["values"].items():
            out.append(f"  {k} = {v}")
        for k, ok in ob["match"].items():
            out.append(f"  {k} closed form {'matches' if ok else 'DIFFERS'}: {ob['closed_forms'][k]}")
    for k, rd in sorted(doc.get("reductions", {}).items()):
        if "error" in rd:
            out.append(f"reduction of R^{k}: [{rd['error']['code']}] {rd['error']['message']}")
            continue
        out.append(f"reduction of R^{k}: hull {{{', '.join(h['name'] for h in rd['hull'])}}}")
        out.append(f"  fields used {rd['fields_used']}, omitted {rd['fields_omitted']}")
        for eq in rd["equations"]:
            out.append(f"  {eq['lhs']} = {eq['rhs']}")
    for k, fields in sorted(doc.get("cauchy", {}).items()):
        out.append(f"Cauchy characteristics of R^{k}:")
        for z in fields:
            out.append(f"  {z['text']}")
    out.append("assumptions: " + ("; ".join(f"{a} != 0" for a in doc["assumptions"]) or "none"))
    if "timings" in doc:
        out.append("timings: " + ", ".join(f"{k} {v:.2f}s" for k, v in doc["timings"].items()))
    return "\n".join(out) + "\n"


__all__ = ["SCHEMA", "dumps", "loads", "render_text", "form_out", "residual_out", "fit_out", "reduction_out",
           "obstruction_out", "error_out", "field_out", "expr_out"]
