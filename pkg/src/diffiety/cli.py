"""Command-line front end: ``diffiety COMMAND FILE [flags]``.

Exit codes: 0 success, 2 parse error, 3 analysis error, 4 result holds only
generically and ``--strict`` was given.
"""
from __future__ import annotations

import argparse
import sys
import time

from . import report as R
from .ctrl import Analysis, Settings, cauchy_fields, reduction_report
from .dsl import parse, to_dsl
from .errors import DiffietyError, DSLSyntaxError, NotOrthonomic, UndeclaredSymbol
from .jetspace import Truncation
from .symexpr import ZeroTest

EXIT_OK, EXIT_PARSE, EXIT_ANALYSIS, EXIT_GENERIC = 0, 2, 3, 4
COMMANDS = ("analyze", "residual", "hilbert", "obstructions", "cauchy", "reduce")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffiety", description="Controllability structure of orthonomic PDE systems.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("file", help="system in the input DSL ('-' reads stdin)")
    p.add_argument("--k", type=int, default=None, help="residual index for residual/reduce")
    p.add_argument("--order", type=int, default=6, help="jet truncation order L")
    p.add_argument("--headroom", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-test", choices=("symbolic", "probabilistic"), default="symbolic")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--max-iter", type=int, default=12, help="Ker chain cap")
    p.add_argument("--escalate", type=int, default=0, help="truncation retries on non-stabilization")
    p.add_argument("--no-cross-check", action="store_true", help="skip the perturbed-field comparison")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--strict", action="store_true", help="exit 4 when the result needs genericity assumptions")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings (breaks byte-identity)")
    return p


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _system_echo(spec) -> dict:
    return {
        "independents": list(spec.independents),
        "dependents": list(spec.dependents),
        "equations": [{"lhs": p.display(), "rhs": str(e)} for p, e in spec.equations],
        "source": to_dsl(spec),
    }


def _settings(args) -> Settings:
    zt = ZeroTest(args.zero_test, seed=args.seed, trials=args.trials)
    return Settings(truncation=Truncation(args.order, args.headroom), zero_test=zt, seed=args.seed,
                    max_iter=args.max_iter, escalate=args.escalate, cross_check=not args.no_cross_check)


def _filtration_doc(an: Analysis) -> dict:
    filt = an.filtration()
    return {"dims": list(filt.dims), "onset": filt.onset, "hilbert": R.fit_out(filt.fit())}


def _lowest(res):
    return res.module if res.level is None else res.module.level(0)


def run(args, spec, timings: dict) -> dict:
    """Execute one command and return the report document."""
    an = Analysis(spec, _settings(args))
    doc = {
        "schema": R.SCHEMA,
        "command": args.command,
        "system": _system_echo(spec),
        "settings": {"order": args.order, "headroom": args.headroom, "seed": args.seed,
                     "zero_test": args.zero_test, "trials": args.trials, "max_iter": args.max_iter,
                     "escalate": args.escalate, "cross_check": not args.no_cross_check},
    }
    assumptions: list = []

    def timed(name, fn, *a):
        t0 = time.perf_counter()
        out = fn(*a)
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0
        return out

    cmd = args.command
    if cmd in ("analyze", "hilbert"):
        doc["filtration"] = timed("filtration", _filtration_doc, an)
    if cmd == "analyze":
        series = timed("series", an.composition_series)
        doc["residuals"] = [R.residual_out(r) for r in series.entries]
        doc["series"] = {
            "entries": [{"k": r.k, "rank": r.rank, "hilbert": R.fit_out(r.fit)} for r in series.entries],
            "omitted": [[k, why] for k, why in series.omitted],
            "errors": [{"k": k, "error": R.error_out(e)} for k, e in series.errors],
        }
        doc["reductions"] = {str(k): R.reduction_out(rs) for k, rs in sorted(series.reductions.items())}
        for r in series.entries:
            assumptions.extend(r.assumptions)
        try:
            doc["obstructions"] = R.obstruction_out(timed("obstructions", an.obstruction_report))
        except DiffietyError:
            pass
    elif cmd in ("residual", "reduce"):
        res = timed("residual", an.residual, args.k)
        doc["residuals"] = [R.residual_out(res)]
        assumptions.extend(res.assumptions)
        if cmd == "reduce":
            if res.is_everything or res.rank == 0:
                raise DiffietyError(f"R^{args.k} is {'Omega' if res.is_everything else 'trivial'}; nothing to reduce")
            doc["reductions"] = {str(args.k): R.reduction_out(timed("reduce", reduction_report, res))}
    elif cmd == "obstructions":
        doc["obstructions"] = R.obstruction_out(timed("obstructions", an.obstruction_report))
    elif cmd == "cauchy":
        series = timed("series", an.composition_series)
        doc["cauchy"] = {}
        for r in series.entries:
            fields = timed("cauchy", cauchy_fields, _lowest(r))
            doc["cauchy"][str(r.k)] = [R.field_out(z) for z in fields]
            assumptions.extend(r.assumptions)
    seen, uniq = set(), []
    for a in assumptions:
        s = str(a)
        if s not in seen:
            seen.add(s)
            uniq.append(s)
    doc["assumptions"] = uniq
    doc["generic_only"] = bool(uniq)
    return doc


def _emit(doc: dict, fmt: str) -> None:
    sys.stdout.write(R.dumps(doc) if fmt == "json" else R.render_text(doc))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("residual", "reduce") and args.k is None:
        parser.error(f"{args.command} needs --k")
    try:
        spec = parse(_read(args.file))
    except (DSLSyntaxError, UndeclaredSymbol, NotOrthonomic, OSError, UnicodeDecodeError) as exc:
        _emit({"schema": R.SCHEMA, "error": R.error_out(exc)}, args.format)
        return EXIT_PARSE
    timings: dict = {}
    try:
        doc = run(args, spec, timings)
    except DiffietyError as exc:
        _emit({"schema": R.SCHEMA, "error": R.error_out(exc)}, args.format)
        return EXIT_ANALYSIS
    if args.timings:
        doc["timings"] = {k: round(v, 3) for k, v in sorted(timings.items())}
    _emit(doc, args.format)
    if args.strict and doc["generic_only"]:
        return EXIT_GENERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
