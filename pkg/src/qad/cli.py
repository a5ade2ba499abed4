"""``qad`` command line: run, sweep and graph.

Exit codes: 0 ok, 1 parse error, 2 domain error, 3 overflow, 4 resource
exhaustion, 5 invalid request (bad flags or format).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .analysis import error_bounds, oracle_eval
from .engine import RunConfig, run
from .errors import (
    AncillaExhaustedError,
    DomainError,
    FormatError,
    ParseError,
    QADError,
    SingularityWarning,
)
from .fixedpoint import FixedPointFormat
from .graphir import build_graph, parse, to_dot

EXIT_OK, EXIT_PARSE, EXIT_DOMAIN, EXIT_OVERFLOW, EXIT_RESOURCE, EXIT_USAGE = range(6)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse would exit 2, which collides with the domain-error code
    def error(self, message):
        raise UsageError(message)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, DomainError):
        return EXIT_DOMAIN
    if isinstance(exc, FormatError):
        return EXIT_USAGE
    if isinstance(exc, OverflowError):
        return EXIT_OVERFLOW
    if isinstance(exc, (AncillaExhaustedError, QADError)):
        return EXIT_RESOURCE
    return EXIT_USAGE


def _frac_list(text):
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma list of integers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("sweep list must not be empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qad", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("run", "sweep", "graph"):
        p = sub.add_parser(name)
        p.add_argument("--expr", required=True)
        if name == "graph":
            continue
        p.add_argument("--x0", type=float, required=True)
        p.add_argument("--int-bits", type=int, default=8)
        p.add_argument("--frac-bits", type=int, default=24)
        p.add_argument("--reset-mode", choices=("swap", "hybrid"), default="hybrid")
        p.add_argument("--json", action="store_true")
        if name == "run":
            p.add_argument("--trace", metavar="PATH")
        else:
            p.add_argument("--sweep-frac-bits", type=_frac_list, required=True)
    return parser


def run_report(expr: str, x0: float, int_bits: int, frac_bits: int,
               reset_mode: str = "hybrid", trace_path: str | None = None) -> dict:
    """Parse, simulate and analyse; the dict behind ``qad run --json``."""
    graph = build_graph(parse(expr))
    fmt = FixedPointFormat(int_bits, frac_bits)
    result = run(graph, RunConfig(x0, fmt, reset_mode, trace_enabled=trace_path is not None))
    if trace_path is not None:
        with open(trace_path, "w", encoding="utf-8") as fh:
            for ev in result.trace:
                fh.write(json.dumps(ev.to_json(), sort_keys=True) + "\n")
    exact = oracle_eval(graph, x0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SingularityWarning)
        report = error_bounds(graph, x0, fmt)
    return {
        "request": {"expr": expr, "x0": x0, "int_bits": int_bits, "frac_bits": frac_bits,
                    "reset_mode": reset_mode},
        "result": result.to_json(),
        "oracle": {"value": exact.v, "derivative": exact.d},
        "observed_error": {"value": abs(result.value - exact.v),
                           "derivative": abs(result.derivative - exact.d)},
        "error_analysis": report.to_json(),
        "warnings": [str(w.message) for w in caught],
    }


def _print_text(rep: dict, out) -> None:
    res, err = rep["result"], rep["error_analysis"]
    req = rep["request"]
    print(f"f(x) = {req['expr']} at x0 = {req['x0']!r}, "
          f"Q({req['int_bits']},{req['frac_bits']}), {req['reset_mode']} reset", file=out)
    print(f"value        {res['value']!r:<24} bits {res['value_bits']}", file=out)
    print(f"derivative   {res['derivative']!r:<24} bits {res['derivative_bits']}", file=out)
    print(f"oracle       value {rep['oracle']['value']!r}  derivative {rep['oracle']['derivative']!r}", file=out)
    print(f"error        value {rep['observed_error']['value']:.3e} (bound {err['bound_value']:.3e})  "
          f"derivative {rep['observed_error']['derivative']:.3e} (bound {err['bound_deriv']:.3e})",
          file=out)
    gates = ", ".join(f"{k}={v}" for k, v in res["gate_counts"].items())
    print(f"gates        {gates}; ancilla used {res['ancilla_used']}", file=out)
    cost = err["cost_bound"]
    print(f"cost         sum {cost['total']} <= r*c = {cost['r']}*{cost['c_max']} = {cost['bound']}",
          file=out)
    for w in rep["warnings"]:
        print(f"warning      {w}", file=out)


def _fail(exc, out) -> int:
    print(f"error: {type(exc).__name__}: {exc}", file=out)
    return exit_code_for(exc)


def cmd_run(args, out=sys.stdout, err=sys.stderr) -> int:
    try:
        rep = run_report(args.expr, args.x0, args.int_bits, args.frac_bits,
                         args.reset_mode, args.trace)
    except (QADError, OverflowError) as exc:
        return _fail(exc, err)
    if args.json:
        print(json.dumps(rep, sort_keys=True, indent=2), file=out)
    else:
        _print_text(rep, out)
    return EXIT_OK


def sweep_rows(expr, x0, int_bits, frac_bits_list, reset_mode="hybrid") -> list[dict]:
    """One row per b; a failing row records its error and the rest still run."""
    rows = []
    for b in frac_bits_list:
        try:
            rep = run_report(expr, x0, int_bits, b, reset_mode)
        except (QADError, OverflowError) as exc:
            rows.append({"frac_bits": b, "ok": False, "exit_code": exit_code_for(exc),
                         "error": f"{type(exc).__name__}: {exc}"})
            continue
        res = rep["result"]
        rows.append({
            "frac_bits": b,
            "ok": True,
            "value": res["value"],
            "derivative": res["derivative"],
            "observed_value_error": rep["observed_error"]["value"],
            "observed_deriv_error": rep["observed_error"]["derivative"],
            "bound_value": rep["error_analysis"]["bound_value"],
            "bound_deriv": rep["error_analysis"]["bound_deriv"],
            "gates": sum(res["gate_counts"].values()),
        })
    return rows


def cmd_sweep(args, out=sys.stdout, err=sys.stderr) -> int:
    try:
        parse(args.expr)
    except ParseError as exc:
        return _fail(exc, err)
    rows = sweep_rows(args.expr, args.x0, args.int_bits, args.sweep_frac_bits, args.reset_mode)
    if args.json:
        print(json.dumps(rows, sort_keys=True, indent=2), file=out)
    else:
        print(f"{'b':>3}  {'value err':>10}  {'deriv err':>10}  {'bound val':>10}  "
              f"{'bound der':>10}  {'gates':>7}", file=out)
        for row in rows:
            if row["ok"]:
                print(f"{row['frac_bits']:>3}  {row['observed_value_error']:>10.3e}  "
                      f"{row['observed_deriv_error']:>10.3e}  {row['bound_value']:>10.3e}  "
                      f"{row['bound_deriv']:>10.3e}  {row['gates']:>7}", file=out)
            else:
                print(f"{row['frac_bits']:>3}  FAILED {row['error']}", file=out)
    failed = [row for row in rows if not row["ok"]]
    return failed[0]["exit_code"] if failed else EXIT_OK


def cmd_graph(args, out=sys.stdout, err=sys.stderr) -> int:
    try:
        graph = build_graph(parse(args.expr))
    except ParseError as exc:
        print(f"error: {exc}", file=err)
        print(f"  {args.expr}\n  {' ' * exc.position}^", file=err)
        return EXIT_PARSE
    out.write(to_dot(graph))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "graph": cmd_graph}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"qad: {exc}", file=err)
        return EXIT_USAGE
    return COMMANDS[args.command](args, out, err)


if __name__ == "__main__":
    sys.exit(main())
