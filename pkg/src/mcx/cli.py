"""``mcx`` command-line front end.

Exit codes: 0 success, 1 usage or IO error, 2 property or verdict failure,
3 invalid ensemble spec (reported with a JSON pointer).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

from . import properties, verify
from .ensembles import SpecError, spec_from_json

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_SPEC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")

    def exit(self, status=0, message=None):
        if message:
            sys.stderr.write(message)
        raise SystemExit(EXIT_OK if status == 0 else EXIT_USAGE)


def parse_grid(text: str, nonnegative: bool = True) -> tuple:
    """``start:stop:step`` (inclusive of ``stop`` when the step divides the range) or a comma list."""
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            a, b, step = parts
            if not step > 0 or b < a or not all(map(math.isfinite, parts)):
                raise ValueError
            count = int(math.floor((b - a) / step + 1e-9)) + 1
            grid = [a + k * step for k in range(count)]
            if abs(grid[-1] - b) <= 1e-9 * step:
                grid[-1] = b
        else:
            grid = [float(x) for x in text.split(",") if x.strip()]
            if not grid or not all(map(math.isfinite, grid)):
                raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}; use start:stop:step or a comma list")
    if nonnegative and any(t < 0 for t in grid):
        raise argparse.ArgumentTypeError(f"grid {text!r} has negative entries")
    return tuple(grid)


def _theta_grid(text):
    return parse_grid(text, nonnegative=False)


def _p_list(text):
    try:
        ps = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        ps = ()
    if not ps or any(not p >= 1 for p in ps):
        raise argparse.ArgumentTypeError(f"invalid p list {text!r}; need comma-separated values >= 1")
    return ps


def _psi(text):
    if text in verify.bounds.PSI_PRESETS:
        return text
    try:
        v = float(text)
    except ValueError:
        v = math.nan
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(
            f"invalid psi {text!r}; need a positive number or one of {', '.join(verify.bounds.PSI_PRESETS)}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        v = 0
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        v = -1
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an integer in [0, 2^64), got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mcx", description="Matrix concentration bounds checked against exact and simulated ensembles.")
    sub = parser.add_subparsers(dest="command", metavar="{bound,simulate,check,report}", parser_class=_Parser)
    sub.required = True

    def common(p, samples=True):
        p.add_argument("--config", required=True, help="ensemble spec JSON")
        p.add_argument("--t-grid", type=parse_grid, default=verify.SimulationConfig.t_grid,
                       help="start:stop:step or comma list (default 0:10:1)")
        p.add_argument("--out", help="output file (default stdout)")
        if samples:
            p.add_argument("--samples", type=_positive_int, default=100_000)
            p.add_argument("--seed", type=_seed, default=0)
            p.add_argument("--workers", type=_positive_int, default=1)
            p.add_argument("--method", choices=("auto", "exact", "monte_carlo"), default="auto")

    p = sub.add_parser("bound", help="evaluate every applicable bound for an ensemble")
    common(p, samples=False)
    p.add_argument("--psi", type=_psi, help="refined-bound psi: a number, inv_R2 or inv_8R2")

    p = sub.add_parser("simulate", help="tail curve of lambda_max as CSV")
    common(p)

    p = sub.add_parser("check", help="run the randomized property suite")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--cases", type=_positive_int, default=1000)
    p.add_argument("--fault", choices=properties.FAULTS, help="inject a deliberate bug (mutation check)")
    p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("report", help="bounds, simulation and verdicts as JSON")
    common(p)
    p.add_argument("--psi", type=_psi)
    p.add_argument("--theta-grid", type=_theta_grid, default=(), help="trace mgf grid")
    p.add_argument("--p", type=_p_list, default=verify.SimulationConfig.p_list, help="moment orders, e.g. 1,1.5,2")
    return parser


def _load_spec(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"mcx: cannot read {path}: {exc.strerror or exc}")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", "")
    return spec_from_json(obj)


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"mcx: cannot write {out}: {exc.strerror or exc}")


def _config(args, **extra):
    kw = {"t_grid": args.t_grid}
    for name in ("samples", "seed", "workers", "method", "psi", "theta_grid"):
        if hasattr(args, name) and getattr(args, name) is not None:
            kw[name] = getattr(args, name)
    if hasattr(args, "p"):
        kw["p_list"] = args.p
    kw.update(extra)
    try:
        return verify.SimulationConfig(**kw)
    except ValueError as exc:
        raise UsageError(f"mcx: {exc}")


def _cmd_bound(args):
    ens = _load_spec(args.config)
    report = verify.verify_bounds(ens, _config(args), compare=False)
    d = report.to_dict()
    _emit(verify.dumps({"ensemble": d["ensemble"], "bounds": d["bounds"], "skipped": d["skipped"]}), args.out)
    return EXIT_OK


def _cmd_simulate(args):
    ens = _load_spec(args.config)
    curve = verify.simulate_tail(ens, _config(args))
    _emit(curve.to_csv(), args.out)
    n = ens.state_space_size() if curve.method == "exact" else args.samples
    print(f"simulate: family={ens.family} d={ens.d} method={curve.method} "
          f"{'outcomes' if curve.method == 'exact' else 'samples'}={n} seed={args.seed} "
          f"points={len(curve.points)}", file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def _cmd_check(args):
    report = properties.property_suite(args.seed, args.cases, fault=args.fault)
    _emit("\n".join(report.lines()) + "\n", args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_report(args):
    ens = _load_spec(args.config)
    report = verify.verify_bounds(ens, _config(args))
    _emit(verify.dumps(report.to_dict()), args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


_COMMANDS = {"bound": _cmd_bound, "simulate": _cmd_simulate, "check": _cmd_check, "report": _cmd_report}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"mcx: invalid spec at {exc}", file=sys.stderr)
        return EXIT_SPEC
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except Exception as exc:  # anything else is reported as an IO/usage failure
        print(f"mcx: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
