"""Command line interface: ``denjoy {build,eval,verify,integrate,spectrum,export}``.

Exit codes: 0 success, 1 a check failed, 2 inadmissible scheme,
3 corrupt or unreadable model, 4 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .blowup import BlowupModel, CorruptModelError
from .config import Config, ConfigError, build_from_config
from .diffeo import DiffeoAction
from .lengths import InadmissibleSchemeError
from .modulus import integrate_alpha_inv, integrate_one_over_alpha_d, parse_modulus
from .verify import SUITES, _clean, ratio_spectrum, run_suite

EXIT_OK, EXIT_FAILED, EXIT_INADMISSIBLE, EXIT_CORRUPT, EXIT_USAGE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _window(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("window must be 'a,b'") from None
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise argparse.ArgumentTypeError("window endpoints must lie in [0, 1]")
    return a, b


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _load_model(path: str | None) -> BlowupModel:
    if not path:
        raise UsageError("--model is required")
    return BlowupModel.load(path)


# --- subcommands ---------------------------------------------------------------

def _config_from_args(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config()
    data = cfg.to_dict()
    for key in ("modulus", "d", "scheme", "k", "K", "scale", "radius", "tail_tol",
                "radius_cap", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    if getattr(args, "theta", None):
        data["theta"] = [t for t in args.theta.split(",") if t]
    return Config.from_dict(data)


def cmd_build(args) -> int:
    cfg = _config_from_args(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = build_from_config(cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    model.meta["created"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    out = args.out or cfg.model_path or "model.json"
    model.save(out)
    summary = {"model": out, "N": model.radius, "intervals": model.size, "L": model.partial,
               "total_upper": model.mass.total_upper, "tail_bound": model.mass.tail_bound,
               "tail_tol_met": model.meta["tail_tol_met"], "scheme": model.scheme.to_dict()}
    sys.stdout.write(_dump(summary))
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    act = DiffeoAction(model)
    if args.points:
        try:
            x = np.array([float(v) for v in args.points.split(",") if v])
        except ValueError:
            raise UsageError("--points must be a comma separated list of numbers") from None
    else:
        n = args.grid or 1000
        x = np.arange(n) / n
    cols, names = [x], ["x"]
    for i in range(1, act.d + 1):
        cols.append(act.eval(i, x))
        names.append(f"f{i}")
        if args.deriv:
            cols.append(act.eval_deriv(i, x))
            names.append(f"df{i}")
    lines = [",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _suite_names(text: str | None) -> list[str]:
    names = [s.strip() for s in (text or "").split(",") if s.strip()]
    if not names:
        raise UsageError("empty suite")
    bad = [s for s in names if s != "all" and s not in SUITES]
    if bad:
        raise UsageError(f"unknown check(s): {', '.join(bad)}; available: all, {', '.join(SUITES)}")
    return names


def cmd_verify(args) -> int:
    names = _suite_names(args.suite)
    model = _load_model(args.model)
    act = DiffeoAction(model)
    params = {"seed": args.seed if args.seed is not None else 0}
    if args.n is not None:
        params["n"] = args.n
    if args.window is not None:
        params["window"] = args.window
    try:
        reports = run_suite(act, names, params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    doc = {"created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
           "suite": names, "params": params,
           "model": {"theta": list(model.action.theta), "scheme": model.scheme.to_dict(),
                     "N": model.radius, "L": model.partial},
           "passed": all(r.passed for r in reports),
           "reports": [r.to_dict() for r in reports]}
    _emit(_dump(doc), args.out)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.statistic:.6g} vs {r.threshold:.6g}",
              file=sys.stderr)
    return EXIT_OK if doc["passed"] else EXIT_FAILED


def cmd_integrate(args) -> int:
    try:
        alpha = parse_modulus(args.modulus)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    fn = integrate_alpha_inv if args.which == "inv" else integrate_one_over_alpha_d
    rep = fn(alpha, args.d, args.tol)
    doc = rep.to_dict()
    doc.update({"modulus": alpha.to_literal(), "d": args.d, "which": args.which})
    _emit(_dump(doc), args.out)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    model = _load_model(args.model)
    window = args.window or (0.0, 1.0)
    try:
        sp = ratio_spectrum(model, window, args.m)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lines = ["i,lambda_i,lambda_next,ratio"]
    for i, r in enumerate(sp.ratios, start=1):
        lines.append(f"{i},{float(sp.lengths[i - 1])!r},{float(sp.lengths[i])!r},{float(r)!r}")
    _emit("\n".join(lines) + "\n", args.out)
    print(f"tail window {sp.tail_window}: max ratio {sp.tail_max:.8g}", file=sys.stderr)
    return EXIT_OK


def cmd_export(args) -> int:
    model = _load_model(args.model)
    if not args.out:
        raise UsageError("--out is required for export")
    model.export_csv(args.out)
    return EXIT_OK


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="denjoy", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    b = sub.add_parser("build", help="build and save a blow-up model")
    b.add_argument("--config", help="JSON config file")
    b.add_argument("--out", help="model output path")
    b.add_argument("--modulus", help="modulus literal, e.g. power:tau=0.5")
    b.add_argument("--d", type=int)
    b.add_argument("--theta", help="comma list of numbers or presets")
    b.add_argument("--scheme", help="herman_v, nu or alpha_inv")
    b.add_argument("--k", type=int)
    b.add_argument("--K", type=float)
    b.add_argument("--scale", type=float)
    b.add_argument("--radius", type=int)
    b.add_argument("--tail-tol", dest="tail_tol", type=float)
    b.add_argument("--radius-cap", dest="radius_cap", type=int)
    b.add_argument("--seed", type=int)
    b.set_defaults(func=cmd_build)

    e = sub.add_parser("eval", help="evaluate the generators on a grid or points (CSV)")
    e.add_argument("--model", required=True)
    g = e.add_mutually_exclusive_group()
    g.add_argument("--grid", type=int)
    g.add_argument("--points")
    e.add_argument("--deriv", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run numerical checks (JSON report)")
    v.add_argument("--model", required=True)
    v.add_argument("--suite", required=True, help=f"comma list from: all, {', '.join(SUITES)}")
    v.add_argument("--n", type=int, help="iterations for the rotation check")
    v.add_argument("--seed", type=int)
    v.add_argument("--window", type=_window)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("integrate", help="integrability test for a modulus (JSON)")
    i.add_argument("--modulus", required=True)
    i.add_argument("--d", type=int, default=1)
    i.add_argument("--which", choices=("inv", "direct"), default="inv",
                   help="inv: int alpha^{-1}(t)/t^{d+1}; direct: int 1/alpha(x)^d")
    i.add_argument("--tol", type=float, default=1e-8)
    i.add_argument("--out")
    i.set_defaults(func=cmd_integrate)

    s = sub.add_parser("spectrum", help="sorted length ratios in a window (CSV)")
    s.add_argument("--model", required=True)
    s.add_argument("--window", type=_window)
    s.add_argument("--m", type=int, default=100)
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    x = sub.add_parser("export", help="interval table as CSV")
    x.add_argument("--model", required=True)
    x.add_argument("--out")
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"denjoy: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InadmissibleSchemeError as exc:
        print(f"denjoy: inadmissible scheme: {exc}", file=sys.stderr)
        if exc.report is not None:
            sys.stderr.write(_dump(exc.report.to_dict()))
        return EXIT_INADMISSIBLE
    except CorruptModelError as exc:
        print(f"denjoy: corrupt model: {exc}", file=sys.stderr)
        return EXIT_CORRUPT


if __name__ == "__main__":
    raise SystemExit(main())
