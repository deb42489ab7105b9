"""Command-line interface: ``psrlevy {exit,compare,sweep,path}``.

Every command writes CSV whose leading ``#`` lines form a manifest (command,
model, parameters, seed, version), so an output file is enough to rerun it.
Numbers are written with 15 significant digits.

Exit codes: 0 ok, 2 domain or parse error, 3 convergence failure,
4 analytic and Monte Carlo values differ by more than 3.29 standard errors.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .conv import conv_exit_down, conv_exit_up
from .errors import ConvergenceError, DomainError, PSRError
from .exits import ExitQuery, ExitValue, Side, evaluate
from .levy_model import ProcessSpec
from .resolvent import SolveConfig
from .total import (TotalResetContext, total_exit_down, total_exit_one_sided_down,
                    total_exit_one_sided_up, total_exit_up)

EXIT_OK, EXIT_DOMAIN, EXIT_CONVERGENCE, EXIT_MISMATCH = 0, 2, 3, 4
Z_CRITICAL = 3.29

_SIDES = {"up": Side.UP_TWO_SIDED, "down": Side.DOWN_TWO_SIDED,
          "up1": Side.UP_ONE_SIDED, "down1": Side.DOWN_ONE_SIDED}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise DomainError(message)


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.15g}"
    return str(value)


def load_model(path: str) -> ProcessSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DomainError(f"cannot read model file {path!r}: {exc.strerror}") from exc
    return ProcessSpec.from_json(text)


def manifest_lines(command: str, args: argparse.Namespace, spec: ProcessSpec, params: dict) -> list[str]:
    return [
        f"# command={command}",
        f"# model_file={args.model}",
        f"# model={spec.to_json()}",
        f"# params={json.dumps(params, sort_keys=True)}",
        f"# output={args.output or '-'}",
        f"# seed={params.get('seed', '')}",
        f"# version={__version__}",
    ]


def read_manifest(text: str) -> dict:
    """Parse the manifest block of a CSV written by this tool."""
    out = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition("=")
        out[key] = json.loads(value) if key in ("params", "model") else value
    return out


def _emit(args, header: list[str], columns: list[str], rows: list[list]):
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# query construction and evaluation


def _query_params(args) -> dict:
    params = {"side": args.side, "q": args.q, "lambda": args.lam, "p": args.p, "x": args.x,
              "method": args.method, "grid_points": args.grid_points}
    if args.a is not None:
        params["a"] = args.a
    if args.b is not None:
        params["b"] = args.b
    return params


def build_query(spec: ProcessSpec, params: dict) -> ExitQuery:
    side = _SIDES[params["side"]]
    return ExitQuery(spec, params["q"], params["lambda"], params["p"], params["x"], side,
                     a=params.get("a"), b=params.get("b"))


def evaluate_params(spec: ProcessSpec, params: dict) -> ExitValue:
    method = params.get("method", "resolvent")
    cfg = SolveConfig(grid_points=params.get("grid_points", 257))
    if method == "total":
        return _evaluate_total(spec, params)
    query = build_query(spec, params)
    if method == "conv":
        if not query.side.two_sided or query.b < 0:
            raise DomainError("method 'conv' needs a two-sided query with 0 <= b < a")
        fn = conv_exit_up if query.side is Side.UP_TWO_SIDED else conv_exit_down
        value = fn(spec, query.q, query.lam, query.p, query.b, query.a, query.x)
        return ExitValue(min(max(value, 0.0), 1.0), 0.0, 0.0, query.region, 0, "conv")
    return evaluate(query, cfg, method=method)


def _evaluate_total(spec, params):
    side = _SIDES[params["side"]]
    q, lam, x = params["q"], params["lambda"], params["x"]
    if side is Side.UP_ONE_SIDED:
        return total_exit_one_sided_up(spec, q, lam, _need(params, "a"), x)
    if side is Side.DOWN_ONE_SIDED:
        return total_exit_one_sided_down(spec, q, lam, _need(params, "b"), x)
    ctx = TotalResetContext(spec, q, lam, _need(params, "b"), _need(params, "a"))
    return (total_exit_up if side is Side.UP_TWO_SIDED else total_exit_down)(ctx, x)


def _need(params, key):
    if params.get(key) is None:
        raise DomainError(f"--{key} is required for side {params['side']!r}")
    return params[key]


# ---------------------------------------------------------------------------
# commands


def cmd_exit(args) -> int:
    spec = load_model(args.model)
    params = _query_params(args)
    res = evaluate_params(spec, params)
    _emit(args, manifest_lines("exit", args, spec, params),
          ["value", "correction", "solver_residual", "region", "iterations", "method"],
          [[res.value, res.correction, res.solver_residual, res.region.value, res.iterations, res.method]])
    return EXIT_OK


def cmd_compare(args) -> int:
    from .montecarlo import SimConfig, simulate_exit

    spec = load_model(args.model)
    params = _query_params(args)
    params.update(n_paths=args.n_paths, seed=args.seed, dt=args.dt)
    analytic = evaluate_params(spec, params).value
    est = simulate_exit(build_query(spec, params), SimConfig(n_paths=args.n_paths, seed=args.seed, dt=args.dt))
    if est.stderr == 0.0:
        # deterministic paths: demand an exact match instead of a z-score
        z = math.nan
        ok = abs(analytic - est.mean) <= 1e-12
    else:
        z = (analytic - est.mean) / est.stderr
        ok = abs(z) <= Z_CRITICAL
    _emit(args, manifest_lines("compare", args, spec, params),
          ["analytic", "mc_mean", "mc_stderr", "z_score", "n_paths", "bias_note"],
          [[analytic, est.mean, est.stderr, z, est.n, est.bias_note]])
    return EXIT_OK if ok else EXIT_MISMATCH


def parse_range(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise DomainError(f"range must look like lo:hi:n, got {text!r}") from None
    if n < 1:
        raise DomainError("range needs n >= 1")
    if n == 1:
        return np.array([lo])
    if not hi > lo:
        raise DomainError("range needs hi > lo")
    return np.linspace(lo, hi, n)


def cmd_sweep(args) -> int:
    spec = load_model(args.model)
    params = _query_params(args)
    params.update(vary=args.vary, range=args.range)
    key = {"p": "p", "lambda": "lambda", "x": "x"}[args.vary]
    rows = []
    for v in parse_range(args.range):
        point = dict(params, **{key: float(v)})
        rows.append([float(v), evaluate_params(spec, point).value])
    _emit(args, manifest_lines("sweep", args, spec, params), [args.vary, "value"], rows)
    return EXIT_OK


def cmd_path(args) -> int:
    from .montecarlo import SimConfig, simulate_path

    spec = load_model(args.model)
    params = {"lambda": args.lam, "p": args.p, "x": args.x, "horizon": args.horizon,
              "seed": args.seed, "dt": args.dt}
    a = args.a if args.a is not None else math.inf
    b = args.b if args.b is not None else -math.inf
    if args.a is not None:
        params["a"] = args.a
    if args.b is not None:
        params["b"] = args.b
    path = simulate_path(spec, args.lam, args.p, args.x, args.horizon,
                         SimConfig(n_paths=1, seed=args.seed, dt=args.dt), a=a, b=b)
    _emit(args, manifest_lines("path", args, spec, params), ["t", "u", "event"], [list(r) for r in path.rows()])
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_query_flags(sp, x_required=True):
    sp.add_argument("--side", choices=sorted(_SIDES), required=True)
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--a", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--x", type=float, required=x_required)
    sp.add_argument("--method", choices=["resolvent", "direct", "conv", "total"], default="resolvent")
    sp.add_argument("--grid-points", type=int, default=257)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="psrlevy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"psrlevy {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("exit", help="evaluate an exit identity")
    sp.add_argument("model")
    _add_query_flags(sp)
    sp.add_argument("--output", "-o")
    sp.set_defaults(func=cmd_exit)

    sp = sub.add_parser("compare", help="analytic value against Monte Carlo")
    sp.add_argument("model")
    _add_query_flags(sp)
    sp.add_argument("--n-paths", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--output", "-o")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("sweep", help="vary one parameter over a grid")
    sp.add_argument("model")
    _add_query_flags(sp, x_required=False)
    sp.add_argument("--vary", choices=["p", "lambda", "x"], required=True)
    sp.add_argument("--range", required=True, help="lo:hi:n")
    sp.add_argument("--output", "-o")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("path", help="simulate one sample path")
    sp.add_argument("model")
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--horizon", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--a", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--output", "-o")
    sp.set_defaults(func=cmd_path)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "vary", None) != "x" and hasattr(args, "side") and args.x is None:
            raise DomainError("--x is required")
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (PSRError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
