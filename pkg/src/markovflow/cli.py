"""Command-line entry point: ``markovflow <subcommand>``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, scenario
from .algebra import (
    EqualInputGenerator,
    EqualInputMatrix,
    equal_input_params,
    extremal_vertices,
    is_markov_dense,
    is_rate_dense,
    row_sum_residual,
)
from .errors import MarkovFlowError, SchemaError
from .flows import bch_log, ei_principal_log
from .oracles import dense_logm_principal

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("MARKOVFLOW_LOG", "warn").strip().lower()
    logging.basicConfig(
        level=_LEVELS.get(level, logging.WARNING),
        stream=sys.stderr,
        format="markovflow %(levelname)s: %(message)s",
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def _print_matrix(A):
    for row in np.asarray(A):
        print(" ".join(_fmt(v) for v in row))


def _csv_floats(text: str, what: str) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise SchemaError(f"--{what} must be comma-separated numbers", got=text) from None
    if not np.all(np.isfinite(vals)):
        raise SchemaError(f"--{what} entries must be finite")
    return vals


def _cmd_solve(args) -> int:
    sc = scenario.load_scenario(args.scenario)
    report = scenario.run(sc)
    csv_text = scenario.to_csv(report)
    if args.out:
        Path(args.out).write_text(csv_text)
    elif not args.json:
        sys.stdout.write(csv_text)
    if args.json:
        Path(args.json).write_text(scenario.to_json(report))
    for line in scenario.summary_lines(report):
        print(line, file=sys.stderr)
    return report.exit_code


def _expand(paths):
    out = []
    for p in paths:
        p = Path(p)
        out.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    return out


def _cmd_verify(args) -> int:
    paths = _expand(args.paths) if args.paths else scenario.bundled_scenarios()
    if not paths:
        print("no scenarios found", file=sys.stderr)
        return 2
    status = 0
    for path in paths:
        try:
            report = scenario.run(scenario.load_scenario(path))
        except MarkovFlowError as exc:
            print(f"{path.name:<28} {'SCENARIO':<16} ERROR   {exc}")
            status = 1
            continue
        for line in scenario.summary_lines(report):
            print(line)
        status = max(status, report.exit_code)
    print("OK" if status == 0 else "FAILED")
    return status


def _cmd_bch(args) -> int:
    x = _csv_floats(args.x, "x")
    y = _csv_floats(args.y, "y")
    if x.size != args.dim or y.size != args.dim:
        raise SchemaError("--x and --y must have --dim entries", dim=args.dim, x=x.size, y=y.size)
    z = bch_log(EqualInputGenerator(x), EqualInputGenerator(y))
    print(",".join(_fmt(v) for v in z.params.entries))
    return 0


def _read_matrix(path) -> np.ndarray:
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise SchemaError("empty matrix file", path=str(path))
    try:
        d = int(lines[0][0])
        rows = [[float(v) for v in ln] for ln in lines[1:]]
    except (ValueError, IndexError):
        raise SchemaError("matrix file must be numeric", path=str(path)) from None
    if len(lines[0]) != 1 or len(rows) != d or any(len(r) != d for r in rows):
        raise SchemaError("matrix file must hold d then d rows of d numbers", path=str(path))
    return np.array(rows)


def _cmd_embed(args) -> int:
    M = _read_matrix(args.matrix)
    print(f"markov: {str(is_markov_dense(M)).lower()}")
    params = equal_input_params(M) if row_sum_residual(M, 1.0) <= 1e-12 else None
    if params is not None:
        print("equal_input: true")
        R, ok = ei_principal_log(EqualInputMatrix(params))
        R = R.dense()
    else:
        print("equal_input: false")
        R = dense_logm_principal(M)
        ok = is_rate_dense(R)
    print(f"embeddable: {str(bool(ok)).lower()}")
    print("log:")
    _print_matrix(R)
    return 0


def _cmd_vertices(args) -> int:
    for k, V in enumerate(extremal_vertices(args.dim)):
        if k:
            print()
        _print_matrix(V.dense())
    return 0


def _cmd_version(args) -> int:
    print(__version__)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="markovflow", description="Closed-form equal-input Markov flows and oracles.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="closed-form flow plus the scenario's checks")
    s.add_argument("scenario")
    s.add_argument("--out", help="CSV report path (stdout when neither --out nor --json is given)")
    s.add_argument("--json", help="JSON report path")
    s.set_defaults(fn=_cmd_solve)

    s = sub.add_parser("verify", help="run checks only; exit status 1 if any fails")
    s.add_argument("paths", nargs="*", help="scenario files or directories (default: bundled set)")
    s.set_defaults(fn=_cmd_verify)

    s = sub.add_parser("bch", help="equal-input log of exp(Q_x) exp(Q_y)")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.set_defaults(fn=_cmd_bch)

    s = sub.add_parser("embed", help="principal log and homogeneous embeddability of a matrix")
    s.add_argument("--matrix", required=True)
    s.set_defaults(fn=_cmd_embed)

    s = sub.add_parser("vertices", help="extremal equal-input Markov matrices")
    s.add_argument("--dim", type=int, required=True)
    s.set_defaults(fn=_cmd_vertices)

    s = sub.add_parser("version")
    s.set_defaults(fn=_cmd_version)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (MarkovFlowError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
