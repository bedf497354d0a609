"""Command-line front end (``eigsim``)."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import scipy.sparse as sp

from . import __version__
from .core import make_eigensystem
from .harness import (ExperimentConfig, FactorySpec, RunReport, error_report, run_experiment,
                      run_sweep)
from .mmio import export_matrix, ingest_matrix

EXIT_OK = 0
EXIT_FAILED = 1


def parse_spectrum(text: str) -> tuple[complex, ...]:
    """``"0.25,-0.25"`` or ``"0.3+0.2i,-0.1-0.4j"`` -> tuple of complex."""
    try:
        return tuple(complex(tok.strip().replace("i", "j")) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse spectrum {text!r}") from None


def parse_probs(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse probabilities {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, default=1 / 64)
    p.add_argument("--eps1", type=float, default=1 / 64)
    p.add_argument("--eps2", type=float, default=1 / 64)
    p.add_argument("--rho", type=float)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--emit", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--verify-dense", action="store_true",
                   help="compare against dense eigenvalues (ingested matrices, n <= 64)")
    p.add_argument("--dist", action="store_true", help="include the full phase distribution")
    p.add_argument("--sweep", type=int, default=1,
                   help="run this many consecutive seeds starting at --seed")
    p.add_argument("--par", type=int, default=1, help="worker processes for --sweep")


def _matrix_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--matrix", help="Matrix Market file")
    p.add_argument("--spectrum", type=parse_spectrum, help="factory eigenvalues, comma separated")
    p.add_argument("--n", type=int, help="factory size (defaults to the spectrum length)")
    p.add_argument("--cond", type=float, default=1.0, help="factory eigenvector condition number")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eigsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"eigsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    spectrum_cmd = sub.add_parser("spectrum", help="run an eigenvalue-estimation pipeline")
    spectrum_cmd.add_argument("kind", choices=("real", "complex", "normal"))
    _matrix_source(spectrum_cmd)
    _common(spectrum_cmd)

    ana = sub.add_parser("analyze", help="bound checks and leakage analysis")
    ana.add_argument("kind", choices=("leakage", "bounds", "euler"))
    _matrix_source(ana)
    _common(ana)
    ana.add_argument("--lambda-re", type=float)
    ana.add_argument("--lambda-im", type=float)
    ana.add_argument("--r", type=int)

    smp = sub.add_parser("sample", help="measurement planning")
    smp.add_argument("kind", choices=("plan",))
    smp.add_argument("--probs", type=parse_probs)
    smp.add_argument("--n", type=int, help="uniform distribution over n outcomes")
    smp.add_argument("--trials", type=int, default=2000)
    _common(smp)

    mat = sub.add_parser("matrix", help="generate or convert Matrix Market files")
    mat.add_argument("kind", choices=("gen", "export"))
    mat.add_argument("--matrix", help="input file (export)")
    mat.add_argument("--spectrum", type=parse_spectrum)
    mat.add_argument("--n", type=int)
    mat.add_argument("--cond", type=float, default=1.0)
    mat.add_argument("--seed", type=int, default=0)
    mat.add_argument("--format", choices=("coordinate", "array"), default="coordinate")
    mat.add_argument("--out", required=True)
    return parser


_PIPELINE = {("spectrum", "real"): "real", ("spectrum", "complex"): "complex",
             ("spectrum", "normal"): "normal", ("analyze", "leakage"): "leakage",
             ("analyze", "bounds"): "bounds", ("analyze", "euler"): "euler-check",
             ("sample", "plan"): "sample"}


def _factory(args) -> FactorySpec | None:
    if getattr(args, "spectrum", None) is None:
        return None
    spectrum = args.spectrum
    if args.n is not None and args.n != len(spectrum):
        raise ValueError(f"--n {args.n} does not match {len(spectrum)} spectrum entries")
    return FactorySpec(spectrum, args.cond, args.seed)


def config_from_args(args) -> ExperimentConfig:
    probs = getattr(args, "probs", None)
    if args.command == "sample" and probs is None and args.n:
        probs = tuple([1 / args.n] * args.n)
    return ExperimentConfig(
        pipeline=_PIPELINE[(args.command, args.kind)],
        matrix_path=getattr(args, "matrix", None),
        factory=_factory(args),
        eps=args.eps, eps1=args.eps1, eps2=args.eps2, rho=args.rho, delta=args.delta,
        seed=args.seed, m=args.m, k=args.k, dt=args.dt, emit=args.emit, output=args.out,
        verify_dense=args.verify_dense, include_distribution=args.dist, probs=probs,
        trials=getattr(args, "trials", 2000), lambda_re=getattr(args, "lambda_re", None),
        lambda_im=getattr(args, "lambda_im", None), r=getattr(args, "r", None))


def _sweep_text(reports: list[RunReport], emit: str, wall: float) -> str:
    if emit == "json":
        doc = {"version": __version__, "wall_time_s": wall,
               "runs": [r.to_dict() for r in reports]}
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    for i, rep in enumerate(reports):
        header, rows = rep.table()
        if i == 0:
            writer.writerow(["seed"] + header)
        for row in rows:
            writer.writerow([rep.seed] + ["" if v is None else v for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def _matrix_command(args) -> int:
    if args.kind == "gen":
        if args.spectrum is None:
            raise ValueError("matrix gen needs --spectrum")
        n = args.n or len(args.spectrum)
        es = make_eigensystem(n, list(args.spectrum), args.cond, args.seed)
        mat = es.matrix
    else:
        if args.matrix is None:
            raise ValueError("matrix export needs --matrix")
        mat = ingest_matrix(args.matrix)
    if args.format == "coordinate":
        mat = sp.coo_matrix(mat)
    else:
        mat = mat.toarray() if hasattr(mat, "toarray") else mat
    export_matrix(mat, args.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "matrix":
        try:
            return _matrix_command(args)
        except (ValueError, OSError) as exc:
            print(json.dumps({"status": "error", "error": {"type": type(exc).__name__,
                                                           "message": str(exc)}}),
                  file=sys.stderr)
            return EXIT_FAILED

    try:
        config = config_from_args(args)
    except ValueError as exc:
        print(json.dumps({"status": "error", "error": {"type": type(exc).__name__,
                                                       "message": str(exc)}}), file=sys.stderr)
        return EXIT_FAILED

    if args.sweep > 1:
        start = time.perf_counter()
        seeds = list(range(args.seed, args.seed + args.sweep))
        try:
            reports = run_sweep(config, seeds, args.par)
        except (ValueError, RuntimeError, OSError) as exc:
            _emit(error_report(config, exc).to_json(), args.out)
            return EXIT_FAILED
        _emit(_sweep_text(reports, args.emit, time.perf_counter() - start), args.out)
        return EXIT_OK

    try:
        report = run_experiment(config)
        status = EXIT_OK
    except (ValueError, RuntimeError, OSError) as exc:
        report = error_report(config, exc)
        status = EXIT_FAILED
    _emit(report.to_csv() if args.emit == "csv" and status == EXIT_OK else report.to_json(),
          args.out)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
