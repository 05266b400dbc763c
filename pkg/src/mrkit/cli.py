"""Command-line entry point: ``mrkit fit | simulate | constants``."""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from dataclasses import replace

from .core import Method, MRError, SolverConfig
from .diagnostics import diagnose, kappa_hat
from .io import emit_plot_data, read_summary_tsv, write_fit_json, write_study_csv
from .losses import LossKind, RobustLoss, loss_constants
from .simulation import SimSetup, StudyConfig, fit_method, run_study

METHOD_CHOICES = ("ps", "aps", "raps", "ivw", "egger", "wmedian")
LOSS_CHOICES = tuple(k.value for k in LossKind)


def _method_list(text: str) -> list[Method]:
    try:
        return [Method.parse(m) for m in text.split(",") if m.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrkit", description="Summary-data Mendelian randomization.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="estimate the causal effect from a TSV of summary statistics")
    fit.add_argument("--method", choices=METHOD_CHOICES, default="raps")
    fit.add_argument("--loss", choices=LOSS_CHOICES, default="tukey")
    fit.add_argument("--k", type=float, default=None, help="loss tuning constant")
    fit.add_argument("--input", required=True)
    fit.add_argument("--out", required=True, help="result JSON path")
    fit.add_argument("--diagnostics", metavar="PREFIX", help="write PREFIX.qq.csv and PREFIX.loo.csv")
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--ci-level", type=_unit_interval, default=0.95)

    sim = sub.add_parser("simulate", help="Monte Carlo study on a synthetic profile")
    sim.add_argument("--setup", type=int, choices=range(1, 7), required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--kappa", type=float, required=True)
    sim.add_argument("--reps", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--methods", type=_method_list, default=_method_list("ps,aps,raps,ivw,egger,wmedian"))
    sim.add_argument("--loss", choices=LOSS_CHOICES, default="tukey")
    sim.add_argument("--k", type=float, default=None)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--out", required=True, help="metrics CSV path")

    const = sub.add_parser("constants", help="print delta c1 c2 c3 for a loss")
    const.add_argument("--loss", choices=LOSS_CHOICES, default="tukey")
    const.add_argument("--k", type=float, default=None)
    return parser


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("MRKIT_SEED", "0"))


def _cmd_fit(args) -> int:
    data = read_summary_tsv(args.input)
    loss = RobustLoss(args.loss, args.k)
    config = replace(SolverConfig(), seed=_seed(args))
    method = Method.parse(args.method)
    fit = fit_method(method, data, StudyConfig(solver=config, loss=loss), config.seed)
    report = None
    if args.diagnostics:
        if method not in (Method.PS, Method.APS, Method.RAPS):
            raise MRError("diagnostics are available for ps, aps and raps only")
        report = diagnose(fit, data, config)
        emit_plot_data(report, args.diagnostics)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        kappa = kappa_hat(data)
    write_fit_json(fit, report, args.out, args.ci_level, kappa=kappa)
    return 0


def _cmd_simulate(args) -> int:
    if args.p < 1 or args.reps < 1 or args.threads < 1:
        raise MRError("--p, --reps and --threads must be positive")
    setup = SimSetup.calibrated(args.setup, args.p, args.kappa, seed=_seed(args))
    study = StudyConfig(solver=replace(SolverConfig(), seed=_seed(args)), loss=RobustLoss(args.loss, args.k))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = run_study(setup, args.methods, args.reps, study, threads=args.threads)
    write_study_csv(rows, args.out, args.setup, args.p, args.kappa)
    return 0


def _cmd_constants(args) -> int:
    c = loss_constants(RobustLoss(args.loss, args.k))
    print(" ".join("%.17g" % v for v in c.as_tuple()))
    return 0


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {"fit": _cmd_fit, "simulate": _cmd_simulate, "constants": _cmd_constants}[args.command]
    try:
        return handler(args)
    except (MRError, ValueError, OSError) as exc:
        print(f"mrkit: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
