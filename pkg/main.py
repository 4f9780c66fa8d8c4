#!/usr/bin/env python3
"""
Volterra Lattice Toolkit - command-line entry point.

Subcommands: gen, spectrum, invariants, verify, evolve, expand. Structured
results go to stdout as JSON (trajectories to CSV files); diagnostics and the
one-line error reason go to stderr.
"""

import argparse
import logging
import sys
from typing import List, Optional

import numpy as np

from config.constants import EXIT_CHECK_FAILED, EXIT_INVALID_INPUT, EXIT_OK, SUITES
from config.settings import ToleranceConfig, load_tolerance_config
from modules.errors import VolterraError
from modules.flows import get_flow_integrator
from modules.invariants import expand_log_delta, expand_log_rho, invariant_set, j_from_i
from modules.lattice import PeriodicOperator, new_operator, random_operator
from modules.spectral import get_spectral_analyzer
from modules.verification import get_verification_suite
from utils.file_ops import (
    dump_json, export_rows_to_csv, load_operator_file, save_operator_file, save_text_file
)
from utils.helpers import complex_pairs
from utils.schemas import EvolveSummary, ExpansionTable, InvariantsReport, SpectrumReport

logger = logging.getLogger(__name__)


class CommandLineParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors follow the error=<Class> reason=<text> convention."""

    def error(self, message: str):
        sys.stderr.write(f"error=UsageError reason={message}\n")
        raise SystemExit(EXIT_INVALID_INPUT)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="dotenv-format file with EQ_TOL, FD_STEP, SEP_TOL, SHEET_TOL, FIT_COND_MAX")
    common.add_argument("--tol", type=float, help="override eq_tol")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")

    parser = CommandLineParser(prog="volterra", description="Periodic Volterra lattice toolkit")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CommandLineParser)

    gen = commands.add_parser("gen", parents=[common], help="write a seeded random operator")
    gen.add_argument("--N", dest="n", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--lo", type=float, default=0.5)
    gen.add_argument("--hi", type=float, default=2.0)
    gen.add_argument("--out", required=True)

    for name, text in (("spectrum", "discriminant, branch points and divisor"),
                       ("invariants", "integrals J_k by both routes and log expansions")):
        sub = commands.add_parser(name, parents=[common], help=text)
        sub.add_argument("--in", dest="infile", required=True)

    verify = commands.add_parser("verify", parents=[common], help="run property suites")
    verify.add_argument("--in", dest="infile", required=True)
    verify.add_argument("--suite", default="all", choices=["all"] + SUITES)
    verify.add_argument("--seed", type=int, default=0, help="seed of the random test gradients")

    evolve = commands.add_parser("evolve", parents=[common], help="integrate the k-th flow")
    evolve.add_argument("--in", dest="infile", required=True)
    evolve.add_argument("--flow", type=int, required=True)
    evolve.add_argument("--t-end", dest="t_end", type=float, required=True)
    evolve.add_argument("--out", required=True)

    expand = commands.add_parser("expand", parents=[common], help="coefficient tables of ln Delta and ln rho")
    expand.add_argument("--in", dest="infile", required=True)
    expand.add_argument("--order", type=int, default=None)
    return parser


def configure_logging(verbosity: int):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")


def read_operator(filepath: str) -> PeriodicOperator:
    return new_operator(load_operator_file(filepath).c)


def command_gen(args: argparse.Namespace, tol: ToleranceConfig) -> int:
    op = random_operator(args.n, args.seed, (args.lo, args.hi))
    save_operator_file(args.out, op.c.tolist())
    logger.info("wrote operator T=%s to %s", op.period, args.out)
    return EXIT_OK


def command_spectrum(args: argparse.Namespace, tol: ToleranceConfig) -> int:
    data = get_spectral_analyzer(tol).analyze(read_operator(args.infile))
    divisor = data.divisor
    report = SpectrumReport(
        I=data.delta.I.tolist(),
        branch_points_plus=complex_pairs(data.curve.branch_points_plus),
        branch_points_minus=complex_pairs(data.curve.branch_points_minus),
        nonsingular=data.curve.nonsingular,
        dirichlet=divisor.lam.tolist(),
        rho=complex_pairs(divisor.rho) if divisor.resolved else [],
        sheet=[int(s) for s in divisor.sheet] if divisor.resolved else [],
    )
    sys.stdout.write(dump_json(report.model_dump()))
    return EXIT_OK


def command_invariants(args: argparse.Namespace, tol: ToleranceConfig) -> int:
    op = read_operator(args.infile)
    delta = get_spectral_analyzer(tol).delta(op)
    report = InvariantsReport(
        J=invariant_set(op).J.tolist(),
        J_from_I=[-float(np.log(delta.I[0]))] + [j_from_i(delta, k) for k in range(1, op.genus + 1)],
        lnDelta_coeffs=expand_log_delta(delta).coefficients.tolist(),
        lnRho_coeffs=expand_log_rho(op, delta, tol=tol).coefficients.tolist(),
    )
    sys.stdout.write(dump_json(report.model_dump()))
    return EXIT_OK


def command_verify(args: argparse.Namespace, tol: ToleranceConfig) -> int:
    reports = get_verification_suite(tol, args.seed).run(read_operator(args.infile), [args.suite])
    sys.stdout.write(dump_json([r.model_dump(by_alias=True) for r in reports]))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def command_evolve(args: argparse.Namespace, tol: ToleranceConfig) -> int:
    op = read_operator(args.infile)
    traj, rows = get_flow_integrator(tol).evolve(op, args.flow, args.t_end)
    headers = ["t"] + [f"c_{i + 1}" for i in range(op.period)]
    table = np.column_stack([traj.times, traj.states])
    save_text_file(args.out, export_rows_to_csv(table, headers))
    summary = EvolveSummary(flow=args.flow, t_end=args.t_end, steps=traj.steps,
                            step_error_estimate=traj.step_error_estimate, drift=rows)
    sys.stdout.write(dump_json(summary.model_dump()))
    return EXIT_OK if all(row.conserved for row in rows if row.required) else EXIT_CHECK_FAILED


def command_expand(args: argparse.Namespace, tol: ToleranceConfig) -> int:
    op = read_operator(args.infile)
    delta = get_spectral_analyzer(tol).delta(op)
    log_delta = expand_log_delta(delta, args.order)
    log_rho = expand_log_rho(op, delta, args.order, tol)
    j_values = invariant_set(op).J
    table = ExpansionTable(
        order=log_delta.order,
        log_coefficient_delta=log_delta.log_coefficient,
        log_coefficient_rho=log_rho.log_coefficient,
        lnDelta=log_delta.coefficients.tolist(),
        lnRho=log_rho.coefficients.tolist(),
        J=j_values[:log_delta.order + 1].tolist(),
    )
    sys.stdout.write(dump_json(table.model_dump()))
    return EXIT_OK


COMMANDS = {
    "gen": command_gen,
    "spectrum": command_spectrum,
    "invariants": command_invariants,
    "verify": command_verify,
    "evolve": command_evolve,
    "expand": command_expand,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command and return the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_INVALID_INPUT
    configure_logging(args.verbose)

    try:
        tol = load_tolerance_config(args.config).with_eq_tol(args.tol)
        return COMMANDS[args.command](args, tol)
    except VolterraError as e:
        sys.stderr.write(f"error={e.__class__.__name__} reason={e.reason}\n")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
