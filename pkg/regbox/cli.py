# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
Command-line front end.

    regbox solve GAME              certified solve of a regularized game
    regbox ddbm GRAPH STREAM       decremental matching over a deletion stream
    regbox sinkhorn OT             entropic transport (--method accel|unaccel|scaling|both)
    regbox oracle TARGET INPUT     mcm GRAPH | reg-optimum GAME | fixpoint OT
    regbox generate KIND           seeded random game | graph | ot files
    regbox trend [GAME]            outer iterations over an epsilon ladder

Exit codes: 0 success, 1 bad input, 2 uncertified result or audit
violation, 3 oracle refusal.
"""

from __future__ import annotations
import argparse
import logging
import math
import sys
import typing

import numpy

from . import bsgame
from . import config as run_config
from . import ddbm
from . import fileio
from . import numkit
from . import oracle
from . import report
from . import sinkhorn
from . import utils

logging.basicConfig()
logger = logging.getLogger(__name__)
logger.setLevel(utils.log_level())


EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNCERTIFIED = 2
EXIT_REFUSED = 3

ORACLE_TARGETS = ("mcm", "reg-optimum", "fixpoint")
GENERATE_KINDS = ("game", "graph", "ot")
TREND_STEPS = 3
TREND_RATIO = 4.0
TREND_SLOPE_RANGE = (0.3, 0.8)


def _write_json(path: typing.Optional[str], obj: typing.Any):
    fileio.write_text(path, report.encode(obj) + "\n")


def _json_path(output: typing.Optional[str]) -> typing.Optional[str]:
    return None if output is None or output == "-" else output + ".json"


def cmd_solve(config: run_config.RunConfig) -> int:
    """
    Writes the solution vector (one entry per line) to --output and the
    solve report as JSON next to it (stdout without --output).
    """
    data = fileio.read_game(config.inputs[0])
    if config.mu is not None:
        data = fileio.GameData(data.A, data.b, data.c, config.mu, data.eps)
    game = data.to_game(config.sigma)
    if game.eps_reg is None:
        logger.info("game has no quadratic term; solving the half-regularized problem")
        x, solve_report = bsgame.solve_half_regularized(game, config.sigma, config.mode, **config.solve_args())
    else:
        x, solve_report = bsgame.solve(game, config.sigma, config.mode, **config.solve_args())

    if config.output is not None:
        fileio.write_text(config.output, fileio.format_vector(x))
    if config.trace_csv is not None:
        fileio.write_text(config.trace_csv, report.trace_csv(solve_report.trace))
    _write_json(_json_path(config.output), solve_report)
    return EXIT_OK if solve_report.certified else EXIT_UNCERTIFIED


def cmd_ddbm(config: run_config.RunConfig) -> int:
    """
    Writes the run log as JSON lines; audit violations exit with 2.
    """
    graph = fileio.read_graph(config.inputs[0])
    stream = fileio.read_stream(config.inputs[1])
    log = ddbm.dec_matching_run(graph, config.epsilon, stream, config=config.ddbm_config())
    fileio.write_text(config.output, report.run_log_lines(log))
    summary = report.run_log_summary(log)
    logger.info("ddbm run finished: %s", summary)
    if log.audit_violations:
        logger.error("%s audit violations", len(log.audit_violations))
        return EXIT_UNCERTIFIED
    return EXIT_OK


def _run_sinkhorn_method(inst: sinkhorn.OTInstance, method: str, config: run_config.RunConfig) \
        -> sinkhorn.TransportPlan:
    if method == sinkhorn.ACCEL:
        return sinkhorn.solve_via_bsgame(inst, config.epsilon, config.mode, config.entropy_l1_const,
                                         **config.solve_args())
    if method == sinkhorn.SCALING:
        return sinkhorn.solve_scaling(inst, config.epsilon)
    return sinkhorn.solve_unaccel(inst, config.epsilon, config.mode, entropy_l1_const=config.entropy_l1_const)


def cmd_sinkhorn(config: run_config.RunConfig) -> int:
    """
    Writes the plan as CSV to --output and a JSON summary per method. With
    --method both, the unaccelerated and accelerated plans are compared.
    """
    inst = fileio.read_ot(config.inputs[0])
    if config.mu is not None:
        inst = sinkhorn.OTInstance(inst.cost, inst.d_L, inst.d_R, config.mu)
    method = config.method or sinkhorn.UNACCEL
    methods = [sinkhorn.UNACCEL, sinkhorn.ACCEL] if method == run_config.BOTH else [method]

    plans = [_run_sinkhorn_method(inst, name, config) for name in methods]
    summaries = [report.plan_summary_dict(inst, plan, config.epsilon) for plan in plans]
    if len(plans) == 2:
        difference = abs(summaries[0]["objective"] - summaries[1]["objective"])
        for summary in summaries:
            summary["cross_method_difference"] = difference
        if difference > 2.0 * config.epsilon:
            logger.warning("methods disagree by %s (> 2 epsilon)", difference)

    if config.output is not None:
        fileio.write_text(config.output, fileio.format_matrix(plans[-1].X))
    _write_json(_json_path(config.output), summaries[0] if len(summaries) == 1 else summaries)
    return EXIT_OK if all(plan.converged for plan in plans) else EXIT_UNCERTIFIED


def cmd_oracle(config: run_config.RunConfig) -> int:
    target = config.inputs[0]
    path = config.inputs[1]
    if target == "mcm":
        fileio.write_text(config.output, "{}\n".format(oracle.hopcroft_karp(fileio.read_graph(path))))
        return EXIT_OK

    if target == "reg-optimum":
        data = fileio.read_game(path)
        game = data.to_game()
        if game.eps_reg is None:
            game = game.with_eps_reg(config.epsilon)
        result = oracle.brute_reg_optimum(game, method=config.method or oracle.MIRROR_DESCENT)
        _write_json(config.output, {
            "method": result.method,
            "gap": result.gap * game.scale,
            "iterations": result.iterations,
            "primal_value": bsgame.primal_value(game, result.x) * game.scale,
            "x": result.x,
            "y": result.y,
        })
        return EXIT_OK

    inst = fileio.read_ot(path)
    plan = oracle.sinkhorn_fixpoint(inst)
    _write_json(config.output, {
        "iterations": plan.iterations,
        "objective": sinkhorn.sinkhorn_objective(inst, plan),
        "plan": plan.X,
    })
    return EXIT_OK


def random_game_data(rows: int, cols: int, density: float, seed: int, mu: float,
                     eps: typing.Optional[float]) -> fileio.GameData:
    """
    A game with A entries in [-1, 1] at the given density and b, c in [0, 1].
    """
    rng = numpy.random.default_rng(seed)
    mask = rng.random((rows, cols)) < density
    A = numpy.where(mask, rng.uniform(-1.0, 1.0, (rows, cols)), 0.0)
    return fileio.GameData(numkit.SparseMatrix.from_dense(A), rng.random(cols), rng.random(rows), mu, eps)


def random_ot_instance(rows: int, cols: int, seed: int, mu: float) -> sinkhorn.OTInstance:
    rng = numpy.random.default_rng(seed)
    d_L = rng.uniform(0.5, 1.5, rows)
    d_R = rng.uniform(0.5, 1.5, cols)
    return sinkhorn.OTInstance(rng.random((rows, cols)), d_L / d_L.sum(), d_R / d_R.sum(), mu)


def cmd_generate(config: run_config.RunConfig) -> int:
    kind = config.inputs[0]
    if kind == "game":
        data = random_game_data(config.rows, config.cols, config.density, config.seed,
                                0.5 if config.mu is None else config.mu, config.epsilon)
        fileio.write_text(config.output, fileio.format_game(data))
    elif kind == "graph":
        graph = ddbm.random_bipartite_graph(config.rows, config.cols, config.density, config.seed)
        fileio.write_text(config.output, fileio.format_graph(graph))
    else:
        inst = random_ot_instance(config.rows, config.cols, config.seed, 0.1 if config.mu is None else config.mu)
        fileio.write_text(config.output, fileio.format_ot(inst))
    return EXIT_OK


def trend_slope(epsilons: typing.Sequence[float], outer_iterations: typing.Sequence[int]) -> float:
    """
    The least-squares slope of log(outer iterations) against log(1/eps).
    """
    return float(numpy.polyfit(numpy.log(1.0 / numpy.asarray(epsilons)),
                               numpy.log(numpy.maximum(numpy.asarray(outer_iterations, dtype=float), 1.0)), 1)[0])


def cmd_trend(config: run_config.RunConfig) -> int:
    """
    Solves one game for eps, eps/4, eps/16 with mu fixed and the dual polish
    off, and fits the growth of the outer iteration count. Writes the ladder
    as CSV to --output and the fit as JSON.
    """
    if config.inputs:
        data = fileio.read_game(config.inputs[0])
    else:
        data = random_game_data(config.rows, config.cols, config.density, config.seed,
                                0.05 if config.mu is None else config.mu, None)
    if config.mu is not None:
        data = fileio.GameData(data.A, data.b, data.c, config.mu, data.eps)

    rows = []
    for step in range(TREND_STEPS):
        eps = config.epsilon / TREND_RATIO ** step
        game = data.to_game(config.sigma).with_eps_reg(eps)
        _, solve_report = bsgame.solve(game, config.sigma, config.mode, polish=False, **config.solve_args())
        rows.append((eps, solve_report.outer_iterations, solve_report.final_gap, solve_report.status))
        logger.info("trend eps=%s: %s outer iterations", eps, solve_report.outer_iterations)

    slope = trend_slope([row[0] for row in rows], [row[1] for row in rows])
    saturated = any(status != bsgame.CERTIFIED for _, _, _, status in rows)
    low, high = TREND_SLOPE_RANGE
    if not low <= slope <= high:
        logger.warning("outer iteration slope %s outside [%s, %s]%s", slope, low, high,
                       " (some solves hit their cap)" if saturated else "")
    if config.output is not None:
        fileio.write_text(config.output, report.trend_csv(rows))
    _write_json(_json_path(config.output), {"slope": slope, "saturated": saturated, "mu": data.mu,
                                            "epsilons": [row[0] for row in rows],
                                            "outer_iterations": [row[1] for row in rows]})
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "ddbm": cmd_ddbm,
    "sinkhorn": cmd_sinkhorn,
    "oracle": cmd_oracle,
    "generate": cmd_generate,
    "trend": cmd_trend,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regbox", description="Regularized box-simplex game solvers and the "
                                                                "decremental matching and transport tools built on them.")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    solve_parser = subparsers.add_parser("solve", help="solve a game file to certified accuracy --sigma")
    solve_parser.add_argument("inputs", nargs=1, metavar="GAME")

    ddbm_parser = subparsers.add_parser("ddbm", help="run decremental matching over a deletion stream")
    ddbm_parser.add_argument("inputs", nargs=2, metavar=("GRAPH", "STREAM"))

    sinkhorn_parser = subparsers.add_parser("sinkhorn", help="solve an entropic transport instance")
    sinkhorn_parser.add_argument("inputs", nargs=1, metavar="OT")

    oracle_parser = subparsers.add_parser("oracle", help="run a brute-force baseline")
    oracle_parser.add_argument("target", choices=ORACLE_TARGETS)
    oracle_parser.add_argument("path", metavar="INPUT")

    generate_parser = subparsers.add_parser("generate", help="write a seeded random instance")
    generate_parser.add_argument("kind", choices=GENERATE_KINDS)

    trend_parser = subparsers.add_parser("trend", help="acceleration trend over an epsilon ladder")
    trend_parser.add_argument("inputs", nargs="?", metavar="GAME")

    for subparser in subparsers.choices.values():
        run_config.add_config_args(subparser)
    return parser


def parse_args(argv: typing.Optional[typing.Sequence[str]] = None) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    if args.subcommand == "oracle":
        args.inputs = [args.target, args.path]
    elif args.subcommand == "generate":
        args.inputs = [args.kind]
    elif args.subcommand == "trend":
        args.inputs = [] if args.inputs is None else [args.inputs]
    return args


def main(args: argparse.Namespace) -> int:
    try:
        config = run_config.from_args(args)
        if config.log_level is not None:
            utils.set_log_level(config.log_level)
        return COMMANDS[config.subcommand](config)
    except (fileio.FormatError, numkit.InstanceError, ddbm.StreamError, bsgame.ParameterError) as e:
        logger.error("%s", e)
        return EXIT_INPUT
    except OSError as e:
        logger.error("cannot access %s: %s", e.filename, e.strerror)
        return EXIT_INPUT
    except oracle.OracleRefusal as e:
        logger.error("oracle refused: %s", e)
        if e.best_gap is not None and math.isfinite(e.best_gap):
            logger.error("best certified gap reached: %s", e.best_gap)
        return EXIT_REFUSED


def run(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    return main(parse_args(argv))


if __name__ == "__main__":
    sys.exit(run())
