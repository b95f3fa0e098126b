# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
JSON and CSV telemetry for solves, transport plans and matching runs.
"""

from __future__ import annotations
import csv
import dataclasses
import io
import json
import typing

import numpy

from . import bsgame
from . import ddbm
from . import sinkhorn


class ReportJSONEncoder(json.JSONEncoder):
    """
    Encodes regbox reports to JSON.

    Usage: ReportJSONEncoder().encode(...)
    """

    def default(self, obj):
        if isinstance(obj, bsgame.SolveReport):
            return solve_report_dict(obj)
        elif isinstance(obj, bsgame.SolverParams):
            return dataclasses.asdict(obj)
        elif isinstance(obj, bsgame.TraceRecord):
            return dataclasses.asdict(obj)
        elif isinstance(obj, numpy.ndarray):
            return obj.tolist()
        elif isinstance(obj, numpy.integer):
            return int(obj)
        elif isinstance(obj, numpy.floating):
            return float(obj)
        elif isinstance(obj, numpy.bool_):
            return bool(obj)
        return json.JSONEncoder.default(self, obj)


def encode(obj: typing.Any, indent: typing.Optional[int] = 2) -> str:
    return json.dumps(obj, cls=ReportJSONEncoder, indent=indent)


def solve_report_dict(report: bsgame.SolveReport) -> typing.Dict[str, typing.Any]:
    """
    The report fields, without the trace (see trace_csv()) and the final point.
    """
    return {
        "status": report.status,
        "outer_iterations": report.outer_iterations,
        "inner_iterations_total": report.inner_iterations_total,
        "final_gap": report.final_gap,
        "l1_bound": report.l1_bound,
        "scale": report.scale,
        "max_stability_excursion": report.max_stability_excursion,
        "alpha_doublings": report.alpha_doublings,
        "polish_steps": report.polish_steps,
        "elapsed_ns": report.elapsed_ns,
        "params": report.params,
    }


def plan_summary_dict(inst: sinkhorn.OTInstance, plan: sinkhorn.TransportPlan, epsilon: float) \
        -> typing.Dict[str, typing.Any]:
    summary = {
        "method": plan.method,
        "converged": plan.converged,
        "iterations": plan.iterations,
        "epsilon": epsilon,
        "objective": sinkhorn.sinkhorn_objective(inst, plan),
        "marginal_violation": sinkhorn.marginal_violation(plan.X, inst.d_L, inst.d_R),
    }
    if plan.report is not None:
        summary["solve"] = solve_report_dict(plan.report)
    return summary


def run_log_lines(log: ddbm.RunLog) -> str:
    """
    One compact JSON object per event, in stream order.
    """
    return "".join(json.dumps(record, cls=ReportJSONEncoder) + "\n" for record in log.records())


def run_log_summary(log: ddbm.RunLog) -> typing.Dict[str, typing.Any]:
    return {
        "events": len(log.events),
        "phases": log.phases,
        "recompute_counts": log.recompute_counts,
        "audit_violations": log.audit_violations,
        "uncertified_solves": log.uncertified_solves,
    }


TRACE_FIELDS = ("iteration", "gap", "min_entry", "padded", "alpha")


def trace_csv(trace: typing.Iterable[bsgame.TraceRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRACE_FIELDS)
    for record in trace:
        writer.writerow([record.iteration, repr(record.gap), repr(record.min_entry), int(record.padded),
                         repr(record.alpha)])
    return out.getvalue()


def trend_csv(rows: typing.Iterable[typing.Tuple[float, int, float, str]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("epsilon", "outer_iterations", "final_gap", "status"))
    for epsilon, outer, gap, status in rows:
        writer.writerow([repr(epsilon), outer, repr(gap), status])
    return out.getvalue()
