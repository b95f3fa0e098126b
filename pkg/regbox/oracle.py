# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
Brute-force baselines used to audit the solvers.

Every oracle here takes a different route from the code it checks (other
update orders, dense arithmetic, other algorithms), and refuses instances
beyond desk scale instead of quietly degrading.
"""

from __future__ import annotations
import dataclasses
import itertools
import logging
import math
import typing

import more_itertools
import networkx
import networkx.algorithms.bipartite
import numpy

from . import bsgame
from . import numkit
from . import sinkhorn
from . import utils

logging.basicConfig()
logger = logging.getLogger(__name__)
logger.setLevel(utils.log_level())


EXHAUSTIVE_MAX_EDGES = 20
REG_OPTIMUM_MAX_DIM = 200
FIXPOINT_MAX_SIDE = 64

MIRROR_DESCENT = "mirror-descent"
DUAL_NEWTON = "dual-newton"


class OracleRefusal(Exception):
    def __init__(self, message: str, best_gap: typing.Optional[float] = None):
        super().__init__(message)
        self.best_gap = best_gap


@dataclasses.dataclass(frozen=True)
class OracleBudget:
    max_iterations: int = 200_000
    tolerance: float = 1e-13
    wall_time: float = 120.0

    def __post_init__(self):
        if self.max_iterations <= 0 or self.tolerance <= 0 or self.wall_time <= 0:
            raise ValueError("oracle budget fields must be positive: {}".format(self))


@dataclasses.dataclass(frozen=True, eq=False)
class OracleResult:
    x: numpy.ndarray
    y: numpy.ndarray
    gap: float
    iterations: int
    method: str


EdgePairs = typing.List[typing.Tuple[int, int]]


def _edge_pairs(graph: typing.Any) -> EdgePairs:
    if hasattr(graph, "alive_pairs"):
        return graph.alive_pairs()
    return [(int(u), int(v)) for u, v in graph]


def hopcroft_karp(graph: typing.Any) -> int:
    """
    Maximum cardinality matching size of a bipartite graph (or of a list of
    (left, right) pairs).
    """
    pairs = _edge_pairs(graph)
    if not pairs:
        return 0
    left = {("L", u) for u, _ in pairs}
    network = networkx.Graph()
    network.add_nodes_from(left, bipartite=0)
    network.add_edges_from((("L", u), ("R", v)) for u, v in pairs)
    matching = networkx.algorithms.bipartite.hopcroft_karp_matching(network, top_nodes=left)
    return len(matching) // 2


def exhaustive_mcm(graph: typing.Any) -> int:
    """
    Maximum matching size by enumerating edge subsets, largest first.
    """
    pairs = _edge_pairs(graph)
    if len(pairs) > EXHAUSTIVE_MAX_EDGES:
        raise OracleRefusal("exhaustive matching refuses {} edges (limit {})".format(
            len(pairs), EXHAUSTIVE_MAX_EDGES))
    largest = min(len(pairs), len({u for u, _ in pairs}), len({v for _, v in pairs}))
    for size in range(largest, 0, -1):
        for subset in itertools.combinations(pairs, size):
            if more_itertools.all_unique(u for u, _ in subset) and more_itertools.all_unique(v for _, v in subset):
                return size
    return 0


def _smooth_part(game: bsgame.RegGame, x: numpy.ndarray) -> typing.Tuple[float, numpy.ndarray]:
    """
    h(x) = max_y y^T (A^T x - b) - (eps/2) (y^2)^T |A|^T x and its gradient.
    """
    eps = game.require_eps()
    y = bsgame.best_response_y(game, x)
    value = float(y @ (numkit.spmv(game.A, x, transpose=True) - game.b)
                  - 0.5 * eps * (y ** 2) @ numkit.spmv(game.A, x, transpose=True, absolute=True))
    grad = numkit.spmv(game.A, y) - 0.5 * eps * numkit.spmv(game.A, y ** 2, absolute=True)
    return value, grad


def _positive(x: numpy.ndarray) -> numpy.ndarray:
    x = numpy.maximum(x, 1e-300)
    return x / x.sum()


def _mirror_descent(game: bsgame.RegGame, tol: float, budget: OracleBudget) -> OracleResult:
    stopwatch = utils.Stopwatch()
    x = numpy.full(game.m, 1.0 / game.m)
    lipschitz = 1.0
    best_gap = math.inf
    for iteration in range(1, budget.max_iterations + 1):
        y = bsgame.best_response_y(game, x)
        gap = bsgame.certified_gap(game, bsgame.PDPoint(x, y))
        best_gap = min(best_gap, gap)
        if gap <= tol:
            return OracleResult(x, y, max(gap, 0.0), iteration, MIRROR_DESCENT)
        if stopwatch.elapsed_secs() > budget.wall_time:
            break

        h_value, h_grad = _smooth_part(game, x)
        step = game.c + h_grad
        log_x = numpy.log(x)
        while True:
            candidate, _ = numkit.normalized_exp((lipschitz * log_x - step) / (game.mu + lipschitz))
            candidate = _positive(candidate)
            candidate_value, _ = _smooth_part(game, candidate)
            bound = h_value + h_grad @ (candidate - x) + lipschitz * numkit.kl_div(candidate, x)
            if candidate_value <= bound + 1e-15 * (1.0 + abs(h_value)):
                break
            lipschitz *= 2.0
        x = candidate

    raise OracleRefusal("mirror descent exhausted its budget with gap {}".format(best_gap), best_gap)


def _dual_value_and_weights(game: bsgame.RegGame, y: numpy.ndarray) -> typing.Tuple[float, numpy.ndarray]:
    eps = game.require_eps()
    v = numkit.spmv(game.A, y) + game.c - 0.5 * eps * numkit.spmv(game.A, y ** 2, absolute=True)
    return numkit.softmin(v, game.mu) - float(game.b @ y), numkit.softmin_weights(v, game.mu)


def _dual_newton(game: bsgame.RegGame, tol: float, budget: OracleBudget) -> OracleResult:
    stopwatch = utils.Stopwatch()
    eps = game.require_eps()
    A = game.A.to_dense()
    abs_A = numpy.abs(A)
    y = numpy.zeros(game.n)
    value, p = _dual_value_and_weights(game, y)
    best_gap = math.inf
    for iteration in range(1, budget.max_iterations + 1):
        x = _positive(p)
        gap = bsgame.certified_gap(game, bsgame.PDPoint(x, y))
        best_gap = min(best_gap, gap)
        if gap <= tol:
            return OracleResult(x, y, max(gap, 0.0), iteration, DUAL_NEWTON)
        if stopwatch.elapsed_secs() > budget.wall_time:
            break

        J = A - eps * abs_A * y[None, :]
        grad = J.T @ p - game.b
        covariance = numpy.diag(p) - numpy.outer(p, p)
        hessian = -(J.T @ covariance @ J) / game.mu - eps * numpy.diag(abs_A.T @ p)

        pinned = ((y <= 0.0) & (grad < 0.0)) | ((y >= 1.0) & (grad > 0.0))
        free = ~pinned
        direction = numpy.zeros(game.n)
        if free.any():
            direction[free] = numpy.linalg.solve(-hessian[numpy.ix_(free, free)], grad[free])

        step = 1.0
        while step > 1e-16:
            candidate = numpy.clip(y + step * direction, 0.0, 1.0)
            candidate_value, candidate_p = _dual_value_and_weights(game, candidate)
            if candidate_value >= value + 1e-4 * grad @ (candidate - y):
                break
            step *= 0.5
        else:
            logger.debug("dual newton line search stalled at gap %s", gap)
            break
        y, value, p = candidate, candidate_value, candidate_p

    raise OracleRefusal("dual newton stopped with gap {} above {}".format(best_gap, tol), best_gap)


def brute_reg_optimum(game: bsgame.RegGame, tol: float = 1e-10, budget: typing.Optional[OracleBudget] = None,
                      method: str = MIRROR_DESCENT) -> OracleResult:
    """
    Minimizes f^x(x) = max_y f(x, y) until its certified gap is at most tol.

    mirror-descent runs composite entropic mirror descent on f^x with a
    backtracked (never decreasing) curvature estimate. dual-newton runs
    projected Newton ascent on the concave dual L(y) and reads x off as the
    softmin distribution; it copes with ill-conditioned games where mirror
    descent crawls.
    """
    budget = OracleBudget() if budget is None else budget
    if game.m > REG_OPTIMUM_MAX_DIM:
        raise OracleRefusal("regularized optimum refuses m={} (limit {})".format(game.m, REG_OPTIMUM_MAX_DIM))
    if game.m == 1:
        x = numpy.ones(1)
        y = bsgame.best_response_y(game, x)
        return OracleResult(x, y, max(bsgame.certified_gap(game, bsgame.PDPoint(x, y)), 0.0), 0, method)
    if method == MIRROR_DESCENT:
        return _mirror_descent(game, tol, budget)
    if method == DUAL_NEWTON:
        return _dual_newton(game, tol, budget)
    raise ValueError("unknown oracle method {}".format(method))


def sinkhorn_fixpoint(inst: sinkhorn.OTInstance, budget: typing.Optional[OracleBudget] = None) \
        -> sinkhorn.TransportPlan:
    """
    Dense Sinkhorn iteration, columns first, run until the total marginal
    violation is at most the budget tolerance.
    """
    budget = OracleBudget() if budget is None else budget
    n_left, n_right = inst.shape
    if n_left > FIXPOINT_MAX_SIDE or n_right > FIXPOINT_MAX_SIDE:
        raise OracleRefusal("fixpoint refuses a {}x{} instance (limit {} per side)".format(
            n_left, n_right, FIXPOINT_MAX_SIDE))
    if numpy.any(inst.d_L <= 0) or numpy.any(inst.d_R <= 0):
        raise OracleRefusal("fixpoint needs strictly positive demands")

    K = numpy.exp(-inst.cost / inst.mu)
    if inst.support is not None:
        K = numpy.where(inst.support, K, 0.0)
    if numpy.any(K.sum(axis=1) <= 0) or numpy.any(K.sum(axis=0) <= 0):
        raise OracleRefusal("kernel underflows to an all-zero row or column")

    a = numpy.ones(n_left)
    b = numpy.ones(n_right)
    violation = math.inf
    for iteration in range(1, budget.max_iterations + 1):
        b = inst.d_R / (K.T @ a)
        a = inst.d_L / (K @ b)
        X = a[:, None] * K * b[None, :]
        violation = sinkhorn.marginal_violation(X, inst.d_L, inst.d_R)
        if not numpy.isfinite(violation):
            raise OracleRefusal("fixpoint iteration overflowed")
        if violation <= budget.tolerance:
            with numpy.errstate(divide="ignore"):
                return sinkhorn.TransportPlan(X, numpy.log(a), numpy.log(b), iteration, True, "fixpoint")

    raise OracleRefusal("fixpoint did not converge (violation {})".format(violation))


def reference_ot_objective(cost: typing.Sequence[typing.Sequence[float]], X: typing.Sequence[typing.Sequence[float]],
                           mu: float) -> float:
    """
    <C, X> + mu sum X log X evaluated entry by entry in plain floats.
    """
    total = 0.0
    for cost_row, plan_row in zip(cost, X):
        for c_ij, x_ij in zip(cost_row, plan_row):
            x_ij = float(x_ij)
            total += float(c_ij) * x_ij
            if x_ij > 0.0:
                total += mu * x_ij * math.log(x_ij)
    return total
