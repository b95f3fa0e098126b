# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
Solvers for the entropically regularized transport problem

    min_{X >= 0, X 1 = d_L, X^T 1 = d_R} <C, X> + mu H(X)

by classical Sinkhorn iteration (solve_unaccel, solve_scaling) and by the
reduction to a regularized box-simplex game (solve_via_bsgame), together
with plan rounding and demand padding.
"""

from __future__ import annotations
import dataclasses
import logging
import math
import typing

import numpy
import scipy.sparse
import scipy.special

from . import bsgame
from . import numkit
from . import utils

logging.basicConfig()
logger = logging.getLogger(__name__)
logger.setLevel(utils.log_level())


ACCEL = "accel"
UNACCEL = "unaccel"
SCALING = "scaling"

ENTROPY_L1_CONST = 33.0
DEMAND_FLOOR_MIN = 1e-12
DEFAULT_MAX_ITERS = 1_000_000


@dataclasses.dataclass(frozen=True, eq=False)
class OTInstance:
    """
    A transport instance. When support is given, entries outside it are
    forbidden (their kernel entry is zero) and their cost is ignored.
    """
    cost: numpy.ndarray
    d_L: numpy.ndarray
    d_R: numpy.ndarray
    mu: float
    support: typing.Optional[numpy.ndarray] = None

    def __post_init__(self):
        cost = numpy.atleast_2d(numpy.array(self.cost, dtype=float))
        n_left, n_right = cost.shape
        support = None
        if self.support is not None:
            support = numpy.array(self.support, dtype=bool)
            if support.shape != cost.shape:
                raise numkit.InstanceError("support mask shape {} differs from cost shape {}".format(
                    support.shape, cost.shape))
            cost = numpy.where(support, cost, 0.0)
        if not numpy.all(numpy.isfinite(cost)) or numpy.any(cost < 0):
            raise numkit.InstanceError("costs must be finite and nonnegative")
        if not self.mu > 0:
            raise numkit.InstanceError("mu must be positive, got {}".format(self.mu))
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "d_L", numkit.as_simplex(self.d_L, n_left))
        object.__setattr__(self, "d_R", numkit.as_simplex(self.d_R, n_right))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "support", support)

    @property
    def shape(self) -> typing.Tuple[int, int]:
        return self.cost.shape

    @property
    def m(self) -> int:
        if self.support is None:
            return self.cost.size
        return int(self.support.sum())

    @property
    def n(self) -> int:
        return sum(self.cost.shape)

    def log_kernel(self) -> numpy.ndarray:
        log_K = -self.cost / self.mu
        if self.support is not None:
            log_K = numpy.where(self.support, log_K, -numpy.inf)
        return log_K

    def cost_inf_norm(self) -> float:
        return float(self.cost.max()) if self.cost.size else 0.0

    def with_demands(self, d_L: numpy.ndarray, d_R: numpy.ndarray) -> OTInstance:
        return OTInstance(self.cost, d_L, d_R, self.mu, self.support)


@dataclasses.dataclass
class TransportPlan:
    X: numpy.ndarray
    u: typing.Optional[numpy.ndarray] = None
    v: typing.Optional[numpy.ndarray] = None
    iterations: int = 0
    converged: bool = True
    method: str = ""
    report: typing.Optional[bsgame.SolveReport] = dataclasses.field(default=None, repr=False)


def sinkhorn_objective(inst: OTInstance, plan: typing.Union[TransportPlan, numpy.ndarray]) -> float:
    """
    <C, X> + mu H(X) with 0 log 0 = 0.
    """
    X = plan.X if isinstance(plan, TransportPlan) else numpy.asarray(plan, dtype=float)
    if X.shape != inst.shape:
        raise numkit.InstanceError("plan shape {} differs from instance shape {}".format(X.shape, inst.shape))
    if numpy.any(X < 0):
        raise numkit.InstanceError("plan has a negative entry {}".format(X.min()))
    if abs(X.sum() - 1.0) > 1e-9:
        raise numkit.InstanceError("plan has total mass {}, not 1".format(X.sum()))
    return float(numpy.sum(inst.cost * X) + inst.mu * numkit.entropy(X.reshape(-1)))


def marginal_violation(X: numpy.ndarray, d_L: numpy.ndarray, d_R: numpy.ndarray) -> float:
    """
    ||X 1 - d_L||_1 + ||X^T 1 - d_R||_1.
    """
    return float(numpy.abs(X.sum(axis=1) - d_L).sum() + numpy.abs(X.sum(axis=0) - d_R).sum())


def sinkhorn_iterate(inst: OTInstance, delta: float, max_iters: int = DEFAULT_MAX_ITERS) -> TransportPlan:
    """
    Alternately fits row then column marginals of exp(u_i - C_ij/mu + v_j)
    in the log domain until the row marginals are within delta in l1. The
    returned plan matches its column marginals exactly.
    """
    if not delta > 0:
        raise numkit.InstanceError("delta must be positive, got {}".format(delta))
    if numpy.any(inst.d_L <= 0) or numpy.any(inst.d_R <= 0):
        raise numkit.InstanceError("Sinkhorn iteration needs strictly positive demands; pad them first")
    log_K = inst.log_kernel()
    if numpy.any(numpy.all(numpy.isneginf(log_K), axis=1)) or numpy.any(numpy.all(numpy.isneginf(log_K), axis=0)):
        raise numkit.InstanceError("a row or column of the support is empty")

    log_d_L = numpy.log(inst.d_L)
    log_d_R = numpy.log(inst.d_R)
    u = numpy.zeros(inst.shape[0])
    v = numpy.zeros(inst.shape[1])
    X = numpy.zeros(inst.shape)
    violation = math.inf
    iteration = 0
    for iteration in range(1, max_iters + 1):
        u = log_d_L - scipy.special.logsumexp(log_K + v[None, :], axis=1)
        v = log_d_R - scipy.special.logsumexp(log_K + u[:, None], axis=0)
        X = numpy.exp(u[:, None] + log_K + v[None, :])
        violation = float(numpy.abs(X.sum(axis=1) - inst.d_L).sum())
        if violation <= delta:
            logger.debug("sinkhorn converged after %s iterations (violation %s)", iteration, violation)
            return TransportPlan(X, u, v, iteration, True, UNACCEL)

    logger.warning("sinkhorn stopped unconverged after %s iterations (violation %s > %s)",
                   iteration, violation, delta)
    return TransportPlan(X, u, v, iteration, False, UNACCEL)


def ot_round(X: numpy.ndarray, d_L: numpy.ndarray, d_R: numpy.ndarray) -> numpy.ndarray:
    """
    Repairs X to exact marginals d_L and d_R: scale rows and then columns
    down to their demands, then add the rank one correction
    err_L err_R^T / ||err_L||_1.
    """
    X = numpy.array(X, dtype=float)
    if numpy.any(X < 0):
        raise numkit.InstanceError("ot_round needs a nonnegative plan")
    rows = X.sum(axis=1)
    with numpy.errstate(divide="ignore", invalid="ignore"):
        row_scale = numpy.where(rows > 0, numpy.minimum(1.0, d_L / rows), 1.0)
    X = X * row_scale[:, None]
    cols = X.sum(axis=0)
    with numpy.errstate(divide="ignore", invalid="ignore"):
        col_scale = numpy.where(cols > 0, numpy.minimum(1.0, d_R / cols), 1.0)
    X = X * col_scale[None, :]

    err_L = numpy.maximum(d_L - X.sum(axis=1), 0.0)
    err_R = numpy.maximum(d_R - X.sum(axis=0), 0.0)
    residual = err_L.sum()
    if residual > 0:
        X = X + numpy.outer(err_L, err_R) / residual
    return X


def pad_demands(d: numpy.ndarray, floor: float) -> numpy.ndarray:
    """
    Floors d at floor and renormalizes.
    """
    d = numpy.asarray(d, dtype=float)
    if not 0 < floor < 1.0 / (2 * d.shape[0]):
        raise numkit.InstanceError("demand floor {} outside (0, 1/(2*{}))".format(floor, d.shape[0]))
    padded = numpy.maximum(d, floor)
    return padded / padded.sum()


def default_demand_floor(m: int) -> float:
    return max(float(m) ** -20, DEMAND_FLOOR_MIN)


def reduction_scale(inst: OTInstance, entropy_l1_const: float = ENTROPY_L1_CONST) -> float:
    """
    C = 2 (||c||_inf + kappa mu log m), the penalty weight on marginal
    violations that makes the penalized problem exact.
    """
    return 2.0 * (inst.cost_inf_norm() + entropy_l1_const * inst.mu * utils.safe_log_dim(inst.m))


@dataclasses.dataclass(frozen=True, eq=False)
class OTEmbedding:
    """
    Maps simplex coordinates of a reduced game back to transport plan entries.
    """
    rows: numpy.ndarray
    cols: numpy.ndarray
    shape: typing.Tuple[int, int]
    penalty: float

    def to_plan(self, x: numpy.ndarray) -> numpy.ndarray:
        X = numpy.zeros(self.shape)
        X[self.rows, self.cols] = x
        return X

    def to_vector(self, X: numpy.ndarray) -> numpy.ndarray:
        return numpy.asarray(X)[self.rows, self.cols]


def reduce_to_bsgame(inst: OTInstance, entropy_l1_const: float = ENTROPY_L1_CONST) \
        -> typing.Tuple[bsgame.RegGame, OTEmbedding]:
    """
    Writes the transport problem, with marginals enforced by an l1 penalty of
    weight C, as a box-simplex game over the plan entries:
    A = 1/4 [B, -B], b = 1/4 (d, -d), costs c / (4C), entropy mu / (4C),
    quadratic strength left unset.
    """
    support = inst.support if inst.support is not None else numpy.ones(inst.shape, dtype=bool)
    rows, cols = numpy.nonzero(support)
    n_left, n_right = inst.shape
    B = numkit.incidence_matrix(list(zip(rows.tolist(), cols.tolist())), n_left, n_right)
    A = numkit.SparseMatrix.from_csr(scipy.sparse.hstack([B.csr, -B.csr]).tocsr() * 0.25)
    d = numpy.concatenate([inst.d_L, inst.d_R])
    b = 0.25 * numpy.concatenate([d, -d])
    penalty = reduction_scale(inst, entropy_l1_const)
    c = inst.cost[rows, cols] / (4.0 * penalty)
    game = bsgame.RegGame.create(A, b, c, inst.mu / (4.0 * penalty))
    logger.debug("reduced %sx%s transport instance to a %sx%s game (C=%s)", n_left, n_right, game.m, game.n, penalty)
    return game, OTEmbedding(rows, cols, inst.shape, penalty)


def penalized_objective(inst: OTInstance, X: numpy.ndarray, penalty: float) -> float:
    """
    <C, X> + mu H(X) + penalty (||X 1 - d_L||_1 + ||X^T 1 - d_R||_1).
    """
    return float(numpy.sum(inst.cost * X) + inst.mu * numkit.entropy(X.reshape(-1))
                 + penalty * marginal_violation(X, inst.d_L, inst.d_R))


def _trivial_plan(inst: OTInstance, method: str) -> typing.Optional[TransportPlan]:
    if inst.shape == (1, 1):
        return TransportPlan(numpy.ones((1, 1)), numpy.zeros(1), numpy.array([inst.cost[0, 0] / inst.mu]), 0, True,
                             method)
    return None


def solve_via_bsgame(inst: OTInstance, epsilon: float, mode: str = bsgame.PRACTICAL,
                     entropy_l1_const: float = ENTROPY_L1_CONST, **solve_args: typing.Any) -> TransportPlan:
    """
    Solves the reduced game to accuracy epsilon / (8C) and rounds the plan
    onto the demands.
    """
    if not epsilon > 0:
        raise numkit.InstanceError("epsilon must be positive, got {}".format(epsilon))
    if mode == bsgame.THEORY and inst.mu < 36.0 * epsilon:
        raise bsgame.ParameterError("theory mode needs mu >= 36 epsilon, got mu={} epsilon={}".format(
            inst.mu, epsilon))
    trivial = _trivial_plan(inst, ACCEL)
    if trivial is not None:
        return trivial

    game, embedding = reduce_to_bsgame(inst, entropy_l1_const)
    x, report = bsgame.solve_half_regularized(game, epsilon / (8.0 * embedding.penalty), mode, **solve_args)
    X = ot_round(embedding.to_plan(x), inst.d_L, inst.d_R)
    return TransportPlan(X, None, None, report.outer_iterations, report.certified, ACCEL, report)


def unaccel_tolerance(inst: OTInstance, epsilon: float, entropy_l1_const: float = ENTROPY_L1_CONST) -> float:
    """
    The marginal tolerance epsilon / (10 ||c||_inf + 10 kappa mu log m).
    """
    return epsilon / (10.0 * inst.cost_inf_norm() + 10.0 * entropy_l1_const * inst.mu * utils.safe_log_dim(inst.m))


def solve_unaccel(inst: OTInstance, epsilon: float, mode: str = bsgame.PRACTICAL,
                  floor: typing.Optional[float] = None, entropy_l1_const: float = ENTROPY_L1_CONST,
                  max_iters: int = DEFAULT_MAX_ITERS) -> TransportPlan:
    """
    Pads the demands, runs Sinkhorn iteration to the marginal tolerance and
    rounds back onto the original demands.
    """
    if not epsilon > 0:
        raise numkit.InstanceError("epsilon must be positive, got {}".format(epsilon))
    if mode == bsgame.THEORY and not epsilon <= inst.mu <= inst.cost_inf_norm():
        raise bsgame.ParameterError("theory mode needs epsilon <= mu <= ||c||_inf")
    trivial = _trivial_plan(inst, UNACCEL)
    if trivial is not None:
        return trivial

    floor = default_demand_floor(inst.m) if floor is None else floor
    padded = inst.with_demands(pad_demands(inst.d_L, floor), pad_demands(inst.d_R, floor))
    tolerance = unaccel_tolerance(inst, epsilon, entropy_l1_const)
    plan = sinkhorn_iterate(padded, tolerance, max_iters)
    plan.X = ot_round(plan.X, inst.d_L, inst.d_R)
    return plan


def solve_scaling(inst: OTInstance, epsilon: float, floor: typing.Optional[float] = None,
                  max_iters: int = DEFAULT_MAX_ITERS) -> TransportPlan:
    """
    The high-accuracy scaling route: padded demands, a scaling accurate to
    epsilon^2 / (8 ||c||_inf^2 m), then rounding. Scalings are found by
    Sinkhorn iteration.
    """
    if not epsilon > 0:
        raise numkit.InstanceError("epsilon must be positive, got {}".format(epsilon))
    trivial = _trivial_plan(inst, SCALING)
    if trivial is not None:
        return trivial

    floor = default_demand_floor(inst.m) if floor is None else floor
    padded = inst.with_demands(pad_demands(inst.d_L, floor), pad_demands(inst.d_R, floor))
    tolerance = epsilon ** 2 / (8.0 * max(inst.cost_inf_norm(), 1.0) ** 2 * inst.m)
    plan = sinkhorn_iterate(padded, tolerance, max_iters)
    plan.X = ot_round(plan.X, inst.d_L, inst.d_R)
    plan.method = SCALING
    return plan
