# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
High-accuracy solver for regularized box-simplex games

    min_{x in simplex} max_{y in [0,1]^n}
        y^T A^T x + c^T x - b^T y + mu H(x) - (eps/2) (y^2)^T |A|^T x

using strongly monotone mirror prox under the joint regularizer

    r(x, y) = rho sum_i x_i log x_i + (1/rho) x^T |A| y^2,

whose proximal steps are solved by alternating minimization, with simplex
padding between outer iterations and a closed form certified duality gap as
the stopping rule.

Two modes exist. "theory" runs with the worst-case constants and checks
their preconditions. "practical" (the default) floors rho so that r stays
jointly convex, adapts the step weight alpha to the observed relative
Lipschitz constant, and stops altmin early once its iterates stop moving.
On games with few box coordinates it also polishes the best point with
projected Newton steps on the dual, accepting them only through the same
certified gap.
"""

from __future__ import annotations
import dataclasses
import logging
import math
import typing

import numpy
import scipy.sparse

from . import numkit
from . import utils
from .numkit import spmv

logging.basicConfig()
logger = logging.getLogger(__name__)
logger.setLevel(utils.log_level())


THEORY = "theory"
PRACTICAL = "practical"
MODES = (THEORY, PRACTICAL)

CERTIFIED = "certified"
UNCERTIFIED = "uncertified"

STABILITY_BAND = 1.0 / 9.0
PRACTICAL_RHO_FLOOR = 3.0
ALPHA_SHRINK = 0.7
DEFAULT_DELTA_COL = 1e-8
DEFAULT_INNER_TOL = 1e-13
POLISH_AFTER = 20
POLISH_MAX_DIM = 1024
POLISH_STEPS = 100
POLISH_FLOOR = 1e-200


class ParameterError(Exception):
    pass


Direction = typing.Tuple[numpy.ndarray, numpy.ndarray]


@dataclasses.dataclass(frozen=True, eq=False)
class RegGame:
    """
    An immutable regularized box-simplex game. Build it with create(), which
    enforces the column floor and rescales so that ||A||_inf <= 1.

    eps_reg may be None for games that are only regularized on the simplex
    side; solve_half_regularized() fills it in.
    """
    A: numkit.SparseMatrix
    b: numpy.ndarray
    c: numpy.ndarray
    mu: float
    eps_reg: typing.Optional[float]
    B_max: float
    C_max: float
    delta_col: float
    scale: float = 1.0

    @property
    def m(self) -> int:
        return self.A.rows

    @property
    def n(self) -> int:
        return self.A.cols

    @classmethod
    def create(cls, A: typing.Union[numkit.SparseMatrix, typing.Any], b: typing.Iterable[float],
               c: typing.Iterable[float], mu: float, eps_reg: typing.Optional[float] = None,
               delta_col: typing.Optional[float] = None, sigma: typing.Optional[float] = None) -> RegGame:
        if not isinstance(A, numkit.SparseMatrix):
            A = numkit.SparseMatrix.from_dense(A)
        m, n = A.shape
        if m == 0:
            raise numkit.InstanceError("game needs at least one simplex coordinate")
        b_vec = numkit.as_vector(b, n, "b")
        c_vec = numkit.as_vector(c, m, "c")
        if not mu > 0:
            raise numkit.InstanceError("mu must be positive, got {}".format(mu))
        if eps_reg is not None and not eps_reg > 0:
            raise numkit.InstanceError("eps_reg must be positive, got {}".format(eps_reg))
        if delta_col is None:
            delta_col = DEFAULT_DELTA_COL if sigma is None else min(DEFAULT_DELTA_COL, sigma / (8 * max(n, 1)))

        A = _pad_columns(A, delta_col)
        scale = max(1.0, A.inf_norm())
        if scale > 1.0:
            logger.info("rescaling game by ||A||_inf = %s", scale)
            A = A.scaled(1.0 / scale)
            b_vec = b_vec / scale
            c_vec = c_vec / scale
            mu = mu / scale
            delta_col = delta_col / scale

        C_max = max(1.0, float(numpy.abs(c_vec).max()))
        B_max = max(C_max, float(numpy.abs(b_vec).max()) if n else 0.0)
        b_vec.setflags(write=False)
        c_vec.setflags(write=False)
        return cls(A, b_vec, c_vec, float(mu), None if eps_reg is None else float(eps_reg),
                   B_max, C_max, float(delta_col), scale)

    def with_eps_reg(self, eps_reg: float) -> RegGame:
        if not eps_reg > 0:
            raise numkit.InstanceError("eps_reg must be positive, got {}".format(eps_reg))
        return dataclasses.replace(self, eps_reg=float(eps_reg))

    def require_eps(self) -> float:
        if self.eps_reg is None:
            raise ParameterError("the quadratic strength eps_reg is unset; use solve_half_regularized() "
                                 "or RegGame.with_eps_reg()")
        return self.eps_reg

    def default_rho(self) -> float:
        return math.sqrt(2.0 * self.mu / self.require_eps())


def _pad_columns(A: numkit.SparseMatrix, delta_col: float) -> numkit.SparseMatrix:
    deficient = numpy.flatnonzero(A.col_abs_max() < delta_col)
    if deficient.size == 0:
        return A

    # Empty columns get their entry on the row of largest |A| mass; others
    # on their own largest-magnitude entry.
    heaviest = int(numpy.argmax(A.row_abs_sums()))
    csc = A.csr.tocsc()
    updates = {}
    for j in deficient:
        start, end = csc.indptr[j], csc.indptr[j + 1]
        if end > start and numpy.abs(csc.data[start:end]).max() > 0:
            at = start + int(numpy.argmax(numpy.abs(csc.data[start:end])))
            r, current = int(csc.indices[at]), float(csc.data[at])
        else:
            r, current = heaviest, 0.0
        updates[(r, int(j))] = current + (delta_col if current >= 0 else -delta_col)
    logger.debug("padded %s columns below the floor %s", deficient.size, delta_col)
    return A.with_entries(updates)


@dataclasses.dataclass(frozen=True, eq=False)
class PDPoint:
    x: numpy.ndarray
    y: numpy.ndarray

    @classmethod
    def initial(cls, game: RegGame) -> PDPoint:
        return cls(numkit.uniform_simplex(game.m), numpy.zeros(game.n))

    def check(self, game: RegGame):
        if self.x.shape != (game.m,) or self.y.shape != (game.n,):
            raise numkit.InstanceError("point of shape ({}, {}) does not fit a {}x{} game".format(
                self.x.shape, self.y.shape, game.m, game.n))
        _require_positive(self.x)


def _require_positive(x: numpy.ndarray):
    if numpy.any(x <= 0):
        raise numkit.InstanceError("x has a zero entry; pad it first")


def objective(game: RegGame, z: PDPoint) -> float:
    """
    f(x, y) of the regularized game.
    """
    eps = game.require_eps()
    At_x = spmv(game.A, z.x, transpose=True)
    absAt_x = spmv(game.A, z.x, transpose=True, absolute=True)
    return float(z.y @ At_x + game.c @ z.x - game.b @ z.y + game.mu * numkit.entropy(z.x)
                 - 0.5 * eps * (z.y ** 2) @ absAt_x)


def grad_operator(game: RegGame, z: PDPoint) -> Direction:
    """
    The monotone operator (grad_x f, -grad_y f).
    """
    eps = game.require_eps()
    _require_positive(z.x)
    g_x = (spmv(game.A, z.y) + game.c + game.mu * (1.0 + numpy.log(z.x))
           - 0.5 * eps * spmv(game.A, z.y ** 2, absolute=True))
    g_y = -spmv(game.A, z.x, transpose=True) + game.b + eps * z.y * spmv(game.A, z.x, transpose=True,
                                                                         absolute=True)
    return g_x, g_y


def regularizer_value(game: RegGame, z: PDPoint, rho: typing.Optional[float] = None) -> float:
    rho = game.default_rho() if rho is None else rho
    return float(rho * numkit.entropy(z.x) + (z.x @ spmv(game.A, z.y ** 2, absolute=True)) / rho)


def regularizer_grad(game: RegGame, z: PDPoint, rho: typing.Optional[float] = None) -> Direction:
    rho = game.default_rho() if rho is None else rho
    _require_positive(z.x)
    r_x = rho * (1.0 + numpy.log(z.x)) + spmv(game.A, z.y ** 2, absolute=True) / rho
    r_y = (2.0 / rho) * z.y * spmv(game.A, z.x, transpose=True, absolute=True)
    return r_x, r_y


def breg_div(game: RegGame, z_from: PDPoint, z_to: PDPoint, rho: typing.Optional[float] = None) -> float:
    """
    V_{z_from}(z_to) for the joint regularizer.
    """
    rho = game.default_rho() if rho is None else rho
    _require_positive(z_from.x)
    entropic = numkit.kl_div(z_to.x, z_from.x)
    quadratic = (z_to.x @ spmv(game.A, z_to.y ** 2 - z_from.y ** 2, absolute=True)
                 - 2.0 * spmv(game.A, z_from.x, transpose=True, absolute=True) @ (z_from.y * (z_to.y - z_from.y)))
    return float(rho * entropic + quadratic / rho)


def hessian_form(game: RegGame, z: PDPoint, w: Direction, rho: typing.Optional[float] = None) -> float:
    """
    w^T (Hessian of r at z) w.
    """
    rho = game.default_rho() if rho is None else rho
    _require_positive(z.x)
    w_x, w_y = w
    absAt_x = spmv(game.A, z.x, transpose=True, absolute=True)
    return float(rho * numpy.sum(w_x ** 2 / z.x)
                 + (4.0 / rho) * (w_x @ spmv(game.A, z.y * w_y, absolute=True))
                 + (2.0 / rho) * (absAt_x @ w_y ** 2))


def diag_form(game: RegGame, x: numpy.ndarray, w: Direction, rho: typing.Optional[float] = None) -> float:
    """
    w^T D(x) w for the block diagonal D(x) = ((rho/2) diag(1/x), (1/rho) diag(|A|^T x)).
    """
    rho = game.default_rho() if rho is None else rho
    _require_positive(x)
    w_x, w_y = w
    return float(0.5 * rho * numpy.sum(w_x ** 2 / x)
                 + (spmv(game.A, x, transpose=True, absolute=True) @ w_y ** 2) / rho)


def best_response_y(game: RegGame, x: numpy.ndarray) -> numkit.BoxVector:
    """
    The exact maximizer over the box of f(x, .), coordinate by coordinate.
    """
    eps = game.require_eps()
    denominator = eps * spmv(game.A, x, transpose=True, absolute=True)
    if numpy.any(denominator <= 0):
        raise numkit.InstanceError("zero column mass in |A|^T x; the column floor is violated")
    numerator = spmv(game.A, x, transpose=True) - game.b
    return numkit.BoxVector(numpy.clip(numerator / denominator, 0.0, 1.0))


def primal_value(game: RegGame, x: numpy.ndarray) -> float:
    """
    f^x(x) = max_y f(x, y).
    """
    return objective(game, PDPoint(x, best_response_y(game, x)))


def dual_value(game: RegGame, y: numpy.ndarray) -> float:
    """
    L(y) = min_x f(x, y), which is a softmin in closed form.
    """
    eps = game.require_eps()
    v = spmv(game.A, y) + game.c - 0.5 * eps * spmv(game.A, y ** 2, absolute=True)
    return numkit.softmin(v, game.mu) - float(game.b @ y)


def half_primal_value(game: RegGame, x: numpy.ndarray) -> float:
    """
    max_y of the game with the quadratic term dropped,
    sum_j (A^T x - b)_j^+ + c^T x + mu H(x).
    """
    excess = numpy.maximum(spmv(game.A, x, transpose=True) - game.b, 0.0)
    return float(excess.sum() + game.c @ x + game.mu * numkit.entropy(x))


def certified_gap(game: RegGame, z: PDPoint) -> float:
    """
    f^x(x) - L(y), an upper bound on the suboptimality of x.
    """
    return primal_value(game, z.x) - dual_value(game, z.y)


@dataclasses.dataclass(frozen=True)
class SolverParams:
    mode: str
    rho: float
    nu: float
    alpha: float
    alpha_start: float
    delta: float
    T: int
    K: int
    gap_tol: float
    c_T: float
    c_K: float
    theta_range: float
    delta_floored: bool
    rho_floored: bool
    inner_tol: float

    @classmethod
    def for_game(cls, game: RegGame, sigma: float, mode: str = PRACTICAL, c_T: float = 4.0, c_K: float = 4.0,
                 inner_tol: float = DEFAULT_INNER_TOL) -> SolverParams:
        """
        Derives the step weights, padding floor and iteration caps for a
        solve of game to accuracy sigma (in the game's original units).
        """
        if mode not in MODES:
            raise ParameterError("unknown mode {}, expected one of {}".format(mode, ", ".join(MODES)))
        if not sigma > 0:
            raise ParameterError("sigma must be positive, got {}".format(sigma))
        if c_T <= 0 or c_K <= 0:
            raise ParameterError("c_T and c_K must be positive")
        eps = game.require_eps()
        mu = game.mu
        m, n = game.m, game.n
        sigma_scaled = sigma / game.scale
        rho_exact = math.sqrt(2.0 * mu / eps)

        if mode == THEORY:
            if not (72.0 * eps <= mu <= 1.0):
                raise ParameterError("theory mode needs 72 eps <= mu <= 1, got mu={} eps={}".format(mu, eps))
            if rho_exact < 6.0:
                raise ParameterError("theory mode needs rho >= 6, got {}".format(rho_exact))
            if m > 1 and not (float(m) ** -10 < sigma_scaled < 1.0):
                raise ParameterError("theory mode needs sigma in (m^-10, 1), got {}".format(sigma_scaled))
            rho = rho_exact
        else:
            if mu < 72.0 * eps:
                logger.info("practical mode: mu=%s is below 72 eps=%s", mu, 72.0 * eps)
            rho = max(rho_exact, PRACTICAL_RHO_FLOOR)

        nu = 0.5 * min(mu / rho, eps * rho / 2.0)
        delta_exact = eps * sigma_scaled ** 2 / m ** 2
        delta = min(max(delta_exact, 1e-300 * m), 0.5 / m)
        alpha = 18.0 * game.C_max + 32.0 * math.sqrt(mu * eps / 2.0) * math.log(4.0 / delta)
        alpha_start = alpha if mode == THEORY else min(alpha, 4.0 + 32.0 * math.sqrt(mu * eps / 2.0))

        log_m = math.log(m) if m > 1 else 0.0
        T = math.ceil(c_T * math.log(max(math.e, m * max(n, 1) * game.B_max * alpha * rho / (delta * sigma_scaled))))
        K = math.ceil(c_K * (alpha / nu) * math.log(max(math.e, nu * log_m / sigma_scaled)))
        return cls(mode=mode, rho=rho, nu=nu, alpha=alpha, alpha_start=alpha_start, delta=delta, T=max(T, 1),
                   K=max(K, 1), gap_tol=sigma_scaled, c_T=c_T, c_K=c_K, theta_range=rho * log_m,
                   delta_floored=delta != delta_exact, rho_floored=rho != rho_exact, inner_tol=inner_tol)


@dataclasses.dataclass(frozen=True)
class TraceRecord:
    iteration: int
    gap: float
    min_entry: float
    padded: bool
    alpha: float


@dataclasses.dataclass
class SolveReport:
    status: str
    outer_iterations: int
    inner_iterations_total: int
    final_gap: float
    l1_bound: float
    trace: typing.List[TraceRecord]
    params: typing.Optional[SolverParams]
    scale: float
    max_stability_excursion: float
    alpha_doublings: int
    polish_steps: int
    elapsed_ns: typing.Optional[int]
    point: PDPoint = dataclasses.field(repr=False)

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED


@dataclasses.dataclass(frozen=True)
class IterationInfo:
    """
    Passed to solve()'s on_iteration callback after every accepted outer step.
    """
    k: int
    z_prev: PDPoint
    z_half: PDPoint
    z_bar: PDPoint
    z: PDPoint
    alpha: float
    nu: float
    rho: float


class _StabilityTracker:
    """
    Records how far inner x-iterates stray (in log space) from the reference
    point of their half step.
    """

    def __init__(self, mode: str):
        self._mode = mode
        self._warned = False
        self.max_excursion = 0.0

    def observer(self, reference: numpy.ndarray) -> typing.Callable[[numpy.ndarray], None]:
        def observe(log_x: numpy.ndarray):
            excursion = float(numpy.max(numpy.abs(log_x - reference)))
            self.max_excursion = max(self.max_excursion, excursion)
            if excursion <= STABILITY_BAND + 1e-9:
                return
            if self._mode == THEORY:
                assert False, "inner iterate left the stability band: {} > 1/9".format(excursion)
            if not self._warned:
                logger.warning("inner iterate left the stability band (%s > 1/9)", excursion)
                self._warned = True
        return observe


def _altmin(game: RegGame, gamma_x: numpy.ndarray, gamma_y: numpy.ndarray, theta: float, z0: PDPoint, T: int,
            rho: float, inner_tol: float = 0.0,
            observe: typing.Optional[typing.Callable[[numpy.ndarray], None]] = None) -> typing.Tuple[PDPoint, int]:
    y = numpy.asarray(z0.y, dtype=float)
    y_prev = None
    log_x_prev = None
    x = z0.x
    t = 0
    for t in range(T + 1):
        logits = -gamma_x / (theta * rho) - spmv(game.A, y ** 2, absolute=True) / rho ** 2
        x, log_x = numkit.normalized_exp(logits)
        if observe is not None:
            observe(log_x)
        if t == T:
            break
        if (log_x_prev is not None and y_prev is not None and inner_tol > 0
                and numpy.max(numpy.abs(log_x - log_x_prev)) <= inner_tol
                and numpy.max(numpy.abs(y - y_prev), initial=0.0) <= inner_tol):
            break
        mass = spmv(game.A, x, transpose=True, absolute=True)
        if numpy.any(mass <= 0):
            raise numkit.InstanceError("zero column mass in |A|^T x during alternating minimization")
        y_prev = y
        y = numpy.clip(-(rho / (2.0 * theta)) * gamma_y / mass, 0.0, 1.0)
        log_x_prev = log_x
    return PDPoint(x, y), t + 1


def altmin_bs(game: RegGame, gamma_x: numpy.ndarray, gamma_y: numpy.ndarray, theta: float, z0: PDPoint, T: int,
              rho: typing.Optional[float] = None, inner_tol: float = 0.0) -> PDPoint:
    """
    Approximately minimizes <gamma, z> + theta r(z) over simplex x box by
    T rounds of exact block minimization, returning (x^(T+1), y^(T)).
    """
    if not theta > 0:
        raise numkit.InstanceError("theta must be positive, got {}".format(theta))
    z0.check(game)
    rho = game.default_rho() if rho is None else rho
    point, _ = _altmin(game, numpy.asarray(gamma_x, dtype=float), numpy.asarray(gamma_y, dtype=float), theta, z0,
                       T, rho, inner_tol)
    return point


def pad_simplex(x: numpy.ndarray, delta: float) -> numkit.SimplexVector:
    """
    Floors x at delta and renormalizes.
    """
    x = numpy.asarray(x, dtype=float)
    if not 0 < delta < 1.0 / x.shape[0]:
        raise numkit.InstanceError("padding floor {} outside (0, 1/{})".format(delta, x.shape[0]))
    padded = numpy.maximum(x, delta)
    return numkit.SimplexVector(padded / padded.sum())


def _inner(u: Direction, v: Direction) -> float:
    return float(u[0] @ v[0] + u[1] @ v[1])


def _diff(u: PDPoint, v: PDPoint) -> Direction:
    return u.x - v.x, u.y - v.y


def _relative_lipschitz_holds(game: RegGame, alpha: float, rho: float, z: PDPoint, z_half: PDPoint, z_bar: PDPoint,
                              g_prev: Direction, g_half: Direction) -> bool:
    lhs = _inner((g_half[0] - g_prev[0], g_half[1] - g_prev[1]), _diff(z_half, z_bar))
    rhs = alpha * (breg_div(game, z, z_half, rho) + breg_div(game, z_half, z_bar, rho))
    return lhs <= rhs + 1e-12 * (1.0 + abs(rhs))


def _dual_value_and_weights(game: RegGame, y: numpy.ndarray) -> typing.Tuple[float, numpy.ndarray]:
    eps = game.require_eps()
    v = spmv(game.A, y) + game.c - 0.5 * eps * spmv(game.A, y ** 2, absolute=True)
    return numkit.softmin(v, game.mu) - float(game.b @ y), numkit.softmin_weights(v, game.mu)


def dual_polish(game: RegGame, y0: numpy.ndarray, tol: float, max_steps: int = POLISH_STEPS) \
        -> typing.Tuple[PDPoint, float, int]:
    """
    Projected Newton ascent on the concave dual L(y), started from y0, with x
    read off as the softmin distribution of the current y. Coordinates held
    at a face of the box by their gradient are pinned for the step.

    Returns the point of smallest certified gap, that gap and the number of
    Newton steps taken. Stops as soon as the gap is at most tol.
    """
    eps = game.require_eps()
    A = game.A.csr
    abs_A = abs(A).tocsr()
    y = numpy.clip(numpy.asarray(y0, dtype=float), 0.0, 1.0)
    value, p = _dual_value_and_weights(game, y)
    best_z, best_gap = None, math.inf
    steps = 0
    while True:
        x = numpy.maximum(p, POLISH_FLOOR)
        z = PDPoint(x / x.sum(), y)
        gap = certified_gap(game, z)
        if gap < best_gap:
            best_z, best_gap = z, gap
        if gap <= tol or steps >= max_steps:
            break

        J = A - abs_A @ scipy.sparse.diags(eps * y)
        Jt_p = J.T @ p
        grad = Jt_p - game.b
        weighted = (J.T @ scipy.sparse.diags(p) @ J).toarray()
        curvature = (weighted - numpy.outer(Jt_p, Jt_p)) / game.mu + numpy.diag(eps * (abs_A.T @ p))

        pinned = ((y <= 0.0) & (grad < 0.0)) | ((y >= 1.0) & (grad > 0.0))
        free = numpy.flatnonzero(~pinned)
        direction = numpy.zeros(game.n)
        if free.size:
            direction[free] = numpy.linalg.lstsq(curvature[numpy.ix_(free, free)], grad[free], rcond=None)[0]

        step = 1.0
        slack = 1e-15 * (1.0 + abs(value))
        while step > 1e-12:
            candidate = numpy.clip(y + step * direction, 0.0, 1.0)
            candidate_value, candidate_p = _dual_value_and_weights(game, candidate)
            if candidate_value >= value + 1e-4 * grad @ (candidate - y) - slack:
                break
            step *= 0.5
        else:
            logger.debug("dual polish line search stalled at gap %s", gap * game.scale)
            break
        y, value, p = candidate, candidate_value, candidate_p
        steps += 1

    assert best_z is not None
    return best_z, best_gap, steps


def solve(game: RegGame, sigma: float, mode: str = PRACTICAL, c_T: float = 4.0, c_K: float = 4.0,
          z0: typing.Optional[PDPoint] = None, max_outer: typing.Optional[int] = None,
          inner_tol: float = DEFAULT_INNER_TOL,
          on_iteration: typing.Optional[typing.Callable[[IterationInfo], None]] = None,
          timestamps: bool = True, polish: bool = True) -> typing.Tuple[numkit.SimplexVector, SolveReport]:
    """
    Solves game to certified accuracy sigma (original units).

    Each outer iteration takes a gradient half step with weight alpha and an
    extragradient step with weights alpha and nu, both by alternating
    minimization, then pads x at the floor delta. The loop stops once the
    certified gap reaches sigma or after K iterations (max_outer overrides
    K). In the latter case the best iterate seen is returned and the report
    is marked uncertified.

    In practical mode with polish set, a game with at most POLISH_MAX_DIM
    box coordinates gets a dual_polish() from the best point so far every
    POLISH_AFTER outer iterations while it is uncertified. A polished point
    is kept only if its certified gap is smaller, and the outer loop resumes
    when it does not certify.
    """
    stopwatch = utils.Stopwatch(timestamps)
    params = SolverParams.for_game(game, sigma, mode, c_T, c_K, inner_tol)
    tracker = _StabilityTracker(mode)

    if game.m == 1:
        x = numkit.SimplexVector(numpy.ones(1))
        z = PDPoint(x, best_response_y(game, x))
        gap = max(certified_gap(game, z), 0.0)
        return x, _make_report(game, params, z, gap, [], 0, 0, tracker, 0, stopwatch)

    if z0 is None:
        z = PDPoint.initial(game)
    else:
        z = PDPoint(pad_simplex(z0.x, params.delta), numkit.as_box(z0.y, game.n))
        z.check(game)

    rho, nu, T = params.rho, params.nu, params.T
    cap = params.K if max_outer is None else max_outer
    gap = certified_gap(game, z)
    best_gap, best_z = gap, z
    trace: typing.List[TraceRecord] = []
    alpha = params.alpha_start
    k = 0
    inner_total = 0
    doublings = 0
    polish_steps = 0
    next_polish = POLISH_AFTER if polish and mode == PRACTICAL and game.n <= POLISH_MAX_DIM else None
    next_alpha: typing.Optional[float] = None

    while gap > params.gap_tol and k < cap:
        if next_polish is not None and k >= next_polish:
            next_polish = k + POLISH_AFTER
            polished, polished_gap, steps = dual_polish(game, best_z.y, params.gap_tol)
            polish_steps += steps
            logger.debug("dual polish: %s Newton steps, gap %s", steps, polished_gap * game.scale)
            if polished_gap < best_gap:
                best_gap, best_z = polished_gap, polished
            if polished_gap <= params.gap_tol:
                break
            continue

        g_prev = grad_operator(game, z)
        r_prev = regularizer_grad(game, z, rho)
        log_x_prev = numpy.log(z.x)

        z_half, steps = _altmin(game, g_prev[0] - alpha * r_prev[0], g_prev[1] - alpha * r_prev[1], alpha, z, T,
                                rho, params.inner_tol, tracker.observer(log_x_prev))
        inner_total += steps

        g_half = grad_operator(game, z_half)
        r_half = regularizer_grad(game, z_half, rho)
        reference = (alpha * log_x_prev + nu * numpy.log(z_half.x)) / (alpha + nu)
        z_bar, steps = _altmin(game, g_half[0] - alpha * r_prev[0] - nu * r_half[0],
                               g_half[1] - alpha * r_prev[1] - nu * r_half[1], alpha + nu, z_half, T, rho,
                               params.inner_tol, tracker.observer(reference))
        inner_total += steps

        if mode == PRACTICAL:
            if not _relative_lipschitz_holds(game, alpha, rho, z, z_half, z_bar, g_prev, g_half):
                if alpha < params.alpha:
                    alpha = min(2.0 * alpha, params.alpha)
                    doublings += 1
                    logger.debug("relative Lipschitz check failed, retrying with alpha=%s", alpha)
                    continue
            else:
                next_alpha = max(ALPHA_SHRINK * alpha, nu)

        padded = bool(numpy.any(z_bar.x < params.delta))
        z_prev = z
        z = PDPoint(pad_simplex(z_bar.x, params.delta), z_bar.y)
        k += 1
        gap = certified_gap(game, z)
        trace.append(TraceRecord(k, gap * game.scale, float(z.x.min()), padded, alpha))
        logger.debug("iteration %s gap %s alpha %s", k, gap * game.scale, alpha)
        if on_iteration is not None:
            on_iteration(IterationInfo(k, z_prev, z_half, z_bar, z, alpha, nu, rho))
        if gap < best_gap:
            best_gap, best_z = gap, z
        if next_alpha is not None:
            alpha, next_alpha = next_alpha, None

    report = _make_report(game, params, best_z, max(best_gap, 0.0), trace, k, inner_total, tracker, doublings,
                          stopwatch, polish_steps)
    if report.certified:
        logger.info("solve certified after %s outer iterations (gap %s)", k, report.final_gap)
    else:
        logger.warning("solve stopped uncertified after %s outer iterations (best gap %s, target %s)",
                       k, report.final_gap, sigma)
    return numkit.SimplexVector(best_z.x), report


def _make_report(game: RegGame, params: SolverParams, z: PDPoint, gap: float, trace: typing.List[TraceRecord],
                 outer: int, inner: int, tracker: _StabilityTracker, doublings: int,
                 stopwatch: utils.Stopwatch, polish_steps: int = 0) -> SolveReport:
    status = CERTIFIED if gap <= params.gap_tol else UNCERTIFIED
    return SolveReport(status=status, outer_iterations=outer, inner_iterations_total=inner,
                       final_gap=gap * game.scale, l1_bound=math.sqrt(2.0 * gap / game.mu), trace=trace,
                       params=params, scale=game.scale, max_stability_excursion=tracker.max_excursion,
                       alpha_doublings=doublings, polish_steps=polish_steps, elapsed_ns=stopwatch.elapsed_ns(),
                       point=z)


def truncate_costs(game: RegGame, tau: float) -> typing.Tuple[RegGame, numpy.ndarray]:
    """
    Drops the simplex coordinates whose cost is at least min(c) + tau,
    keeping every coordinate that attains the minimum. Returns the restricted
    game and the surviving coordinate indices.
    """
    if tau < 0:
        raise numkit.InstanceError("tau must be nonnegative, got {}".format(tau))
    c_min = game.c.min()
    keep = numpy.flatnonzero((game.c - c_min < tau) | (game.c == c_min))
    restricted = RegGame.create(game.A.select_rows(keep), game.b, game.c[keep], game.mu, game.eps_reg,
                                delta_col=game.delta_col)
    logger.debug("cost truncation at tau=%s keeps %s of %s coordinates", tau, keep.size, game.m)
    return dataclasses.replace(restricted, scale=game.scale * restricted.scale), keep


def embed_truncated(x: numpy.ndarray, index_map: numpy.ndarray, m: int) -> numpy.ndarray:
    """
    Re-embeds a solution of a truncated game, with zeros on dropped coordinates.
    """
    full = numpy.zeros(m)
    full[index_map] = x
    return full


def solve_half_regularized(game: RegGame, epsilon: float, mode: str = PRACTICAL,
                           **solve_args: typing.Any) -> typing.Tuple[numkit.SimplexVector, SolveReport]:
    """
    Solves the game without the quadratic term to accuracy epsilon by adding
    the quadratic term with strength epsilon and solving that to epsilon/2.
    """
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive, got {}".format(epsilon))
    if game.eps_reg is not None:
        logger.warning("overriding eps_reg=%s with the half-regularized strength", game.eps_reg)
    regularized = game.with_eps_reg(epsilon / game.scale)
    return solve(regularized, epsilon / 2.0, mode, **solve_args)
