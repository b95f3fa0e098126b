# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
Maintains a fractional approximate maximum matching of a bipartite graph
under adversarial edge deletions.

Each phase fixes a greedy estimate M of the matching size and solves a
regularized matching objective (box-simplex game or Sinkhorn distance form)
over the alive edges, rounding the solution to a feasible fractional
matching 8M x~ (or 2|R| x~). Deletions only drop weight; the objective is
re-solved once the deleted weight exceeds an eps/8 fraction, and the phase
restarts once the greedy matching falls to a quarter of M.
"""

from __future__ import annotations
import dataclasses
import logging
import typing

import networkx
import networkx.algorithms.bipartite
import numpy
import scipy.sparse

from . import bsgame
from . import numkit
from . import oracle
from . import sinkhorn
from . import utils

logging.basicConfig()
logger = logging.getLogger(__name__)
logger.setLevel(utils.log_level())


BOX_SIMPLEX = "box-simplex"
SINKHORN = "sinkhorn"
KINDS = (BOX_SIMPLEX, SINKHORN)

DELETION = "deletion"
RECOMPUTE = "recompute"
PHASE_RESTART = "phase-restart"
TERMINATE = "terminate"

FEASIBILITY_SLACK = 1e-12


class StreamError(Exception):
    pass


Edge = typing.Tuple[int, int]


class BipartiteGraph:
    """
    A bipartite graph whose edges can only be deleted. Edge ids are
    positions in the constructor's edge list and never change.

    alive_ids() scans only the edges that were alive at the last compact(),
    so a caller that compacts at the start of every phase pays for the live
    edges rather than for the original edge count.
    """

    def __init__(self, n_left: int, n_right: int, edges: typing.Iterable[Edge]):
        if n_left < 0 or n_right < 0:
            raise numkit.InstanceError("vertex counts must be nonnegative")
        self._n_left = n_left
        self._n_right = n_right
        self._edges: typing.List[Edge] = []
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n_left and 0 <= v < n_right):
                raise numkit.InstanceError("edge ({}, {}) outside a {}x{} bipartite graph".format(
                    u, v, n_left, n_right))
            if (u, v) in seen:
                raise numkit.InstanceError("duplicate edge ({}, {})".format(u, v))
            seen.add((u, v))
            self._edges.append((u, v))
        self._alive = numpy.ones(len(self._edges), dtype=bool)
        self._alive_count = len(self._edges)
        self._stored = numpy.arange(len(self._edges))
        self._stored_alive = numpy.ones(len(self._edges), dtype=bool)

    @property
    def n_left(self) -> int:
        return self._n_left

    @property
    def n_right(self) -> int:
        return self._n_right

    @property
    def edges(self) -> typing.List[Edge]:
        return list(self._edges)

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def alive_count(self) -> int:
        return self._alive_count

    @property
    def stored_count(self) -> int:
        """
        The number of edge slots alive_ids() scans.
        """
        return int(self._stored.size)

    def is_alive(self, edge_id: int) -> bool:
        return 0 <= edge_id < len(self._edges) and bool(self._alive[edge_id])

    def alive_ids(self) -> numpy.ndarray:
        return self._stored[self._stored_alive]

    def alive_pairs(self) -> typing.List[Edge]:
        return [self._edges[e] for e in self.alive_ids()]

    def pairs(self, edge_ids: typing.Iterable[int]) -> typing.List[Edge]:
        return [self._edges[int(e)] for e in edge_ids]

    def delete(self, edge_id: int):
        if not 0 <= edge_id < len(self._edges):
            raise StreamError("edge {} does not exist (graph has {} edges)".format(edge_id, len(self._edges)))
        if not self._alive[edge_id]:
            raise StreamError("edge {} was already deleted".format(edge_id))
        self._alive[edge_id] = False
        self._alive_count -= 1
        self._stored_alive[numpy.searchsorted(self._stored, edge_id)] = False

    def compact(self) -> int:
        """
        Drops the deleted edges from the scanned storage and returns how
        many were dropped. Edge ids are unchanged.
        """
        dropped = self._stored.size - self._alive_count
        if dropped:
            self._stored = self.alive_ids()
            self._stored_alive = numpy.ones(self._stored.size, dtype=bool)
        return dropped

    def incidence(self, edge_ids: typing.Iterable[int]) -> numkit.SparseMatrix:
        return numkit.incidence_matrix(self.pairs(edge_ids), self._n_left, self._n_right)

    def copy(self) -> BipartiteGraph:
        graph = BipartiteGraph(self._n_left, self._n_right, self._edges)
        graph._alive = self._alive.copy()
        graph._alive_count = self._alive_count
        graph._stored = self._stored.copy()
        graph._stored_alive = self._stored_alive.copy()
        return graph

    def __repr__(self):
        return "BipartiteGraph({}x{}, {} of {} edges alive)".format(
            self._n_left, self._n_right, self._alive_count, len(self._edges))


def random_bipartite_graph(n_left: int, n_right: int, density: float, seed: int) -> BipartiteGraph:
    """
    An Erdos-Renyi bipartite graph; every left/right pair is an edge with
    probability density.
    """
    network = networkx.algorithms.bipartite.random_graph(n_left, n_right, density, seed=seed)
    edges = sorted((min(a, b), max(a, b) - n_left) for a, b in network.edges())
    return BipartiteGraph(n_left, n_right, edges)


def greedy_matching(graph: BipartiteGraph) -> typing.Tuple[int, typing.List[int]]:
    """
    A maximal matching from one scan of the alive edges in id order.
    """
    used_left, used_right = set(), set()
    matching = []
    for e in graph.alive_ids():
        u, v = graph.pairs((e,))[0]
        if u in used_left or v in used_right:
            continue
        used_left.add(u)
        used_right.add(v)
        matching.append(int(e))
    return len(matching), matching


def remove_overflow(graph: BipartiteGraph, ell: numpy.ndarray,
                    edge_ids: typing.Optional[typing.Sequence[int]] = None) -> numpy.ndarray:
    """
    Scales each edge of ell (indexed like edge_ids, all edges by default) by
    the smaller of its endpoints' factors 1 / max(1, load), making B^T ell
    at most one everywhere while losing at most the total overflow.
    """
    ids = numpy.arange(graph.m) if edge_ids is None else numpy.asarray(edge_ids, dtype=int)
    ell = numpy.asarray(ell, dtype=float)
    if ell.shape != ids.shape:
        raise numkit.InstanceError("edge weights of length {} for {} edges".format(ell.shape[0], ids.shape[0]))
    if numpy.any(ell < 0):
        raise numkit.InstanceError("edge weights must be nonnegative")
    if ids.size == 0:
        return ell.copy()
    pairs = numpy.array(graph.pairs(ids), dtype=int).reshape(-1, 2)
    load_left = numpy.bincount(pairs[:, 0], weights=ell, minlength=graph.n_left)
    load_right = numpy.bincount(pairs[:, 1], weights=ell, minlength=graph.n_right)
    factor_left = 1.0 / numpy.maximum(1.0, load_left)
    factor_right = 1.0 / numpy.maximum(1.0, load_right)
    return ell * numpy.minimum(factor_left[pairs[:, 0]], factor_right[pairs[:, 1]])


def vertex_loads(graph: BipartiteGraph, ell: numpy.ndarray,
                 edge_ids: typing.Optional[typing.Sequence[int]] = None) -> numpy.ndarray:
    """
    B^T ell, left vertices first.
    """
    ids = numpy.arange(graph.m) if edge_ids is None else numpy.asarray(edge_ids, dtype=int)
    if ids.size == 0:
        return numpy.zeros(graph.n_left + graph.n_right)
    return numkit.spmv(graph.incidence(ids), numpy.asarray(ell, dtype=float), transpose=True)


@dataclasses.dataclass(frozen=True)
class DdbmConfig:
    """
    reg_denominator is the k in gamma^x = eps M / (k log m); l1_divisor sets
    the l1 accuracy eps / l1_divisor demanded from every solve.
    """
    kind: str = BOX_SIMPLEX
    mode: str = bsgame.PRACTICAL
    reg_denominator: float = 256.0
    l1_divisor: float = 1100.0
    warm_start: bool = True
    audit: bool = False
    timestamps: bool = True
    max_outer: typing.Optional[int] = None
    c_T: float = 4.0
    c_K: float = 4.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError("unknown CRO kind {}, expected one of {}".format(self.kind, ", ".join(KINDS)))
        if self.reg_denominator <= 0 or self.l1_divisor <= 0:
            raise ValueError("reg_denominator and l1_divisor must be positive")


@dataclasses.dataclass(frozen=True, eq=False)
class CroInstance:
    """
    A regularized matching objective over a fixed edge set. edge_ids lists
    the graph edges in simplex order; x~ times scale is the fractional
    matching.
    """
    kind: str
    M: float
    epsilon: float
    edge_ids: numpy.ndarray
    scale: float
    gamma_x: typing.Optional[float] = None
    gamma_y: typing.Optional[float] = None
    gamma: typing.Optional[float] = None
    game: typing.Optional[bsgame.RegGame] = None
    ot: typing.Optional[sinkhorn.OTInstance] = None
    edge_cells: typing.Optional[typing.Tuple[numpy.ndarray, numpy.ndarray]] = None
    swapped: bool = False
    cost_offset: float = 0.0

    @property
    def m(self) -> int:
        return int(self.edge_ids.size)


def _check_cro_args(graph: BipartiteGraph, M: float, edge_ids: typing.Optional[numpy.ndarray]) -> numpy.ndarray:
    if not M > 0:
        raise numkit.InstanceError("M must be positive, got {}".format(M))
    ids = graph.alive_ids() if edge_ids is None else numpy.asarray(edge_ids, dtype=int)
    if ids.size == 0:
        raise numkit.InstanceError("cannot build an objective over an empty edge set")
    return ids


def build_cro_bs(graph: BipartiteGraph, M: float, epsilon: float, reg_denominator: float = 256.0,
                 edge_ids: typing.Optional[numpy.ndarray] = None,
                 log_edges: typing.Optional[int] = None) -> CroInstance:
    """
    The box-simplex objective

        -8M 1^T x + y^T (8M B^T x - 1) + gamma^x H(x, xi) - gamma^y (y^2)^T B^T x

    divided by 16M, over the simplex of the alive edges plus one slack
    coordinate xi (last), with one dual per vertex. log_edges is the edge
    count in gamma^x (the size of the edge set by default). Objectives built
    with the same log_edges agree on their common support.
    """
    ids = _check_cro_args(graph, M, edge_ids)
    m = ids.size
    gamma_x = epsilon * M / (reg_denominator * utils.safe_log_dim(m if log_edges is None else log_edges))
    gamma_y = epsilon * M / reg_denominator

    B = graph.incidence(ids).csr
    slack_row = scipy.sparse.csr_matrix((1, B.shape[1]))
    A = numkit.SparseMatrix.from_csr(scipy.sparse.vstack([B * 0.5, slack_row]).tocsr())
    c = numpy.concatenate([numpy.full(m, -0.5), [0.0]])
    b = numpy.full(B.shape[1], 1.0 / (16.0 * M))
    game = bsgame.RegGame.create(A, b, c, gamma_x / (16.0 * M), gamma_y / (4.0 * M))
    logger.debug("built box-simplex objective over %s edges (M=%s, gamma_x=%s)", m, M, gamma_x)
    return CroInstance(BOX_SIMPLEX, float(M), epsilon, ids, 8.0 * M, gamma_x=gamma_x, gamma_y=gamma_y, game=game)


def build_cro_sinkhorn(graph: BipartiteGraph, M: float, epsilon: float, reg_denominator: float = 256.0,
                       edge_ids: typing.Optional[numpy.ndarray] = None,
                       log_edges: typing.Optional[int] = None) -> CroInstance:
    """
    The Sinkhorn distance objective on the graph extended to balanced sides:
    isolated anchors on both sides if missing, the sides swapped so that
    |L| <= |R|, dummy left vertices L0 filling L up to |R|, and two dummy
    hubs joined to every vertex of the opposite side and to each other.
    Demands are 1 per vertex and |R| per hub, costs -1 on real edges and 0
    elsewhere. Costs are stored shifted by +1 and everything is divided by
    2|R|, so the transport objective plus cost_offset, times scale, is the
    objective value. log_edges is as for build_cro_bs().
    """
    ids = _check_cro_args(graph, M, edge_ids)
    pairs = graph.pairs(ids)
    n_left = graph.n_left + (0 if len({u for u, _ in pairs}) < graph.n_left else 1)
    n_right = graph.n_right + (0 if len({v for _, v in pairs}) < graph.n_right else 1)
    swapped = n_left > n_right
    if swapped:
        pairs = [(v, u) for u, v in pairs]
        n_left, n_right = n_right, n_left

    size = n_right + 1
    hub = n_right
    support = numpy.zeros((size, size), dtype=bool)
    cost = numpy.ones((size, size))
    edge_rows = numpy.array([u for u, _ in pairs], dtype=int)
    edge_cols = numpy.array([v for _, v in pairs], dtype=int)
    support[edge_rows, edge_cols] = True
    cost[edge_rows, edge_cols] = 0.0
    support[:, hub] = True
    support[hub, :] = True

    demands = numpy.concatenate([numpy.ones(n_right), [float(n_right)]]) / (2.0 * n_right)
    gamma = epsilon * M / (reg_denominator * utils.safe_log_dim(ids.size if log_edges is None else log_edges))
    ot = sinkhorn.OTInstance(cost, demands, demands, gamma / (2.0 * n_right), support)
    logger.debug("built sinkhorn objective over %s edges on a %sx%s extension", ids.size, size, size)
    return CroInstance(SINKHORN, float(M), epsilon, ids, 2.0 * n_right, gamma=gamma, ot=ot,
                       edge_cells=(edge_rows, edge_cols), swapped=swapped, cost_offset=-1.0)


def cro_value(cro: CroInstance, x: numpy.ndarray) -> float:
    """
    The (unscaled) objective value at x. For the box-simplex kind x covers
    the edges and the slack coordinate; for the Sinkhorn kind x is the plan
    over the extension.
    """
    if cro.kind == BOX_SIMPLEX:
        return 16.0 * cro.M * cro.game.scale * bsgame.primal_value(cro.game, x)
    return cro.scale * (sinkhorn.sinkhorn_objective(cro.ot, x) + cro.cost_offset)


class CanonicalSolution(typing.NamedTuple):
    x_hat: numpy.ndarray
    x_tilde: numpy.ndarray
    report: typing.Union[bsgame.SolveReport, sinkhorn.TransportPlan]
    certified: bool


def canonical_solve(cro: CroInstance, graph: BipartiteGraph, config: typing.Optional[DdbmConfig] = None,
                    warm: typing.Optional[bsgame.PDPoint] = None) -> CanonicalSolution:
    """
    Solves cro to l1 accuracy eps / l1_divisor and rounds the solution into
    a feasible x~ <= x^ over cro.edge_ids.
    """
    config = DdbmConfig(kind=cro.kind) if config is None else config
    target = cro.epsilon / config.l1_divisor

    if cro.kind == BOX_SIMPLEX:
        game = cro.game
        gap_tol = 0.5 * game.mu * game.scale * target ** 2
        x_hat, report = bsgame.solve(game, gap_tol, config.mode, c_T=config.c_T, c_K=config.c_K, z0=warm,
                                     max_outer=config.max_outer, timestamps=config.timestamps)
        ell = cro.scale * x_hat[:cro.m]
        certified = report.certified
    else:
        ot = cro.ot
        gap_tol = 0.5 * ot.mu * target ** 2
        tolerance = max(gap_tol / (2.0 * ot.cost_inf_norm() + 2.0 * sinkhorn.ENTROPY_L1_CONST * ot.mu
                                   * utils.safe_log_dim(ot.m)), 1e-15)
        report = sinkhorn.sinkhorn_iterate(ot, tolerance)
        rows, cols = numpy.nonzero(ot.support)
        x_hat = report.X[rows, cols]
        ell = cro.scale * report.X[cro.edge_cells]
        certified = report.converged

    x_tilde = remove_overflow(graph, ell, cro.edge_ids) / cro.scale
    if not certified:
        logger.warning("canonical solve over %s edges is uncertified", cro.m)
    return CanonicalSolution(x_hat, x_tilde, report, certified)


@dataclasses.dataclass
class MatchingState:
    """
    x_tilde is aligned with edge_ids, the sorted edges of the last
    recompute; the maintained fractional matching is scale * x_tilde on the
    ones still alive. log_edges fixes the regularization strength for the
    whole phase.
    """
    edge_ids: numpy.ndarray
    x_tilde: numpy.ndarray
    E_del: typing.Set[int]
    M: float
    M_est: float
    epsilon: float
    log_edges: typing.Optional[int] = None
    scale: float = 1.0
    l1_at_recompute: float = 0.0
    recompute_count: int = 0
    uncertified_count: int = 0
    warm: typing.Optional[typing.Tuple[numpy.ndarray, bsgame.PDPoint]] = dataclasses.field(default=None, repr=False)

    @classmethod
    def start(cls, graph: BipartiteGraph, M: float, epsilon: float) -> MatchingState:
        ids = graph.alive_ids()
        return cls(ids, numpy.zeros(ids.size), set(), float(M), float(M), epsilon, log_edges=int(ids.size))

    def weights(self, edge_ids: typing.Sequence[int]) -> numpy.ndarray:
        """
        x~ on the given edges, which must all belong to edge_ids.
        """
        return self.x_tilde[numpy.searchsorted(self.edge_ids, numpy.asarray(edge_ids, dtype=int))]

    def value(self, graph: BipartiteGraph) -> float:
        return float(self.scale * self.weights(graph.alive_ids()).sum())

    def deleted_mass(self) -> float:
        return float(self.weights(sorted(self.E_del)).sum()) if self.E_del else 0.0

    def needs_recompute(self) -> bool:
        return self.deleted_mass() > (self.epsilon / 8.0) * self.l1_at_recompute

    def matching(self, graph: BipartiteGraph) -> numpy.ndarray:
        """
        The fractional matching on graph.alive_ids(), in that order.
        """
        return self.scale * self.weights(graph.alive_ids())


@dataclasses.dataclass(frozen=True)
class Event:
    event: str
    edge: typing.Optional[int]
    value: float
    mcm_oracle: typing.Optional[int]
    recompute_count: int
    elapsed_ns: typing.Optional[int]
    phase: int


class RunLog:
    def __init__(self, audit: bool = False):
        self.audit = audit
        self.events: typing.List[Event] = []
        self.recompute_counts: typing.List[int] = []
        self.audit_violations: typing.List[str] = []
        self.uncertified_solves = 0

    def record(self, event: Event):
        self.events.append(event)

    def records(self) -> typing.List[typing.Dict[str, typing.Any]]:
        """
        One dict per event in stream order, keyed as in the JSON lines log.
        """
        out = []
        for event in self.events:
            record: typing.Dict[str, typing.Any] = {"event": event.event, "edge": event.edge, "value": event.value}
            if self.audit:
                record["mcm_oracle"] = event.mcm_oracle
            record["recompute_count"] = event.recompute_count
            record["elapsed_ns"] = event.elapsed_ns
            out.append(record)
        return out

    @property
    def phases(self) -> int:
        return len(self.recompute_counts)


def _check_feasible(graph: BipartiteGraph, state: MatchingState):
    loads = vertex_loads(graph, state.matching(graph), graph.alive_ids())
    assert numpy.all(loads <= 1.0 + FEASIBILITY_SLACK), "maintained matching overflows: {}".format(loads.max())
    assert numpy.all(state.x_tilde >= 0.0)


def _recompute(graph: BipartiteGraph, state: MatchingState, config: DdbmConfig):
    ids = graph.alive_ids()
    builder = build_cro_bs if config.kind == BOX_SIMPLEX else build_cro_sinkhorn
    cro = builder(graph, state.M, state.epsilon, config.reg_denominator, ids, state.log_edges)

    warm = None
    if config.warm_start and config.kind == BOX_SIMPLEX and state.warm is not None:
        warm = _warm_point(ids, *state.warm)
    solution = canonical_solve(cro, graph, config, warm)

    state.edge_ids = ids
    state.x_tilde = solution.x_tilde
    state.scale = cro.scale
    state.E_del.clear()
    state.l1_at_recompute = float(solution.x_tilde.sum())
    state.recompute_count += 1
    state.uncertified_count += int(not solution.certified)
    if config.kind == BOX_SIMPLEX:
        state.warm = (ids, solution.report.point)
    if __debug__:
        _check_feasible(graph, state)
    logger.info("recompute %s over %s edges, matching value %s", state.recompute_count, ids.size,
                state.value(graph))


def _warm_point(ids: numpy.ndarray, previous_ids: numpy.ndarray, previous: bsgame.PDPoint) -> bsgame.PDPoint:
    positions = numpy.searchsorted(previous_ids, ids)
    x = numpy.concatenate([previous.x[positions], previous.x[-1:]])
    return bsgame.PDPoint(x / x.sum(), previous.y)


def dec_matching_run(graph: BipartiteGraph, epsilon: float, stream: typing.Any, kind: typing.Optional[str] = None,
                     audit: typing.Optional[bool] = None, config: typing.Optional[DdbmConfig] = None) -> RunLog:
    """
    Runs the decremental matching engine over graph until the stream ends or
    no edge is left. stream.next_edge(graph, state) supplies each deletion
    (None ends the stream). The graph is mutated.
    """
    config = DdbmConfig() if config is None else config
    overrides = {}
    if kind is not None:
        overrides["kind"] = kind
    if audit is not None:
        overrides["audit"] = audit
    config = dataclasses.replace(config, **overrides)
    if not 0 < epsilon < 1:
        raise numkit.InstanceError("epsilon must lie in (0, 1), got {}".format(epsilon))
    if epsilon >= 1.0 / 8.0:
        logger.warning("epsilon=%s is outside (0, 1/8); approximation guarantees are not claimed", epsilon)
    if graph.m and epsilon < float(graph.m) ** -3:
        logger.warning("epsilon=%s is below m^-3", epsilon)

    stopwatch = utils.Stopwatch(config.timestamps)
    log = RunLog(config.audit)
    phase = 0
    phase_mcm: typing.Optional[int] = None

    def emit(event: str, state: typing.Optional[MatchingState], edge: typing.Optional[int] = None) \
            -> typing.Optional[int]:
        value = state.value(graph) if state is not None else 0.0
        mcm = oracle.hopcroft_karp(graph) if config.audit else None
        if mcm is not None and value < (1.0 - epsilon) * mcm - 1e-9:
            message = "{} event {} (edge {}): value {} below (1 - eps) MCM = {}".format(
                event, len(log.events), edge, value, (1.0 - epsilon) * mcm)
            logger.error("audit violation: %s", message)
            log.audit_violations.append(message)
        log.record(Event(event, edge, value, mcm, state.recompute_count if state is not None else 0,
                         stopwatch.elapsed_ns(), phase))
        return mcm

    def start_phase() -> typing.Optional[MatchingState]:
        nonlocal phase, phase_mcm
        dropped = graph.compact()
        if dropped:
            logger.debug("dropped %s deleted edges before phase %s", dropped, phase + 1)
        M, _ = greedy_matching(graph)
        if M == 0:
            return None
        phase += 1
        phase_mcm = oracle.hopcroft_karp(graph) if config.audit else None
        state = MatchingState.start(graph, M, epsilon)
        _recompute(graph, state, config)
        log.recompute_counts.append(state.recompute_count)
        return state

    state = start_phase()
    if state is None:
        emit(TERMINATE, None)
        return log
    emit(RECOMPUTE, state)

    # a deletion crossing the threshold is logged after the solve it triggers
    while True:
        edge = stream.next_edge(graph, state)
        if edge is None:
            break
        graph.delete(edge)
        state.E_del.add(edge)
        if graph.alive_count == 0 or not state.needs_recompute():
            emit(DELETION, state, edge)
            if graph.alive_count == 0:
                break
            continue

        state.M_est, _ = greedy_matching(graph)
        if state.M_est > state.M / 4.0:
            _recompute(graph, state, config)
            log.recompute_counts[-1] = state.recompute_count
            emit(DELETION, state, edge)
            emit(RECOMPUTE, state, edge)
            continue

        logger.info("phase %s ends after %s recomputes (M_est=%s, M=%s)", phase, state.recompute_count,
                    state.M_est, state.M)
        log.uncertified_solves += state.uncertified_count
        ended_mcm = phase_mcm
        restarted = start_phase()
        assert restarted is not None, "greedy matching is empty on a graph with alive edges"
        state = restarted
        emit(DELETION, state, edge)
        mcm = emit(PHASE_RESTART, state, edge)
        if mcm is not None and ended_mcm is not None and mcm > ended_mcm / 2.0:
            message = "phase {} restart with MCM {} above half of {}".format(phase - 1, mcm, ended_mcm)
            logger.error("audit violation: %s", message)
            log.audit_violations.append(message)
        emit(RECOMPUTE, state, edge)

    log.uncertified_solves += state.uncertified_count
    emit(TERMINATE, state)
    return log


def recompute_budget(m: int, epsilon: float, reg_denominator: float = 256.0) -> float:
    """
    10 k log(m) / eps^2, the per-phase recompute allowance checked by audits.
    """
    return 10.0 * reg_denominator * utils.safe_log_dim(m) / epsilon ** 2


def matching_value_bound(M: float, epsilon: float) -> float:
    """
    The additive slack eps M / 128 allowed between a feasible matching's size
    and its objective value.
    """
    return epsilon * M / 128.0
