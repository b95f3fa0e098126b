# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
Deletion sources for the decremental matching engine.

An adversary picks the next edge to delete from the alive edges, possibly
looking at the maintained solution. A DeletionStream replays an explicit
list of edge ids first and then hands over to an adversary, if any.
"""

from __future__ import annotations
import logging
import typing

import numpy

from . import ddbm
from . import utils

logging.basicConfig()
logger = logging.getLogger(__name__)
logger.setLevel(utils.log_level())


MAX_WEIGHT = "max-weight"
RANDOM = "random"
FIXED_ORDER = "fixed-order"


class MaxWeightAdversary:
    """
    Deletes the alive edge carrying the most weight in x~, lowest id first
    among ties.
    """
    name = MAX_WEIGHT

    def __init__(self, seed: typing.Optional[int] = None):
        pass

    def next_edge(self, graph: ddbm.BipartiteGraph, state: ddbm.MatchingState) -> typing.Optional[int]:
        alive = graph.alive_ids()
        if alive.size == 0:
            return None
        return int(alive[numpy.argmax(state.weights(alive))])


class RandomAdversary:
    name = RANDOM

    def __init__(self, seed: typing.Optional[int] = None):
        self.seed = seed
        self._rng = numpy.random.default_rng(seed)

    def next_edge(self, graph: ddbm.BipartiteGraph, state: ddbm.MatchingState) -> typing.Optional[int]:
        alive = graph.alive_ids()
        if alive.size == 0:
            return None
        return int(self._rng.choice(alive))


class FixedOrderAdversary:
    """
    Deletes the alive edges of order in turn, passing over edges that are
    already gone, and then the remaining alive edges in increasing id order.

    Unlike the explicit ids of a DeletionStream, order never makes a
    stream invalid: the adversary only ever names alive edges.
    """
    name = FIXED_ORDER

    def __init__(self, seed: typing.Optional[int] = None, order: typing.Iterable[int] = ()):
        self.order = [int(edge) for edge in order]
        self._position = 0

    def next_edge(self, graph: ddbm.BipartiteGraph, state: ddbm.MatchingState) -> typing.Optional[int]:
        while self._position < len(self.order):
            edge = self.order[self._position]
            self._position += 1
            if graph.is_alive(edge):
                return edge
        alive = graph.alive_ids()
        return int(alive[0]) if alive.size else None


def default_adversaries():
    return {
        MAX_WEIGHT: MaxWeightAdversary,
        RANDOM: RandomAdversary,
        FIXED_ORDER: FixedOrderAdversary,
    }


def make_adversary(name: str, seed: typing.Optional[int] = None):
    adversaries = default_adversaries()
    if name not in adversaries:
        raise ddbm.StreamError("unknown adversary {}, expected one of {}".format(name, ", ".join(adversaries)))
    return adversaries[name](seed)


class DeletionStream:
    """
    Yields the explicit edge ids in order, then asks the adversary (when
    given) until it runs out of edges or the limit is hit.
    """

    def __init__(self, edge_ids: typing.Iterable[int] = (), adversary: typing.Any = None,
                 limit: typing.Optional[int] = None):
        self._explicit = list(edge_ids)
        self._position = 0
        self.adversary = adversary
        self.limit = limit
        self.emitted = 0

    @property
    def explicit(self) -> typing.List[int]:
        return list(self._explicit)

    def next_edge(self, graph: ddbm.BipartiteGraph, state: ddbm.MatchingState) -> typing.Optional[int]:
        if self.limit is not None and self.emitted >= self.limit:
            return None
        if self._position < len(self._explicit):
            edge = self._explicit[self._position]
            self._position += 1
        elif self.adversary is not None:
            edge = self.adversary.next_edge(graph, state)
            if edge is None:
                return None
        else:
            return None
        self.emitted += 1
        logger.debug("deleting edge %s", edge)
        return edge
