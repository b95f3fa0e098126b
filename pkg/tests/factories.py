"""
Instance factories shared by the tests.
"""
import typing

import numpy

from regbox import bsgame
from regbox import ddbm
from regbox import sinkhorn


def random_matrix(rng: numpy.random.Generator, m: int, n: int, density: float = 0.7) -> numpy.ndarray:
    """
    A dense m x n matrix with ||A||_inf <= 1 and no zero column.
    """
    A = numpy.where(rng.random((m, n)) < density, rng.uniform(-1.0, 1.0, (m, n)), 0.0)
    for j in range(n):
        if not A[:, j].any():
            A[rng.integers(m), j] = rng.uniform(0.1, 1.0)
    return A / numpy.maximum(1.0, numpy.abs(A).sum(axis=1))[:, None]


def random_game(rng: numpy.random.Generator, m: int, n: int, mu: float, eps: typing.Optional[float],
                density: float = 0.7) -> bsgame.RegGame:
    return bsgame.RegGame.create(random_matrix(rng, m, n, density), rng.uniform(0.0, 0.5, n),
                                 rng.uniform(0.0, 1.0, m), mu, eps)


def random_simplex(rng: numpy.random.Generator, m: int, floor: float = 1e-6) -> numpy.ndarray:
    x = rng.dirichlet(numpy.ones(m)) + floor
    return x / x.sum()


def random_point(rng: numpy.random.Generator, game: bsgame.RegGame) -> bsgame.PDPoint:
    return bsgame.PDPoint(random_simplex(rng, game.m), rng.random(game.n))


def random_direction(rng: numpy.random.Generator, game: bsgame.RegGame) -> bsgame.Direction:
    return rng.normal(size=game.m), rng.normal(size=game.n)


def complete_bipartite(n_left: int, n_right: int) -> ddbm.BipartiteGraph:
    return ddbm.BipartiteGraph(n_left, n_right, [(u, v) for u in range(n_left) for v in range(n_right)])


def random_ot(rng: numpy.random.Generator, n_left: int, n_right: int, mu: float) -> sinkhorn.OTInstance:
    return sinkhorn.OTInstance(rng.random((n_left, n_right)), rng.dirichlet(numpy.ones(n_left) * 4.0),
                               rng.dirichlet(numpy.ones(n_right) * 4.0), mu)


def relaxed_ddbm_config(kind: str = ddbm.SINKHORN, **overrides: typing.Any) -> ddbm.DdbmConfig:
    """
    Loose objective constants that keep every solve within a few hundred
    iterations on desk-sized graphs.
    """
    settings = {"kind": kind, "reg_denominator": 2.0, "l1_divisor": 2.0, "timestamps": False, "c_T": 1.0}
    settings.update(overrides)
    return ddbm.DdbmConfig(**settings)

