# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
Readers and writers for the plain-text instance formats:

    game       bsgame <m> <n> <mu> <eps|none>, a c row, a b row, then
               "i j value" triplets of A
    graph      bipartite <nL> <nR> <m>, then one "u v" pair per line
    stream     one edge id per line, optionally ending in
               "@adversary <name> [seed]"
    transport  ot <L> <R> <mu>, L cost rows, a d_L row and a d_R row
               (comma or whitespace separated)

Blank lines and lines starting with '#' are skipped everywhere. Floats are
written with repr() so that every written file reparses to the same values.
"""

from __future__ import annotations
import dataclasses
import logging
import re
import typing

import more_itertools
import numpy

from . import adversary
from . import bsgame
from . import ddbm
from . import numkit
from . import sinkhorn
from . import utils

logging.basicConfig()
logger = logging.getLogger(__name__)
logger.setLevel(utils.log_level())


class FormatError(Exception):
    def __init__(self, message: str, path: str = "<input>", line: typing.Optional[int] = None):
        location = path if line is None else "{}:{}".format(path, line)
        super().__init__("{}: {}".format(location, message))
        self.path = path
        self.line = line


_SEPARATORS = re.compile(r"[,\s]+")
NONE_TOKENS = ("none", "-")

Line = typing.Tuple[int, typing.List[str]]


class _Lines:
    """
    A peekable sequence of (line number, tokens) over the meaningful lines of
    a text, remembering where it came from for error messages.
    """

    def __init__(self, text: str, path: str):
        self.path = path
        self._last_line = 0
        self._lines = more_itertools.peekable(
            (number, [token for token in _SEPARATORS.split(line.strip()) if token])
            for number, line in enumerate(text.splitlines(), start=1)
            if line.strip() and not line.lstrip().startswith("#")
        )

    def error(self, message: str, line: typing.Optional[int] = None) -> FormatError:
        return FormatError(message, self.path, self._last_line if line is None else line)

    def next(self, what: str) -> Line:
        line = next(self._lines, None)
        if line is None:
            raise self.error("unexpected end of file, expected {}".format(what))
        self._last_line = line[0]
        return line

    def peek(self) -> typing.Optional[Line]:
        return self._lines.peek(None)

    def expect_end(self):
        line = self.peek()
        if line is not None:
            raise self.error("unexpected trailing content '{}'".format(" ".join(line[1])), line[0])

    def header(self, keyword: str, count: int) -> typing.List[str]:
        number, tokens = self.next("a '{}' header".format(keyword))
        if not tokens or tokens[0] != keyword:
            raise self.error("expected a '{}' header, found '{}'".format(keyword, " ".join(tokens)), number)
        if len(tokens) != count + 1:
            raise self.error("'{}' header takes {} fields, found {}".format(keyword, count, len(tokens) - 1), number)
        return tokens[1:]

    def floats(self, what: str, count: int) -> numpy.ndarray:
        number, tokens = self.next(what)
        if len(tokens) != count:
            raise self.error("{} needs {} values, found {}".format(what, count, len(tokens)), number)
        return numpy.array([self.to_float(token, what, number) for token in tokens])

    def to_int(self, token: str, what: str, line: typing.Optional[int] = None) -> int:
        try:
            return int(token)
        except ValueError:
            raise self.error("{} must be an integer, found '{}'".format(what, token), line) from None

    def to_float(self, token: str, what: str, line: typing.Optional[int] = None) -> float:
        try:
            value = float(token)
        except ValueError:
            raise self.error("{} must be a number, found '{}'".format(what, token), line) from None
        if not numpy.isfinite(value):
            raise self.error("{} must be finite, found '{}'".format(what, token), line)
        return value


def _read_text(path: str) -> str:
    with open(path) as f:
        return f.read()


def _format_float(value: float) -> str:
    return repr(float(value))


def _format_row(values: typing.Iterable[float], separator: str = " ") -> str:
    return separator.join(_format_float(value) for value in values)


@dataclasses.dataclass(frozen=True, eq=False)
class GameData:
    """
    A game exactly as written in a file, before the column floor and the
    rescale that RegGame.create() applies.
    """
    A: numkit.SparseMatrix
    b: numpy.ndarray
    c: numpy.ndarray
    mu: float
    eps: typing.Optional[float]

    @property
    def shape(self) -> typing.Tuple[int, int]:
        return self.A.shape

    def to_game(self, sigma: typing.Optional[float] = None) -> bsgame.RegGame:
        return bsgame.RegGame.create(self.A, self.b, self.c, self.mu, self.eps, sigma=sigma)

    def __eq__(self, other):
        if not isinstance(other, GameData):
            return NotImplemented
        return (self.A.entries() == other.A.entries() and self.A.shape == other.A.shape
                and numpy.array_equal(self.b, other.b) and numpy.array_equal(self.c, other.c)
                and self.mu == other.mu and self.eps == other.eps)


def parse_game(text: str, path: str = "<input>") -> GameData:
    lines = _Lines(text, path)
    m_token, n_token, mu_token, eps_token = lines.header("bsgame", 4)
    m = lines.to_int(m_token, "m")
    n = lines.to_int(n_token, "n")
    if m <= 0 or n < 0:
        raise lines.error("game needs m > 0 and n >= 0, got m={} n={}".format(m, n))
    mu = lines.to_float(mu_token, "mu")
    eps = None if eps_token.lower() in NONE_TOKENS else lines.to_float(eps_token, "eps")

    c = lines.floats("the c row", m)
    b = lines.floats("the b row", n) if n else numpy.zeros(0)
    entries = []
    seen = set()
    while lines.peek() is not None:
        number, tokens = lines.next("a matrix entry")
        if len(tokens) != 3:
            raise lines.error("matrix entries are 'i j value', found '{}'".format(" ".join(tokens)), number)
        i = lines.to_int(tokens[0], "row index", number)
        j = lines.to_int(tokens[1], "column index", number)
        if not (0 <= i < m and 0 <= j < n):
            raise lines.error("entry ({}, {}) outside a {}x{} matrix".format(i, j, m, n), number)
        if (i, j) in seen:
            raise lines.error("duplicate entry ({}, {})".format(i, j), number)
        seen.add((i, j))
        entries.append((i, j, lines.to_float(tokens[2], "matrix value", number)))

    try:
        A = numkit.SparseMatrix(m, n, entries)
        if not mu > 0:
            raise numkit.InstanceError("mu must be positive, got {}".format(mu))
        if eps is not None and not eps > 0:
            raise numkit.InstanceError("eps must be positive, got {}".format(eps))
    except numkit.InstanceError as e:
        raise lines.error(str(e), 1) from None
    return GameData(A, b, c, mu, eps)


def read_game(path: str) -> GameData:
    return parse_game(_read_text(path), path)


def format_game(game: typing.Union[GameData, bsgame.RegGame]) -> str:
    """
    Writes a GameData, or a RegGame in its original (unscaled) units.
    """
    if isinstance(game, bsgame.RegGame):
        game = GameData(game.A.scaled(game.scale), game.b * game.scale, game.c * game.scale,
                        game.mu * game.scale, game.eps_reg)
    m, n = game.shape
    eps = "none" if game.eps is None else _format_float(game.eps)
    out = ["bsgame {} {} {} {}".format(m, n, _format_float(game.mu), eps), _format_row(game.c), _format_row(game.b)]
    out.extend("{} {} {}".format(i, j, _format_float(value)) for i, j, value in game.A.entries())
    return "\n".join(out) + "\n"


def write_game(path: str, game: typing.Union[GameData, bsgame.RegGame]):
    with open(path, "w") as f:
        f.write(format_game(game))


def parse_graph(text: str, path: str = "<input>") -> ddbm.BipartiteGraph:
    lines = _Lines(text, path)
    n_left_token, n_right_token, m_token = lines.header("bipartite", 3)
    n_left = lines.to_int(n_left_token, "nL")
    n_right = lines.to_int(n_right_token, "nR")
    m = lines.to_int(m_token, "m")
    if min(n_left, n_right, m) < 0:
        raise lines.error("graph sizes must be nonnegative")

    edges = []
    seen = set()
    for _ in range(m):
        number, tokens = lines.next("an edge")
        if len(tokens) != 2:
            raise lines.error("edges are 'u v', found '{}'".format(" ".join(tokens)), number)
        u = lines.to_int(tokens[0], "left endpoint", number)
        v = lines.to_int(tokens[1], "right endpoint", number)
        if not (0 <= u < n_left and 0 <= v < n_right):
            raise lines.error("edge ({}, {}) outside a {}x{} graph".format(u, v, n_left, n_right), number)
        if (u, v) in seen:
            raise lines.error("duplicate edge ({}, {})".format(u, v), number)
        seen.add((u, v))
        edges.append((u, v))
    lines.expect_end()
    return ddbm.BipartiteGraph(n_left, n_right, edges)


def read_graph(path: str) -> ddbm.BipartiteGraph:
    return parse_graph(_read_text(path), path)


def format_graph(graph: ddbm.BipartiteGraph) -> str:
    out = ["bipartite {} {} {}".format(graph.n_left, graph.n_right, graph.m)]
    out.extend("{} {}".format(u, v) for u, v in graph.edges)
    return "\n".join(out) + "\n"


def write_graph(path: str, graph: ddbm.BipartiteGraph):
    with open(path, "w") as f:
        f.write(format_graph(graph))


ADVERSARY_DIRECTIVE = "@adversary"


def parse_stream(text: str, path: str = "<input>") -> adversary.DeletionStream:
    lines = _Lines(text, path)
    edge_ids = []
    chosen = None
    while lines.peek() is not None:
        number, tokens = lines.next("an edge id")
        if tokens[0] == ADVERSARY_DIRECTIVE:
            if lines.peek() is not None:
                raise lines.error("the adversary directive must be the last line", number)
            chosen = _parse_adversary(lines, tokens, number)
            continue
        if len(tokens) != 1:
            raise lines.error("expected one edge id per line, found '{}'".format(" ".join(tokens)), number)
        edge_id = lines.to_int(tokens[0], "edge id", number)
        if edge_id < 0:
            raise lines.error("edge ids are nonnegative, found {}".format(edge_id), number)
        edge_ids.append(edge_id)
    return adversary.DeletionStream(edge_ids, chosen)


def _parse_adversary(lines: _Lines, tokens: typing.List[str], number: int):
    if len(tokens) not in (2, 3):
        raise lines.error("expected '@adversary <name> [seed]'", number)
    name = tokens[1]
    if name not in adversary.default_adversaries():
        raise lines.error("unknown adversary '{}', expected one of {}".format(
            name, ", ".join(adversary.default_adversaries())), number)
    seed = lines.to_int(tokens[2], "adversary seed", number) if len(tokens) == 3 else None
    if name == adversary.RANDOM and seed is None:
        raise lines.error("the random adversary needs a seed", number)
    return adversary.make_adversary(name, seed)


def read_stream(path: str) -> adversary.DeletionStream:
    return parse_stream(_read_text(path), path)


def format_stream(stream: adversary.DeletionStream) -> str:
    out = [str(edge_id) for edge_id in stream.explicit]
    chosen = stream.adversary
    if chosen is not None:
        seed = getattr(chosen, "seed", None)
        out.append(" ".join([ADVERSARY_DIRECTIVE, chosen.name] + ([] if seed is None else [str(seed)])))
    return "\n".join(out) + "\n"


def write_stream(path: str, stream: adversary.DeletionStream):
    with open(path, "w") as f:
        f.write(format_stream(stream))


def parse_ot(text: str, path: str = "<input>") -> sinkhorn.OTInstance:
    lines = _Lines(text, path)
    n_left_token, n_right_token, mu_token = lines.header("ot", 3)
    n_left = lines.to_int(n_left_token, "L")
    n_right = lines.to_int(n_right_token, "R")
    if n_left <= 0 or n_right <= 0:
        raise lines.error("transport sides must be positive, got {}x{}".format(n_left, n_right))
    mu = lines.to_float(mu_token, "mu")
    cost = numpy.stack([lines.floats("cost row {}".format(i), n_right) for i in range(n_left)])
    d_L = lines.floats("the d_L row", n_left)
    d_R = lines.floats("the d_R row", n_right)
    demand_line = lines._last_line
    lines.expect_end()
    try:
        return sinkhorn.OTInstance(cost, d_L, d_R, mu)
    except numkit.InstanceError as e:
        raise lines.error(str(e), demand_line) from None


def read_ot(path: str) -> sinkhorn.OTInstance:
    return parse_ot(_read_text(path), path)


def format_ot(inst: sinkhorn.OTInstance) -> str:
    n_left, n_right = inst.shape
    out = ["ot,{},{},{}".format(n_left, n_right, _format_float(inst.mu))]
    out.extend(_format_row(row, ",") for row in inst.cost)
    out.append(_format_row(inst.d_L, ","))
    out.append(_format_row(inst.d_R, ","))
    return "\n".join(out) + "\n"


def write_ot(path: str, inst: sinkhorn.OTInstance):
    with open(path, "w") as f:
        f.write(format_ot(inst))


def format_vector(values: typing.Iterable[float]) -> str:
    return "".join(_format_float(value) + "\n" for value in values)


def format_matrix(X: numpy.ndarray) -> str:
    return "".join(_format_row(row, ",") + "\n" for row in numpy.atleast_2d(X))


def write_text(path: typing.Optional[str], text: str):
    """
    Writes text to path, or to stdout when path is None or '-'.
    """
    if path is None or path == "-":
        print(text, end="")
        return
    with open(path, "w") as f:
        f.write(text)
