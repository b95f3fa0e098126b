import numpy
import pytest

from regbox import adversary
from regbox import bsgame
from regbox import cli
from regbox import fileio
from regbox import sinkhorn

GAME_TEXT = """\
# a 2x2 game
bsgame 2 2 0.5 0.1
0.25 -0.5
0.1 0.2
0 0 1.0
1 1 -2.0
"""


def test_parse_game():
    data = fileio.parse_game(GAME_TEXT)
    assert data.shape == (2, 2)
    assert data.c.tolist() == [0.25, -0.5]
    assert data.b.tolist() == [0.1, 0.2]
    assert data.A.entries() == [(0, 0, 1.0), (1, 1, -2.0)]
    assert (data.mu, data.eps) == (0.5, 0.1)
    game = data.to_game()
    assert game.scale == 2.0
    assert game.mu == 0.25


def test_game_without_quadratic_term():
    data = fileio.parse_game("bsgame 1 1 1.0 none\n0.0\n0.5\n0 0 1.0\n")
    assert data.eps is None


def test_game_round_trip():
    data = cli.random_game_data(6, 4, 0.5, seed=9, mu=0.3, eps=0.05)
    assert fileio.parse_game(fileio.format_game(data)) == data


def test_format_regbox_game_in_original_units():
    data = fileio.parse_game(GAME_TEXT)
    assert fileio.parse_game(fileio.format_game(data.to_game())) == data


@pytest.mark.parametrize("text,line,message", [
    ("bsgame 2 1 0.5 none\n0.1 0.2\n0.3\n0 0 1.0\n5 0 1.0\n", 5, "outside a 2x1 matrix"),
    ("bsgame 2 1 0.5 none\n0.1 0.2\n0.3\n0 0 1.0\n0 0 2.0\n", 5, "duplicate entry"),
    ("bsgame 2 1 0.5 none\n\n# costs\n0.1\n", 4, "needs 2 values"),
    ("bsgame 2 1 -0.5 none\n0.1 0.2\n0.3\n", 1, "mu must be positive"),
    ("bsgame 2 1 0.5\n", 1, "takes 4 fields"),
    ("graph 2 1 0.5 none\n", 1, "expected a 'bsgame' header"),
    ("bsgame 2 1 0.5 none\n0.1 x\n", 2, "must be a number"),
])
def test_game_errors(text, line, message):
    with pytest.raises(fileio.FormatError) as excinfo:
        fileio.parse_game(text, "game.txt")
    assert excinfo.value.line == line
    assert str(excinfo.value).startswith("game.txt:{}: ".format(line))
    assert message in str(excinfo.value)


def test_graph_round_trip():
    text = "bipartite 2 3 3\n0 0\n1 2\n0 2\n"
    graph = fileio.parse_graph(text)
    assert graph.edges == [(0, 0), (1, 2), (0, 2)]
    assert fileio.format_graph(graph) == text


@pytest.mark.parametrize("text,line,message", [
    ("bipartite 2 2 2\n0 0\n", 2, "unexpected end of file"),
    ("bipartite 2 2 2\n0 0\n0 0\n", 3, "duplicate edge"),
    ("bipartite 2 2 1\n0 5\n", 2, "outside a 2x2 graph"),
    ("bipartite 2 2 1\n0 1\n1 1\n", 3, "trailing content"),
    ("bipartite 2 2 1\n0 1 1\n", 2, "edges are 'u v'"),
])
def test_graph_errors(text, line, message):
    with pytest.raises(fileio.FormatError) as excinfo:
        fileio.parse_graph(text, "graph.txt")
    assert excinfo.value.line == line
    assert message in str(excinfo.value)


def test_stream_with_directive():
    stream = fileio.parse_stream("# deletions\n4\n1\n@adversary random 7\n")
    assert stream.explicit == [4, 1]
    assert isinstance(stream.adversary, adversary.RandomAdversary)
    assert stream.adversary.seed == 7
    assert fileio.format_stream(stream) == "4\n1\n@adversary random 7\n"
    assert fileio.format_stream(fileio.parse_stream("@adversary max-weight\n")) == "@adversary max-weight\n"


@pytest.mark.parametrize("text,line,message", [
    ("@adversary fixed-order\n3\n", 1, "must be the last line"),
    ("@adversary random\n", 1, "needs a seed"),
    ("@adversary chaos 1\n", 1, "unknown adversary"),
    ("1\n-2\n", 2, "nonnegative"),
    ("1 2\n", 1, "one edge id per line"),
])
def test_stream_errors(text, line, message):
    with pytest.raises(fileio.FormatError) as excinfo:
        fileio.parse_stream(text, "stream.txt")
    assert excinfo.value.line == line
    assert message in str(excinfo.value)


def test_ot_round_trip():
    inst = fileio.parse_ot("ot,2,3,0.5\n0,1,2\n1, 0, 0.5\n0.5,0.5\n0.2,0.3,0.5\n")
    assert inst.shape == (2, 3)
    assert inst.cost.tolist() == [[0.0, 1.0, 2.0], [1.0, 0.0, 0.5]]
    assert inst.mu == 0.5
    again = fileio.parse_ot(fileio.format_ot(inst))
    numpy.testing.assert_array_equal(again.cost, inst.cost)
    numpy.testing.assert_array_equal(again.d_L, inst.d_L)
    numpy.testing.assert_array_equal(again.d_R, inst.d_R)
    assert fileio.format_ot(inst).startswith("ot,2,3,0.5\n")


def test_ot_errors():
    with pytest.raises(fileio.FormatError) as excinfo:
        fileio.parse_ot("ot,1,2,0.5\n0,1\n1.0\n0.7,0.7\n", "ot.csv")
    assert excinfo.value.line == 4
    with pytest.raises(fileio.FormatError) as excinfo:
        fileio.parse_ot("ot,1,2,0.5\n0,inf\n1.0\n0.5,0.5\n", "ot.csv")
    assert excinfo.value.line == 2


def test_vectors_and_matrices():
    assert fileio.format_vector([0.5, 0.25]) == "0.5\n0.25\n"
    assert fileio.format_matrix(numpy.array([[1.0, 0.0], [0.5, 0.5]])) == "1.0,0.0\n0.5,0.5\n"


def test_write_text(tmp_path, capsys):
    path = tmp_path / "out.txt"
    fileio.write_text(str(path), "hello\n")
    assert path.read_text() == "hello\n"
    fileio.write_text(None, "to stdout\n")
    fileio.write_text("-", "dash\n")
    assert capsys.readouterr().out == "to stdout\ndash\n"


def test_read_files(tmp_path):
    game_path = tmp_path / "game.txt"
    game_path.write_text(GAME_TEXT)
    assert isinstance(fileio.read_game(str(game_path)).to_game(), bsgame.RegGame)
    ot_path = tmp_path / "ot.csv"
    fileio.write_ot(str(ot_path), sinkhorn.OTInstance([[0.5]], [1.0], [1.0], 0.1))
    assert fileio.read_ot(str(ot_path)).shape == (1, 1)
    with pytest.raises(OSError):
        fileio.read_graph(str(tmp_path / "missing.txt"))
