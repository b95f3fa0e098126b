import pytest

from regbox import cli
from regbox import config
from regbox import ddbm
from regbox import fileio


def test_defaults():
    run = config.from_args(cli.parse_args(["solve", "game.txt"]))
    assert run.subcommand == "solve"
    assert run.inputs == ("game.txt",)
    assert run.epsilon == 0.1
    assert run.mu is None
    assert run.kind == ddbm.BOX_SIMPLEX


def test_key_value_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# ddbm settings\nepsilon = 0.25\n\nkind = sinkhorn   # cheaper\nmax_outer = none\naudit = yes\n")
    values = config.load_config_file(str(path))
    assert values == {"epsilon": 0.25, "kind": ddbm.SINKHORN, "max_outer": None, "audit": True}


def test_yaml_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("epsilon: 0.5\nseed: 3\nno_timestamps: true\nlog_level: debug\n")
    values = config.load_config_file(str(path))
    assert values == {"epsilon": 0.5, "seed": 3, "no_timestamps": True, "log_level": "debug"}


@pytest.mark.parametrize("text,line,message", [
    ("epsilon = 0.1\nepsilonn = 0.2\n", 2, "unknown config key 'epsilonn'"),
    ("\nseed = three\n", 2, "bad value 'three' for 'seed'"),
    ("mode = fast\n", 1, "bad value 'fast' for 'mode'"),
    ("audit\n", 1, "expected 'key=value'"),
])
def test_key_value_errors(tmp_path, text, line, message):
    path = tmp_path / "run.conf"
    path.write_text(text)
    with pytest.raises(fileio.FormatError) as excinfo:
        config.load_config_file(str(path))
    assert excinfo.value.line == line
    assert message in str(excinfo.value)


def test_yaml_errors(tmp_path):
    path = tmp_path / "run.yml"
    path.write_text("- epsilon\n- 0.1\n")
    with pytest.raises(fileio.FormatError) as excinfo:
        config.load_config_file(str(path))
    assert "must be a mapping" in str(excinfo.value)
    path.write_text("kind: hungarian\n")
    with pytest.raises(fileio.FormatError):
        config.load_config_file(str(path))


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("epsilon = 0.25\nseed = 4\n")
    run = config.from_args(cli.parse_args(["generate", "graph", "--config", str(path), "--seed", "9"]))
    assert run.epsilon == 0.25
    assert run.seed == 9
    assert run.inputs == ("graph",)


def test_method_must_fit_subcommand():
    run = config.from_args(cli.parse_args(["sinkhorn", "ot.csv", "--method", "accel"]))
    assert run.method == "accel"
    run = config.from_args(cli.parse_args(["oracle", "reg-optimum", "game.txt", "--method", "dual-newton"]))
    assert run.method == "dual-newton"
    with pytest.raises(fileio.FormatError) as excinfo:
        config.from_args(cli.parse_args(["solve", "game.txt", "--method", "accel"]))
    assert "does not apply to solve" in str(excinfo.value)
    with pytest.raises(fileio.FormatError):
        config.from_args(cli.parse_args(["oracle", "fixpoint", "ot.csv", "--method", "accel"]))


def test_ddbm_config():
    run = config.from_args(cli.parse_args(["ddbm", "g.txt", "s.txt", "--kind", "sinkhorn", "--reg-denominator",
                                           "2", "--l1-divisor", "2", "--no-timestamps", "--audit", "--c-T", "1"]))
    ddbm_config = run.ddbm_config()
    assert ddbm_config.kind == ddbm.SINKHORN
    assert ddbm_config.reg_denominator == 2.0
    assert ddbm_config.l1_divisor == 2.0
    assert ddbm_config.timestamps is False
    assert ddbm_config.audit is True
    assert ddbm_config.c_T == 1.0
    assert run.solve_args()["timestamps"] is False
