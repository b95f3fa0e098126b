# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
Run configuration shared by all subcommands.

A RunConfig starts from the dataclass defaults, is overridden by a config
file (key=value lines, or a YAML mapping for .yaml/.yml paths) and then by
command-line flags. Use add_config_args() on a parser and from_args() on the
parsed namespace.
"""

from __future__ import annotations
import argparse
import dataclasses
import logging
import os
import typing

import yaml

from . import bsgame
from . import ddbm
from . import oracle
from . import sinkhorn
from . import utils
from .fileio import FormatError

logging.basicConfig()
logger = logging.getLogger(__name__)
logger.setLevel(utils.log_level())


BOTH = "both"
SINKHORN_METHODS = (sinkhorn.ACCEL, sinkhorn.UNACCEL, sinkhorn.SCALING, BOTH)
ORACLE_METHODS = (oracle.MIRROR_DESCENT, oracle.DUAL_NEWTON)
LOG_LEVELS = ("debug", "info", "warning", "error")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    subcommand: typing.Optional[str] = None
    inputs: typing.Tuple[str, ...] = ()
    epsilon: float = 0.1
    mu: typing.Optional[float] = None
    sigma: float = 1e-6
    mode: str = bsgame.PRACTICAL
    audit: bool = False
    seed: int = 0
    c_T: float = 4.0
    c_K: float = 4.0
    output: typing.Optional[str] = None
    kind: str = ddbm.BOX_SIMPLEX
    method: typing.Optional[str] = None
    reg_denominator: float = 256.0
    l1_divisor: float = 1100.0
    entropy_l1_const: float = sinkhorn.ENTROPY_L1_CONST
    max_outer: typing.Optional[int] = None
    no_timestamps: bool = False
    log_level: typing.Optional[str] = None
    trace_csv: typing.Optional[str] = None
    rows: int = 8
    cols: int = 8
    density: float = 0.3

    def ddbm_config(self) -> ddbm.DdbmConfig:
        return ddbm.DdbmConfig(kind=self.kind, mode=self.mode, reg_denominator=self.reg_denominator,
                               l1_divisor=self.l1_divisor, audit=self.audit, timestamps=not self.no_timestamps,
                               max_outer=self.max_outer, c_T=self.c_T, c_K=self.c_K)

    def solve_args(self) -> typing.Dict[str, typing.Any]:
        return {"c_T": self.c_T, "c_K": self.c_K, "max_outer": self.max_outer, "timestamps": not self.no_timestamps}


def _choice(options: typing.Sequence[str]) -> typing.Callable[[typing.Any], str]:
    def convert(value: typing.Any) -> str:
        value = str(value)
        if value not in options:
            raise ValueError("expected one of {}".format(", ".join(options)))
        return value
    return convert


def _boolean(value: typing.Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _optional(convert: typing.Callable[[typing.Any], typing.Any]) -> typing.Callable[[typing.Any], typing.Any]:
    def wrapped(value: typing.Any) -> typing.Any:
        if value is None or str(value).strip().lower() in ("none", "-"):
            return None
        return convert(value)
    return wrapped


_KEY_TYPES: typing.Dict[str, typing.Callable[[typing.Any], typing.Any]] = {
    "epsilon": float,
    "mu": _optional(float),
    "sigma": float,
    "mode": _choice(bsgame.MODES),
    "audit": _boolean,
    "seed": int,
    "c_T": float,
    "c_K": float,
    "output": _optional(str),
    "kind": _choice(ddbm.KINDS),
    "method": _optional(str),
    "reg_denominator": float,
    "l1_divisor": float,
    "entropy_l1_const": float,
    "max_outer": _optional(int),
    "no_timestamps": _boolean,
    "log_level": _optional(_choice(LOG_LEVELS)),
    "trace_csv": _optional(str),
    "rows": int,
    "cols": int,
    "density": float,
}


def _parse_key_values(text: str, path: str) -> typing.List[typing.Tuple[int, str, str]]:
    # epsilon = 0.1
    # mode = practical   # trailing comments are allowed
    items = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError("expected 'key=value', found '{}'".format(line), path, number)
        key, value = line.split("=", 1)
        items.append((number, key.strip(), value.strip()))
    return items


def _process_yaml(text: str, path: str) -> typing.List[typing.Tuple[typing.Optional[int], str, typing.Any]]:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise FormatError("invalid YAML: {}".format(e), path) from None
    if data is None:
        return []
    if not isinstance(data, dict):
        raise FormatError("config must be a mapping, found {}".format(type(data).__name__), path)
    return [(None, str(key), value) for key, value in data.items()]


def _process_values(items: typing.Iterable[typing.Tuple[typing.Optional[int], str, typing.Any]], path: str) \
        -> typing.Dict[str, typing.Any]:
    values = {}
    for number, key, raw in items:
        if key not in _KEY_TYPES:
            raise FormatError("unknown config key '{}'".format(key), path, number)
        try:
            values[key] = _KEY_TYPES[key](raw)
        except (TypeError, ValueError) as e:
            raise FormatError("bad value '{}' for '{}': {}".format(raw, key, e), path, number) from None
    return values


def load_config_file(path: str) -> typing.Dict[str, typing.Any]:
    """
    Returns the typed key/value pairs of a config file.
    """
    with open(path) as f:
        text = f.read()
    if os.path.splitext(path)[1].lower() in (".yaml", ".yml"):
        return _process_values(_process_yaml(text, path), path)
    return _process_values(_parse_key_values(text, path), path)


def add_config_args(parser: argparse.ArgumentParser):
    """
    Configures parser with the shared run flags. Every flag defaults to None
    so that from_args() can tell given flags from absent ones.
    """
    group = parser.add_argument_group("run configuration")
    group.add_argument("--config", help="key=value or YAML file with run settings (flags override it)")
    group.add_argument("--epsilon", "--eps", type=float, help="accuracy target")
    group.add_argument("--mu", type=float, help="entropic regularization override")
    group.add_argument("--sigma", type=float, help="certified gap target for solve")
    group.add_argument("--mode", choices=bsgame.MODES, help="solver constants (default practical)")
    group.add_argument("--audit", action="store_const", const=True, help="check every event against an exact MCM")
    group.add_argument("--seed", type=int, help="seed for generators and random adversaries")
    group.add_argument("--c-T", dest="c_T", type=float, help="inner iteration count multiplier")
    group.add_argument("--c-K", dest="c_K", type=float, help="outer iteration count multiplier")
    group.add_argument("--output", "-o", help="output path (stdout when omitted)")
    group.add_argument("--kind", choices=ddbm.KINDS, help="matching objective kind")
    group.add_argument("--method", help="sinkhorn method or oracle method")
    group.add_argument("--reg-denominator", dest="reg_denominator", type=float)
    group.add_argument("--l1-divisor", dest="l1_divisor", type=float)
    group.add_argument("--entropy-l1-const", dest="entropy_l1_const", type=float)
    group.add_argument("--max-outer", dest="max_outer", type=int, help="cap on outer iterations")
    group.add_argument("--no-timestamps", dest="no_timestamps", action="store_const", const=True,
                       help="write null elapsed times for reproducible output")
    group.add_argument("--log-level", dest="log_level", choices=LOG_LEVELS)
    group.add_argument("--trace-csv", dest="trace_csv", help="write the per-iteration solve trace here")
    group.add_argument("--rows", type=int, help="generated instance rows (left vertices)")
    group.add_argument("--cols", type=int, help="generated instance columns (right vertices)")
    group.add_argument("--density", type=float, help="generated instance density")


def from_args(args: argparse.Namespace) -> RunConfig:
    """
    Builds the RunConfig from defaults, then --config, then given flags.
    """
    values: typing.Dict[str, typing.Any] = {}
    config_path = getattr(args, "config", None)
    if config_path is not None:
        values.update(load_config_file(config_path))
    for key in _KEY_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    values["subcommand"] = getattr(args, "subcommand", None)
    values["inputs"] = tuple(getattr(args, "inputs", ()) or ())

    config = RunConfig(**values)
    if config.method is not None:
        allowed = SINKHORN_METHODS if config.subcommand == "sinkhorn" else \
            ORACLE_METHODS if config.subcommand == "oracle" else ()
        if config.method not in allowed:
            raise FormatError("method '{}' does not apply to {}".format(config.method, config.subcommand),
                              config_path or "<flags>")
    logger.debug("run configuration: %s", config)
    return config
