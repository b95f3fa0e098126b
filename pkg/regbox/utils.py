# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
A helper module used across regbox.
"""

from __future__ import annotations
import logging
import math
import os
import time
import typing


LOG_ENV_VAR = "BSG_LOG"

_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}


def log_level(name: typing.Optional[str] = None) -> int:
    """
    Returns the logging level named by name, or by the BSG_LOG environment
    variable when no name is given. Unknown names fall back to INFO.
    """
    if name is None:
        name = os.environ.get(LOG_ENV_VAR, "info")
    return _LEVELS.get(name.strip().lower(), logging.INFO)


def set_log_level(name: typing.Optional[str]):
    """
    Applies the given level to every regbox logger, including the ones
    created at import time.
    """
    level = log_level(name)
    logging.getLogger("regbox").setLevel(level)
    for logger_name in list(logging.root.manager.loggerDict):
        if logger_name.startswith("regbox."):
            logging.getLogger(logger_name).setLevel(level)


class Stopwatch:
    """
    Measures wall time in nanoseconds since construction. A disabled
    stopwatch always reads None so that outputs can stay byte-identical
    between runs.
    """

    def __init__(self, enabled: bool = True):
        self._enabled = enabled
        self._start = time.perf_counter_ns()

    def elapsed_ns(self) -> typing.Optional[int]:
        if not self._enabled:
            return None
        return time.perf_counter_ns() - self._start

    def elapsed_secs(self) -> float:
        return (time.perf_counter_ns() - self._start) / 1e9


def safe_log_dim(dim: int) -> float:
    """
    log(dim) floored at log(2); several step sizes and budgets divide by it.
    """
    return math.log(max(dim, 2))
