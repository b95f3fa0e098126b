#!/usr/bin/env python3
# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
#
# Runs the regbox solvers on instance files; see ./regbox.py --help for the
# subcommands and the exit code contract.
#
# Usage: ./regbox.py solve game.txt --sigma 1e-6
#        ./regbox.py ddbm graph.txt stream.txt --epsilon 0.1 --audit
import sys

import regbox.cli


def parse_args():
    return regbox.cli.parse_args()


def main(args):
    return regbox.cli.main(args)


if __name__ == "__main__":
    args = parse_args()
    sys.exit(main(args))
