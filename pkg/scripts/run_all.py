#!/usr/bin/env python3
"""Run every experiment with plots and exit with the combined verdict.

Equivalent to `cauchylab exp all`; kept as a script so a full
reproduction is one command from a fresh checkout.
"""

import argparse
import sys

from cauchylab import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--cache", default="cache")
    ap.add_argument("--config", help="optional TOML config file")
    args = ap.parse_args()

    argv = ["exp", "all", "--out", args.out, "--cache", args.cache]
    if args.config:
        argv += ["--config", args.config]
    sys.exit(cli.run(argv))


if __name__ == "__main__":
    main()
