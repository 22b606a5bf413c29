#!/usr/bin/env python3
"""Sweep the simulated-mantissa floor over custom widths and spacings.

Writes cells.csv plus the per-width scaling plots under the usual
out/D2/<timestamp>/ directory. The full grid takes a minute or two; a
reduced sweep like `--ps 10,20 --dxs 0.1` finishes in seconds.
"""

import argparse
import sys

from cauchylab import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ps", default="10,20,30,40,53",
                    help="comma list of mantissa widths")
    ap.add_argument("--dxs", default="0.1,0.02,0.004",
                    help="comma list of grid spacings")
    ap.add_argument("--out", default="out")
    args = ap.parse_args()

    sys.exit(cli.run(["exp", "D2", "--ps", args.ps, "--dxs", args.dxs,
                      "--out", args.out]))


if __name__ == "__main__":
    main()
