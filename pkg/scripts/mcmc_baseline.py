#!/usr/bin/env python3
"""Long stretch-move baseline on the toy target: runs 4 walkers for 10^5
steps and reports the per-coordinate integrated autocorrelation time, the
cost yardstick that iterative importance sampling is measured against."""

import sys

from isalib.cli import main

if __name__ == "__main__":
    sys.exit(
        main(["mcmc-baseline", "--config", "configs/toy2d_baseline.json"] + sys.argv[1:])
    )
