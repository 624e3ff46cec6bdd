#!/usr/bin/env python3
"""Synthetic nonlinear-regression posterior sampled with the heavy-tailed
multivariate-t proposal family (mixture init from multistart optimization,
covariance inflation 2)."""

import sys

from isalib.cli import main

if __name__ == "__main__":
    sys.exit(
        main(["run", "--config", "configs/regression_student_t.json"] + sys.argv[1:])
    )
