#!/usr/bin/env python3
"""Reproduce the adaptive-refinement study for the boundary-layer datum.

Runs until the element count first exceeds --target-n (default 278) and
writes results/adaptive/table2.{csv,md} plus per-step mesh snapshots.
"""

import sys

from heatbem.cli import main

if __name__ == "__main__":
    args = ["study-adaptive", "--example", "2", "--out", "results/adaptive",
            "--kappa", "both"] + sys.argv[1:]
    sys.exit(main(args))
