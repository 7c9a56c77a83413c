"""Run the sweep-gear study with default settings.

Usage: python3 scripts/run_sweep_gear.py [OUT_DIR] [--workers N] [--config PATH]
"""

import sys

from morphopt.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    out = "results/sweep-gear"
    if args and not args[0].startswith("-"):
        out, args = args[0], args[1:]
    sys.exit(main(["sweep-gear", "--out", out, *args]))
