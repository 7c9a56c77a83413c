"""Run the sweep-scale study with default settings.

Usage: python3 scripts/run_sweep_scale.py [OUT_DIR] [--workers N] [--config PATH]
"""

import sys

from morphopt.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    out = "results/sweep-scale"
    if args and not args[0].startswith("-"):
        out, args = args[0], args[1:]
    sys.exit(main(["sweep-scale", "--out", out, *args]))
