"""Run the jump study with default settings.

Usage: python3 scripts/run_jump.py [OUT_DIR] [--workers N] [--config PATH]
"""

import sys

from morphopt.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    out = "results/jump"
    if args and not args[0].startswith("-"):
        out, args = args[0], args[1:]
    sys.exit(main(["jump", "--out", out, *args]))
