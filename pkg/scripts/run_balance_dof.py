"""Run the balance-dof study with default settings.

Usage: python3 scripts/run_balance_dof.py [OUT_DIR] [--workers N] [--config PATH]
"""

import sys

from morphopt.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    out = "results/balance-dof"
    if args and not args[0].startswith("-"):
        out, args = args[0], args[1:]
    sys.exit(main(["balance-dof", "--out", out, *args]))
