"""Construct and verify the k = 1 desk configuration, report the exit code.

    python3 scripts/desk_run.py [--out runs/desk] [--smax 16384]
"""

import argparse
import sys
from pathlib import Path

from wellapprox import cli

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, default=ROOT / "configs" / "desk_k1.json")
    p.add_argument("--out", type=Path, default=ROOT / "runs" / "desk")
    p.add_argument("--smax", type=int, default=None)
    args = p.parse_args()
    extra = ["--smax", str(args.smax)] if args.smax else []
    base = ["--config", str(args.config), "--out", str(args.out), *extra]
    code = cli.main(["construct", *base])
    if code != 0:
        return code
    code = cli.main(["verify", *base])
    print(f"exit code {code}; reports in {args.out / 'reports'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
