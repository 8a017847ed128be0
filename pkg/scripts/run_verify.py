"""Run every property check and write the verification report CSV."""

import argparse
import sys
from pathlib import Path

from prollect import verify


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out-dir", type=Path, default=Path("results"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="smaller trial counts")
    args = p.parse_args()
    reports = verify.run_all(seed=args.seed, quick=args.quick)
    path = verify.write_report(args.out_dir / "verify_report.csv", reports)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check} margin={r.margin:.6g}")
    print(f"wrote {path}")
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
