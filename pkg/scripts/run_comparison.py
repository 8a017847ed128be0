"""Run the comparison suite and print where its CSVs landed."""

import argparse
from pathlib import Path

from prollect.harness import experiments as ex


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out-dir", type=Path, default=Path("results"))
    p.add_argument("--seeds", type=int, default=None, help="Monte Carlo seeds 0..seeds-1")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    kw = {} if args.seeds is None else {"seeds": args.seeds}
    ex.SUITES["comparison"](args.out_dir, workers=args.workers, **kw)
    print(f"wrote comparison results to {args.out_dir}")


if __name__ == "__main__":
    main()
