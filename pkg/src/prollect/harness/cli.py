"""Command line: single experiments, suites, verification checks and report tables."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..comms import CommConfig
from ..core import TimingConfig
from ..metrics import fmt
from .. import verify
from . import experiments as ex
from .runner import METHODS, ExperimentConfig
from .scenarios import DEFAULT_N, KINDS


def _partition(text: str) -> tuple[int, int]:
    try:
        nx, ny = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected nx,ny") from None
    return nx, ny


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(method=args.method, timing=TimingConfig.from_alpha(args.alpha),
                            comm=CommConfig(p_drop=args.p_drop, delay_cycles=args.delay),
                            preemption_enabled=args.preempt, seeds=args.seeds,
                            partition=args.partition)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prollect", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seeds", type=int, default=None, help="Monte Carlo seeds 0..seeds-1")
    common.add_argument("--out-dir", type=Path, default=Path("results"))
    common.add_argument("--workers", type=int, default=1, help="worker processes")

    run = sub.add_parser("run", parents=[common], help="one scenario and method")
    run.add_argument("--scenario", choices=KINDS, default="intersection")
    run.add_argument("--method", choices=METHODS, default="prollect")
    run.add_argument("--n", type=int, default=None, help="number of agents")
    run.add_argument("--alpha", type=float, default=1.0, help="frozen window in cycles")
    run.add_argument("--p-drop", type=float, default=0.0, help="broadcast blackout probability")
    run.add_argument("--delay", type=int, default=0, help="delivery delay in cycles")
    run.add_argument("--preempt", type=_on_off, default=True, metavar="on|off")
    run.add_argument("--partition", type=_partition, default=None, metavar="nx,ny")

    suite = sub.add_parser("suite", parents=[common], help="comparison, ablation, scaling or comm")
    suite.add_argument("name", choices=sorted(ex.SUITES))

    ver = sub.add_parser("verify", parents=[common], help="property checks")
    ver.add_argument("--quick", action="store_true", help="smaller trial counts")

    rep = sub.add_parser("report", help="tables from suite CSVs")
    rep.add_argument("--out-dir", type=Path, default=Path("results"))
    return p


def cmd_run(args) -> int:
    if args.seeds is None:
        args.seeds = 1
    exp = experiment_from_args(args)
    n = DEFAULT_N[args.scenario] if args.n is None else args.n
    agg, rows = ex.run_monte_carlo(args.scenario, exp, n, args.seeds, args.workers)
    path = ex.write_runs(args.out_dir / f"run_{args.scenario}_{args.method}_n{n}.csv", rows)
    for r in rows:
        m = r.metrics
        print(f"seed {r.seed}: completed={m.completed} collision={m.collision} "
              f"time={fmt(m.completion_time)} avg_dv={m.avg_dv:.3f} "
              f"preempt={m.preempt_rate:.3f} proj_act={m.proj_act:.3f}")
    print(f"completion {agg.completion_rate_pct:.1f}%  collision {agg.collision_rate_pct:.1f}%  "
          f"avg_dv median {agg.avg_dv.median:.3f}")
    print(f"wrote {path}")
    return 0


def cmd_suite(args) -> int:
    kw = {} if args.seeds is None else {"seeds": args.seeds}
    ex.SUITES[args.name](args.out_dir, workers=args.workers, **kw)
    print(f"wrote {args.name} results to {args.out_dir}")
    return 0


def cmd_verify(args) -> int:
    reports = verify.run_all(seed=0, quick=args.quick)
    path = verify.write_report(args.out_dir / "verify_report.csv", reports)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check} margin={r.margin:.6g} trials={r.trials}")
    print(f"wrote {path}")
    return 0 if all(r.passed for r in reports) else 1


def cmd_report(args) -> int:
    d = args.out_dir
    found = False
    comp = d / "comparison_summary.csv"
    if comp.exists():
        found = True
        print(ex.format_comparison(ex.read_csv(comp)))
    for name in ("ablation_summary.csv", "scaling_summary.csv", "verify_report.csv"):
        path = d / name
        if path.exists():
            found = True
            rows = ex.read_csv(path)
            if name == "ablation_summary.csv":
                keep = ["scenario", "alpha", "preemption", "completion_rate_pct", "avg_dv_med",
                        "preempt_rate_med", "proj_act_med"]
                rows = [{k: r[k] for k in keep} for r in rows]
            print(name)
            print(ex.format_csv_table(rows))
    if not found:
        print(f"no suite results in {d}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return {"run": cmd_run, "suite": cmd_suite, "verify": cmd_verify,
            "report": cmd_report}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
