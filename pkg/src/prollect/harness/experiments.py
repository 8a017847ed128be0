"""Monte Carlo execution and the comparison, ablation, scaling and comm suites.

Seeds are the integers ``0..mc-1``. Runs may execute in any order or in
parallel; every CSV is written by one writer after a deterministic sort, so
only the wall-clock runtime columns depend on the machine.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..comms import RNG_ALGORITHM, CommConfig
from ..core import TimingConfig
from ..metrics import RUN_FIELDS, AggregateRow, RunMetrics, aggregate, fmt
from .runner import METHODS, ExperimentConfig, projection_signature, run_single
from .scenarios import DEFAULT_N, KINDS, ScenarioSpec

RUNTIME_COLUMNS = ("runtime_per_call_us", "runtime_us_med", "runtime_us_q25", "runtime_us_q75")
P_DROP_GRID = tuple(round(0.05 * k, 2) for k in range(11))
ABLATION_ALPHAS = (1, 2, 3, 5)
COMM_ALPHAS = (1, 3, 5)
COMM_DELAYS = (0, 1)
SCALING_N = {"intersection": (20, 40, 80), "random": (20, 40, 80), "bottleneck": (16, 32, 64)}


@dataclass(frozen=True)
class Job:
    """One seeded run; ``key`` orders the output rows."""

    scenario: str
    n_agents: int
    seed: int
    exp: ExperimentConfig
    key: tuple = ()

    def run(self) -> RunMetrics:
        # the comms stream follows the run seed so seeds vary blackout patterns
        exp = replace(self.exp, comm=replace(self.exp.comm, seed=self.seed))
        return run_single(ScenarioSpec(self.scenario, self.n_agents, self.seed), exp).metrics


@dataclass(frozen=True)
class RunRow:
    scenario: str
    method: str
    n_agents: int
    alpha: float
    preemption: bool
    p_drop: float
    delay: int
    seed: int
    metrics: RunMetrics


def _run(job: Job) -> RunMetrics:
    return job.run()


def run_jobs(jobs: Sequence[Job], workers: int = 1) -> list[RunRow]:
    """Execute ``jobs`` and return rows sorted by ``(key, seed)``."""
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_run, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_run(j) for j in jobs]
    rows = [(j.key, j.seed, RunRow(j.scenario, j.exp.method, j.n_agents, j.exp.timing.alpha,
                                   j.exp.preemption_enabled, j.exp.comm.p_drop,
                                   j.exp.comm.delay_cycles, j.seed, m))
            for j, m in zip(jobs, results)]
    rows.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in rows]


def seed_jobs(scenario: str, n_agents: int, exp: ExperimentConfig, mc: int,
              key: tuple = ()) -> list[Job]:
    return [Job(scenario, n_agents, s, exp, key) for s in range(mc)]


def run_monte_carlo(scenario: str, exp: ExperimentConfig, n_agents: int | None = None,
                    mc: int | None = None, workers: int = 1) -> tuple[AggregateRow, list[RunRow]]:
    """Seeds ``0..mc-1`` of one (scenario, method) cell, aggregated."""
    n = DEFAULT_N[scenario] if n_agents is None else n_agents
    mc = exp.seeds if mc is None else mc
    rows = run_jobs(seed_jobs(scenario, n, exp, mc, (scenario, exp.method)), workers)
    return aggregate([r.metrics for r in rows]), rows


def _groups(rows: Iterable[RunRow], key) -> dict:
    out: dict = {}
    for r in rows:
        out.setdefault(key(r), []).append(r.metrics)
    return out


# ---------------------------------------------------------------------------
# CSV emission

RUN_HEADER = ["scenario", "method", "n_agents", "alpha", "preemption", "p_drop", "delay", "seed",
              *RUN_FIELDS]


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or isinstance(v, float):
        return fmt(v)
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue())
    return path


def write_runs(path: Path, rows: Sequence[RunRow]) -> Path:
    return write_csv(path, RUN_HEADER, (
        [r.scenario, r.method, r.n_agents, float(r.alpha), r.preemption, float(r.p_drop), r.delay,
         r.seed, *(getattr(r.metrics, f) for f in RUN_FIELDS)] for r in rows))


SUMMARY_METRICS = ("completion_time", "min_dist", "avg_speed", "avg_dv", "preempt_rate",
                   "proj_act", "runtime_us")


def summary_header(lead: Sequence[str]) -> list[str]:
    cols = [*lead, "n_runs", "completion_rate_pct", "collision_rate_pct", "deadlock_rate_pct"]
    for m in SUMMARY_METRICS:
        cols += [f"{m}_med", f"{m}_q25", f"{m}_q75"]
    return cols


def summary_cells(agg: AggregateRow) -> list:
    out = [agg.n_runs, agg.completion_rate_pct, agg.collision_rate_pct, agg.deadlock_rate_pct]
    for m in SUMMARY_METRICS:
        q = getattr(agg, m)
        out += [None, None, None] if q is None else [q.median, q.q25, q.q75]
    return out


def write_metadata(out_dir: Path, exp: ExperimentConfig, suite: str, seeds: int) -> Path:
    """Configuration actually used, plus the identity of the shared projection."""
    meta = {
        "suite": suite,
        "seeds": list(range(seeds)),
        "rng": RNG_ALGORITHM,
        "projection_signature": projection_signature(exp.projection),
        "dv_averaging": "agent-ticks",
        "config": asdict(exp),
    }
    path = out_dir / f"{suite}_metadata.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    return path


# ---------------------------------------------------------------------------
# suites


def suite_comparison(out_dir: Path, seeds: int = 30, workers: int = 1,
                     base: ExperimentConfig | None = None,
                     scenarios: Sequence[str] = KINDS) -> dict[tuple[str, str], AggregateRow]:
    """Every scenario at its default size against every method."""
    base = base or ExperimentConfig()
    jobs = [j for sc in scenarios for m in METHODS
            for j in seed_jobs(sc, DEFAULT_N[sc], replace(base, method=m), seeds, (sc, METHODS.index(m)))]
    rows = run_jobs(jobs, workers)
    aggs = {k: aggregate(v) for k, v in _groups(rows, lambda r: (r.scenario, r.method)).items()}
    order = sorted(aggs, key=lambda k: (k[0], METHODS.index(k[1])))
    write_runs(out_dir / "comparison_runs.csv", rows)
    write_csv(out_dir / "comparison_summary.csv", summary_header(["scenario", "method"]),
              ([sc, m, *summary_cells(aggs[(sc, m)])] for sc, m in order))
    write_metadata(out_dir, base, "comparison", seeds)
    return aggs


def suite_ablation(out_dir: Path, seeds: int = 10, workers: int = 1,
                   base: ExperimentConfig | None = None,
                   scenarios: Sequence[str] = ("intersection", "random"),
                   alphas: Sequence[float] = ABLATION_ALPHAS) -> dict[tuple, AggregateRow]:
    """Prollect with the look-ahead preemption on and off across frozen-window lengths."""
    base = replace(base or ExperimentConfig(), method="prollect")
    jobs = []
    for sc in scenarios:
        for a in alphas:
            for on in (True, False):
                exp = replace(base, timing=TimingConfig.from_alpha(a), preemption_enabled=on)
                jobs += seed_jobs(sc, DEFAULT_N[sc], exp, seeds, (sc, a, not on))
    rows = run_jobs(jobs, workers)
    aggs = {k: aggregate(v) for k, v in
            _groups(rows, lambda r: (r.scenario, r.alpha, r.preemption)).items()}
    order = sorted(aggs, key=lambda k: (k[0], k[1], not k[2]))
    write_runs(out_dir / "ablation_runs.csv", rows)
    write_csv(out_dir / "ablation_summary.csv",
              summary_header(["scenario", "alpha", "preemption"]),
              ([sc, float(a), on, *summary_cells(aggs[(sc, a, on)])] for sc, a, on in order))
    write_metadata(out_dir, base, "ablation", seeds)
    return aggs


SCALING_HEADER = ["n_agents", "completion_rate_pct", "runtime_us_med", "avg_dv_med",
                  "preempt_rate_med"]


def suite_scaling(out_dir: Path, seeds: int = 10, workers: int = 1,
                  base: ExperimentConfig | None = None,
                  sizes: dict[str, Sequence[int]] | None = None) -> dict[tuple, AggregateRow]:
    """Team size sweep; one plot-data file per (scenario, method)."""
    base = base or ExperimentConfig()
    sizes = SCALING_N if sizes is None else sizes
    jobs = [j for sc, ns in sizes.items() for n in ns for m in METHODS
            for j in seed_jobs(sc, n, replace(base, method=m), seeds, (sc, METHODS.index(m), n))]
    rows = run_jobs(jobs, workers)
    aggs = {k: aggregate(v) for k, v in
            _groups(rows, lambda r: (r.scenario, r.method, r.n_agents)).items()}
    order = sorted(aggs, key=lambda k: (k[0], METHODS.index(k[1]), k[2]))
    write_runs(out_dir / "scaling_runs.csv", rows)
    write_csv(out_dir / "scaling_summary.csv", ["scenario", "method", *SCALING_HEADER],
              ([sc, m, *_scaling_cells(n, aggs[(sc, m, n)])] for sc, m, n in order))
    for sc in sizes:
        for m in METHODS:
            write_csv(out_dir / "scaling_plot_data" / f"{sc}_{m}.csv", SCALING_HEADER,
                      (_scaling_cells(n, aggs[(sc, m, n)]) for n in sizes[sc]))
    write_metadata(out_dir, base, "scaling", seeds)
    return aggs


def _scaling_cells(n: int, agg: AggregateRow) -> list:
    return [n, agg.completion_rate_pct, agg.runtime_us.median, agg.avg_dv.median,
            agg.preempt_rate.median]


def suite_comm(out_dir: Path, seeds: int = 10, workers: int = 1,
               base: ExperimentConfig | None = None, alphas: Sequence[float] = COMM_ALPHAS,
               delays: Sequence[int] = COMM_DELAYS,
               p_grid: Sequence[float] = P_DROP_GRID) -> dict[tuple, float]:
    """Intersection completion under broadcast blackouts and delivery delay."""
    base = replace(base or ExperimentConfig(), method="prollect")
    jobs = []
    for a in alphas:
        for d in delays:
            for p in p_grid:
                exp = replace(base, timing=TimingConfig.from_alpha(a),
                              comm=CommConfig(p_drop=p, delay_cycles=d))
                jobs += seed_jobs("intersection", DEFAULT_N["intersection"], exp, seeds, (a, d, p))
    rows = run_jobs(jobs, workers)
    comp = {k: 100.0 * sum(m.completed for m in v) / len(v)
            for k, v in _groups(rows, lambda r: (r.alpha, r.delay, r.p_drop)).items()}
    write_runs(out_dir / "comm_runs.csv", rows)
    for a in alphas:
        for d in delays:
            write_csv(out_dir / f"dropout_delay{d}_alpha{a:g}.csv", ["p_drop", "completion_rate_pct"],
                      ([float(p), comp[(a, d, p)]] for p in p_grid))
        for p in p_grid:
            write_csv(out_dir / f"delay_p{round(100 * p):02d}_alpha{a:g}.csv",
                      ["delay_steps", "completion_rate_pct"],
                      ([d, comp[(a, d, p)]] for d in delays))
    write_metadata(out_dir, base, "comm", seeds)
    return comp


SUITES = {"comparison": suite_comparison, "ablation": suite_ablation,
          "scaling": suite_scaling, "comm": suite_comm}


# ---------------------------------------------------------------------------
# report


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _num(s: str, digits: int) -> str:
    return "--" if s in ("--", "") else f"{float(s):.{digits}f}"


def _qcell(row: dict[str, str], name: str, digits: int = 3) -> str:
    med = row[f"{name}_med"]
    if med == "--":
        return "--"
    return f"{_num(med, digits)} [{_num(row[f'{name}_q25'], digits)}, {_num(row[f'{name}_q75'], digits)}]"


REPORT_COLUMNS = ("Method", "Comp.", "Coll.", "Time (s)", "Min Dist. (m)", "dv", "Preempt",
                  "ProjAct")


def format_comparison(rows: Sequence[dict[str, str]]) -> str:
    """Per-scenario tables of median [IQR] cells from a comparison summary."""
    out = []
    for sc in sorted({r["scenario"] for r in rows}):
        table = [REPORT_COLUMNS]
        for r in (r for r in rows if r["scenario"] == sc):
            table.append((r["method"], f"{float(r['completion_rate_pct']):.1f}%",
                          f"{float(r['collision_rate_pct']):.1f}%",
                          _qcell(r, "completion_time", 2), _qcell(r, "min_dist", 2),
                          _qcell(r, "avg_dv"), _qcell(r, "preempt_rate"), _qcell(r, "proj_act")))
        widths = [max(len(str(c[i])) for c in table) for i in range(len(REPORT_COLUMNS))]
        out.append(f"{sc}")
        for line in table:
            out.append("  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip())
        out.append("")
    return "\n".join(out)


def format_csv_table(rows: Sequence[dict[str, str]]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    widths = [max(len(c), *(len(r[c]) for r in rows)) for c in cols]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    lines += ["  ".join(r[c].ljust(w) for c, w in zip(cols, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"
