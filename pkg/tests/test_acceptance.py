"""Acceptance suite: one test per criterion, each printing a PASS or FAIL line.

The comparison, ablation and comm sweeps run once per session and are shared
by the criteria that read them. Expect a few minutes of wall clock.
"""

import csv
import math

import pytest

import test_hierarchy
import test_safety
from prollect import verify
from prollect.harness import experiments as ex
from prollect.harness.runner import METHODS
from prollect.timing import DwellTimeViolation, check_dwell_condition
from prollect.core import TimingConfig

SEEDS = 30
SWEEP_SEEDS = 10


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="session")
def comparison(tmp_path_factory):
    return ex.suite_comparison(tmp_path_factory.mktemp("comparison"), seeds=SEEDS)


@pytest.fixture(scope="session")
def ablation(tmp_path_factory):
    return ex.suite_ablation(tmp_path_factory.mktemp("ablation"), seeds=SWEEP_SEEDS,
                             scenarios=("intersection",))


@pytest.fixture(scope="session")
def comm(tmp_path_factory):
    return ex.suite_comm(tmp_path_factory.mktemp("comm"), seeds=SWEEP_SEEDS, alphas=(1, 5),
                         delays=(1,))


def test_criterion_01_intersection_standoff(comparison, capsys):
    want = {"vo": 0.0, "orca": 0.0, "dmpc": 100.0, "prollect": 100.0}
    got = {m: comparison[("intersection", m)].completion_rate_pct for m in METHODS}
    coll = {m: comparison[("intersection", m)].collision_rate_pct for m in METHODS}
    ok = got == want and all(c == 0.0 for c in coll.values())
    report(capsys, 1, ok, f"completion {got} collisions {coll}")


def test_criterion_02_disruption_ordering(comparison, capsys):
    row = {m: comparison[("intersection", m)] for m in METHODS}
    dv = {m: row[m].avg_dv.median for m in METHODS}
    pre = row["prollect"].preempt_rate.median
    pa_p, pa_v = row["prollect"].proj_act.median, row["vo"].proj_act.median
    ok = (dv["prollect"] <= 0.2 and dv["prollect"] <= dv["dmpc"] <= dv["vo"] and pre <= 0.15
          and 3.0 * pa_p < pa_v)
    report(capsys, 2, ok, f"dv {dv} preempt {pre:.3f} proj_act prollect {pa_p:.3f} vo {pa_v:.3f}")


def test_criterion_03_bottleneck(comparison, capsys):
    row = {m: comparison[("bottleneck", m)] for m in METHODS}
    comp = {m: row[m].completion_rate_pct for m in METHODS}
    coll = {m: row[m].collision_rate_pct for m in METHODS}
    dv = row["prollect"].avg_dv.median
    ok = (all(comp[m] == 100.0 for m in ("vo", "dmpc", "prollect")) and comp["orca"] <= 20.0
          and all(c == 0.0 for c in coll.values()) and dv <= 0.1)
    report(capsys, 3, ok, f"completion {comp} collisions {coll} prollect dv {dv:.3f}")


def test_criterion_04_random_waypoint(comparison, capsys):
    row = {m: comparison[("random", m)] for m in METHODS}
    coll = {m: row[m].collision_rate_pct for m in METHODS}
    comp = row["prollect"].completion_rate_pct
    dv_d, dv_p = row["dmpc"].avg_dv.median, row["prollect"].avg_dv.median
    ok = all(c == 0.0 for c in coll.values()) and comp >= 90.0 and dv_d >= 5.0 * dv_p
    report(capsys, 4, ok, f"collisions {coll} prollect completion {comp:.1f} "
                          f"dv dmpc {dv_d:.3f} prollect {dv_p:.3f} ratio {dv_d / dv_p:.2f}")


def test_criterion_05_ablation(ablation, capsys):
    on = {a: ablation[("intersection", a, True)].completion_rate_pct for a in ex.ABLATION_ALPHAS}
    off = {a: ablation[("intersection", a, False)].completion_rate_pct for a in ex.ABLATION_ALPHAS}
    ok = all(v == 100.0 for v in on.values()) and all(v == 0.0 for v in off.values())
    report(capsys, 5, ok, f"preempt on {on} off {off}")


def test_criterion_06_comm_sweep(comm, capsys):
    grid = ex.P_DROP_GRID
    a1 = [comm[(1, 1, p)] for p in grid]
    a5 = [comm[(5, 1, p)] for p in grid]
    monotone = all(b <= a for a, b in zip(a1, a1[1:]))
    dominates = all(comm[(5, 1, p)] >= comm[(1, 1, p)] for p in grid if p >= 0.2)
    report(capsys, 6, monotone and dominates, f"alpha1 {a1} alpha5 {a5}")


def test_criterion_07_blackout_rule(capsys):
    reps = [verify.check_blackout_rule(eps, p, 100_000)
            for eps in (0.05, 0.01) for p in (0.1, 0.2, 0.3)]
    from prollect.comms import required_frozen_cycles
    controls = [verify.check_blackout_rule(eps, p, 100_000,
                                           k_f=required_frozen_cycles(eps, p) - 1)
                for eps in (0.05, 0.01) for p in (0.1, 0.2, 0.3)]
    ok = all(r.passed for r in reps) and not any(r.passed for r in controls)
    report(capsys, 7, ok, f"worst margin {min(r.margin for r in reps):.5f} "
                          f"controls failing {sum(not r.passed for r in controls)}/6")


def test_criterion_08_timing_audit(capsys):
    cfg = TimingConfig()
    rep = verify.check_dwell_time(cfg, n_cycles=10_000, jitter=0.5)
    rejected = False
    try:
        check_dwell_condition(TimingConfig(t_step=0.2, t_frozen=0.2, t_adj_max=0.2))
    except DwellTimeViolation:
        rejected = True
    report(capsys, 8, rep.passed and rejected, f"dwell margin {rep.margin:.6f} rejects "
                                               f"t_adj_max = t_step: {rejected}")


def test_criterion_09_iss_bound(capsys):
    rep = verify.check_iss_bound(verify.iss_grid(20), samples=3)
    report(capsys, 9, rep.passed and rep.trials == 60, f"margin {rep.margin:.6f} trials {rep.trials}")


def test_criterion_10_property_suites(capsys):
    test_safety.test_idempotent_on_safe_inputs()
    test_safety.test_mirror_symmetry()
    test_safety.test_sound_against_scaling_oracle()
    test_safety.test_scaling_matches_oracle_when_scaling_suffices()
    feas = verify.check_recursive_feasibility(trials=100)
    test_hierarchy.test_handover_continuity_partition_2x1()
    report(capsys, 10, feas.passed, f"projection properties, feasibility margin {feas.margin:.4f}, "
                                    f"handover continuity")


def _strip(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return [{k: v for k, v in r.items() if k not in ex.RUNTIME_COLUMNS} for r in rows]


def test_criterion_11_determinism(tmp_path, capsys):
    one, two = tmp_path / "w1", tmp_path / "w2"
    ex.suite_comparison(one, seeds=3, workers=1, scenarios=("random", "bottleneck"))
    ex.suite_comparison(two, seeds=3, workers=2, scenarios=("random", "bottleneck"))
    same = all(_strip(one / n) == _strip(two / n)
               for n in ("comparison_runs.csv", "comparison_summary.csv"))
    seeds = sorted({int(r["seed"]) for r in _strip(one / "comparison_runs.csv")})
    meta_same = (one / "comparison_metadata.json").read_text() == \
        (two / "comparison_metadata.json").read_text()
    ok = same and meta_same and seeds == [0, 1, 2]
    report(capsys, 11, ok, f"csv identical {same} metadata identical {meta_same} seeds {seeds}")
