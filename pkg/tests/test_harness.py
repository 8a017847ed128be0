import math
from dataclasses import asdict, replace

import numpy as np
import pytest

from prollect.harness import cli
from prollect.harness import experiments as ex
from prollect.harness.runner import METHODS, ExperimentConfig, run_single
from prollect.harness.scenarios import ScenarioError, ScenarioSpec, build_scenario
from prollect.metrics import RUN_FIELDS


def test_intersection_four_fold_symmetry():
    w = build_scenario(ScenarioSpec("intersection", 12))
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    starts = {tuple(np.round(p, 9)) for p in w.starts}
    assert {tuple(np.round(rot @ p, 9)) for p in w.starts} == starts
    goals = {tuple(np.round(p, 9)) for p in w.goals}
    assert {tuple(np.round(rot @ p, 9)) for p in w.goals} == goals
    # rotating an agent's start maps onto another agent whose goal rotates the same way
    pairs = {(tuple(np.round(s, 9)), tuple(np.round(g, 9))) for s, g in zip(w.starts, w.goals)}
    assert {(tuple(np.round(rot @ np.array(s), 9)), tuple(np.round(rot @ np.array(g), 9)))
            for s, g in pairs} == pairs


@pytest.mark.parametrize("kind,n", [("intersection", 20), ("bottleneck", 16), ("random", 20)])
def test_scenarios_are_deterministic_and_separated(kind, n):
    a = build_scenario(ScenarioSpec(kind, n, seed=3))
    b = build_scenario(ScenarioSpec(kind, n, seed=3))
    assert np.array_equal(a.starts, b.starts) and np.array_equal(a.goals, b.goals)
    for pts in (a.starts, a.goals):
        d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        d[np.diag_indices(n)] = np.inf
        assert (d - 2 * a.radii[0]).min() >= 0.5 - 1e-9
    if kind == "random":
        assert np.linalg.norm(a.starts - a.goals, axis=1).min() >= 10.0


def test_random_scenario_gives_up():
    with pytest.raises(ScenarioError):
        build_scenario(ScenarioSpec("random", 200, side=12.0))
    with pytest.raises(ValueError):
        ScenarioSpec("intersection", 6)


@pytest.mark.parametrize("method", METHODS)
def test_single_agent_undisturbed(method):
    res = run_single(ScenarioSpec("random", 1, seed=0), ExperimentConfig(method=method))
    m = res.metrics
    assert m.completed and not m.collision
    assert m.avg_dv == pytest.approx(0.0, abs=1e-9) and m.proj_act == 0.0


def test_projection_signature_shared_across_methods():
    sigs = {run_single(ScenarioSpec("random", 2, seed=1), ExperimentConfig(method=m)).projection_hash
            for m in METHODS}
    assert len(sigs) == 1


def test_one_seed_aggregate():
    agg, rows = ex.run_monte_carlo("random", ExperimentConfig(), 4, 1)
    assert agg.n_runs == 1 and len(rows) == 1
    assert agg.avg_dv.median == agg.avg_dv.q25 == rows[0].metrics.avg_dv


def _strip_runtime(rows):
    return [{k: v for k, v in asdict(r.metrics).items() if k not in ex.RUNTIME_COLUMNS}
            for r in rows]


def test_parallel_matches_serial():
    jobs = [j for m in METHODS
            for j in ex.seed_jobs("random", 6, ExperimentConfig(method=m), 2, (m,))]
    serial = ex.run_jobs(jobs, workers=1)
    parallel = ex.run_jobs(jobs, workers=2)
    assert [(r.method, r.seed) for r in serial] == [(r.method, r.seed) for r in parallel]
    assert _strip_runtime(serial) == _strip_runtime(parallel)


def test_run_csv_header(tmp_path):
    _, rows = ex.run_monte_carlo("random", ExperimentConfig(), 2, 1)
    path = ex.write_runs(tmp_path / "r.csv", rows)
    header = path.read_text().splitlines()[0].split(",")
    assert header == ex.RUN_HEADER and header[-len(RUN_FIELDS):] == RUN_FIELDS


def test_cli_run_verify_report(tmp_path, capsys):
    assert cli.main(["run", "--scenario", "random", "--n", "4", "--out-dir", str(tmp_path)]) == 0
    assert "completion 100.0%" in capsys.readouterr().out
    assert cli.main(["verify", "--quick", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "verify_report.csv").exists()
    capsys.readouterr()
    assert cli.main(["report", "--out-dir", str(tmp_path)]) == 0
    assert "verify_report.csv" in capsys.readouterr().out
    with pytest.raises(SystemExit):
        cli.main(["run", "--partition", "2x1"])
