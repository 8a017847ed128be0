import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prollect.metrics import (Quantiles, RunMetrics, aggregate, avg_velocity_disruption,
                              classify_deadlock, fmt)


def run(completed=True, t=10.0, dv=0.0, **kw):
    base = dict(completed=completed, collision=False, completion_time=t if completed else None,
                min_dist=1.2, min_clearance=0.2, avg_speed=1.0, avg_dv=dv, preempt_rate=0.0,
                proj_act=0.0, deadlock=False, runtime_per_call_us=5.0)
    base.update(kw)
    return RunMetrics(**base)


def test_disruption_examples():
    nom = np.tile([1.5, 0.0], (4, 3, 1))
    assert avg_velocity_disruption(nom, nom) == 0.0
    assert avg_velocity_disruption(np.zeros_like(nom), nom) == pytest.approx(1.5)
    active = np.zeros((4, 3), bool)
    active[0, 0] = True
    half = nom.copy()
    half[0, 0] = [0.0, 0.0]
    assert avg_velocity_disruption(half, nom, active) == pytest.approx(1.5)
    assert avg_velocity_disruption(half, nom, np.zeros((4, 3), bool)) == 0.0


def test_deadlock_classification():
    t = np.arange(0.0, 30.0, 0.2)
    assert classify_deadlock(t, np.where(t > 10, 0.0, 1.0), False)
    assert not classify_deadlock(t, np.where(t > 10, 0.0, 1.0), True)
    assert not classify_deadlock(t, np.full_like(t, 0.5), False)
    assert not classify_deadlock(t[t < 5], np.zeros(int((t < 5).sum())), False)


def test_run_metrics_validation():
    with pytest.raises(ValueError):
        run(deadlock=True)
    with pytest.raises(ValueError):
        run(proj_act=1.5)


def test_aggregate_quartiles():
    row = aggregate([run(t=float(k)) for k in (1, 2, 3, 4)])
    assert row.completion_time == Quantiles(2.5, 1.75, 3.25)
    assert row.completion_rate_pct == 100.0 and row.standoff_rate_pct == 0.0


def test_aggregate_without_completed_runs():
    row = aggregate([run(completed=False), run(completed=False, deadlock=True)])
    assert row.completion_time is None
    assert fmt(None) == "--"
    assert row.completion_rate_pct == 0.0 and row.deadlock_rate_pct == 50.0
    with pytest.raises(ValueError):
        aggregate([])


def test_fmt():
    assert fmt(1.0) == "1.000000000"
    assert fmt(math.nan) == "--"
    assert fmt(math.inf) == "inf"


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.floats(1.0, 90.0), st.floats(0.0, 1.5)),
                min_size=1, max_size=12), st.randoms(use_true_random=False))
def test_aggregate_order_invariant(rows, rnd):
    runs = [run(completed=c, t=t, dv=dv) for c, t, dv in rows]
    shuffled = list(runs)
    rnd.shuffle(shuffled)
    a, b = aggregate(runs), aggregate(shuffled)
    assert a == b
    assert a.standoff_rate_pct == pytest.approx(100.0 - a.completion_rate_pct)
    assert a.avg_dv.q25 <= a.avg_dv.median <= a.avg_dv.q75
