import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prollect.coordinator import (AdjustmentDirective, Coordinator, CoordinatorConfig, CycleLog,
                                  FrozenPlan, IntentBuffer, IntentRecord, WindowLayout,
                                  break_yield_cycles, compose_directives, coordinator_cycle,
                                  detect_conflicts, preempt_adjust, preemption_rate,
                                  snapshot_cutoff, snapshot_intents)
from prollect.core import AgentState, TimingConfig, VelocityCommand
from prollect.harness.runner import ExperimentConfig, run_single
from prollect.harness.scenarios import ScenarioSpec

T = TimingConfig()
LAY = WindowLayout.from_timing(T)
V = VelocityCommand


def agent(i, pos, goal, r=0.5):
    return AgentState(i, pos, 0.0, goal, r)


def held(states, intents, t=0.0, slots=None):
    n = LAY.horizon if slots is None else slots
    return {s.id: FrozenPlan(s.id, t, T.t_step, (intents[s.id],) * n) for s in states}


# -- snapshot -----------------------------------------------------------------


def test_snapshot_version_and_time_filter():
    recs = [IntentRecord(0, V(1.0, 0.0), 0.1, 1), IntentRecord(0, V(0.0, 1.0), 0.9, 2)]
    assert snapshot_intents(recs, 0.5) == {0: V(1.0, 0.0)}


def test_snapshot_empty_uses_nominal_default():
    assert snapshot_intents([], 0.5, {3: V(1.5, 0.0)}) == {3: V(1.5, 0.0)}


def test_snapshot_same_time_higher_version_wins():
    recs = [IntentRecord(0, V(1.0, 0.0), 0.2, 4), IntentRecord(0, V(0.0, 1.0), 0.2, 5)]
    assert snapshot_intents(recs, 0.5) == {0: V(0.0, 1.0)}


def test_intent_buffer_double_buffers_and_rejects_stale_versions():
    buf = IntentBuffer()
    buf.submit(IntentRecord(0, V(1.0, 0.0), 0.1, 1))
    buf.submit(IntentRecord(0, V(0.5, 0.0), 2.0, 2))
    assert buf.snapshot(1.0) == {0: V(1.0, 0.0)}
    assert [r.version for r in buf.pending] == [2]
    with pytest.raises(ValueError):
        buf.submit(IntentRecord(0, V(0.0, 0.0), 3.0, 2))
    assert snapshot_cutoff(0.0, T) == pytest.approx(1.0)


# -- detection ----------------------------------------------------------------


def test_receding_agents_have_no_conflicts():
    states = [agent(0, (-1.0, 0.0), (-20.0, 0.0)), agent(1, (1.0, 0.0), (20.0, 0.0))]
    intents = {0: V(-1.5, 0.0), 1: V(1.5, 0.0)}
    assert detect_conflicts(states, intents, held(states, intents), T) == []


def test_orthogonal_crossers_one_record_at_closed_form_time():
    d = 1.7
    states = [agent(0, (-d, 0.0), (20.0, 0.0)), agent(1, (0.0, -d), (0.0, 20.0))]
    intents = {0: V(1.5, 0.0), 1: V(0.0, 1.5)}
    recs = detect_conflicts(states, intents, held(states, intents), T, margin=0.3)
    # center distance sqrt(2) (d - 1.5 tau) first drops below 1.3
    tau = (d - 1.3 / math.sqrt(2)) / 1.5
    lo = (T.t_frozen + T.t_planning)
    first = math.ceil((tau - 1e-12) / T.dt) * T.dt
    assert lo < first <= lo + T.t_step
    assert len(recs) == 1
    assert recs[0].pair == (0, 1)
    assert recs[0].breach_time == pytest.approx(first)
    assert lo < recs[0].breach_time <= lo + T.t_step


def test_conflict_inside_frozen_window_only_is_ignored():
    # offset pass: closer than 1.3 only before 0.26 s
    states = [agent(0, (-0.2, 0.0), (20.0, 0.0)), agent(1, (0.2, 1.25), (-20.0, 1.25))]
    intents = {0: V(1.5, 0.0), 1: V(-1.5, 0.0)}
    assert detect_conflicts(states, intents, held(states, intents), T) == []


def test_detection_requires_frozen_coverage():
    states = [agent(0, (0.0, 0.0), (20.0, 0.0))]
    with pytest.raises(ValueError):
        detect_conflicts(states, {0: V(1.5, 0.0)}, {}, T)


# -- preemption ---------------------------------------------------------------


def factor_clears(f, yielder, other, vy, vo, margin=0.3):
    """Oracle: yielder slowed by ``f`` over the adjustment slots, checked on the detection grid."""
    py, po = np.array(yielder, float), np.array(other, float)
    for k in range(LAY.horizon):
        fy = f if k >= LAY.frozen else 1.0
        for m in range(1, LAY.substeps + 1):
            a = py + np.multiply(vy, fy * m * T.dt)
            b = po + np.multiply(vo, m * T.dt)
            if k == LAY.detect_slot and np.hypot(*(a - b)) < 1.0 + margin:
                return False
        py = py + np.multiply(vy, fy * T.t_step)
        po = po + np.multiply(vo, T.t_step)
    return True


def test_symmetric_crossing_slows_exactly_one_agent():
    d = 1.7
    states = [agent(0, (-d, 0.0), (20.0 - d, 0.0)), agent(1, (0.0, -d), (0.0, 20.0 - d))]
    intents = {0: V(1.5, 0.0), 1: V(0.0, 1.5)}
    recs = detect_conflicts(states, intents, held(states, intents), T)
    dirs = preempt_adjust(recs, states, intents, T)
    assert len(dirs) == 1
    # equal remaining distance: the lower id yields
    assert dirs[0].agent_id == 0
    want = next(f for f in (0.75, 0.5, 0.25, 0.0)
                if factor_clears(f, (-d, 0.0), (0.0, -d), (1.5, 0.0), (0.0, 1.5)))
    assert dirs[0].speed_factor == want
    lo = T.t_frozen
    assert dirs[0].interval == pytest.approx((lo, lo + T.t_planning + T.t_step))


def test_farther_agent_yields():
    d = 1.7
    states = [agent(0, (-d, 0.0), (10.0, 0.0)), agent(1, (0.0, -d), (0.0, 30.0))]
    intents = {0: V(1.5, 0.0), 1: V(0.0, 1.5)}
    recs = detect_conflicts(states, intents, held(states, intents), T)
    assert [d.agent_id for d in preempt_adjust(recs, states, intents, T)] == [1]


def test_no_conflicts_no_directives():
    assert preempt_adjust([], [], {}, T) == []


def test_min_compose():
    iv = (0.2, 0.6)
    ds = [AdjustmentDirective(4, 0.5, iv), AdjustmentDirective(4, 0.25, iv),
          AdjustmentDirective(2, 0.75, iv)]
    assert compose_directives(ds) == {4: 0.25, 2: 0.75}


def test_directive_cannot_speed_up():
    with pytest.raises(ValueError):
        AdjustmentDirective(0, 1.25, (0.0, 1.0))


def test_yield_rings_are_broken():
    edges = [(0, 1), (1, 2), (2, 0)]
    out = break_yield_cycles(edges, {0: 5.0, 1: 3.0, 2: 4.0}, {0, 1, 2})
    graph = {}
    for y, o in out:
        graph.setdefault(y, set()).add(o)
    # agent 1 is closest to its goal and no longer yields
    assert 1 not in graph


# -- full cycle ---------------------------------------------------------------


def cycle_fixture(states, intents, t=0.2):
    buf = IntentBuffer()
    for k, s in enumerate(states):
        buf.submit(IntentRecord(s.id, intents[s.id], t, 1))
    prev = held(states, intents, t - T.t_step)
    return buf, prev


def test_conflict_free_cycle_is_shift_and_append():
    states = [agent(0, (-10.0, 0.0), (-30.0, 0.0)), agent(1, (10.0, 0.0), (30.0, 0.0))]
    intents = {0: V(-1.5, 0.0), 1: V(1.5, 0.0)}
    buf, prev = cycle_fixture(states, intents)
    new, log = coordinator_cycle(states, buf, prev, T, t=0.2, cycle=1)
    assert not log.preempt_triggered and log.conflicts == 0
    for s in states:
        assert new[s.id].commands == prev[s.id].commands[1:] + (intents[s.id],)
        assert new[s.id].start_time == pytest.approx(0.2)


def test_crossing_cycle_slows_only_directed_segments():
    d = 1.7
    states = [agent(0, (-d, 0.0), (20.0 - d, 0.0)), agent(1, (0.0, -d), (0.0, 20.0 - d))]
    intents = {0: V(1.5, 0.0), 1: V(0.0, 1.5)}
    buf, prev = cycle_fixture(states, intents, t=0.0)
    new, log = coordinator_cycle(states, buf, prev, T, t=0.0, cycle=0)
    assert log.preempt_triggered
    (aid, f), = log.directives
    other = 1 - aid
    assert new[other].commands == (intents[other],) * LAY.horizon
    cmds = new[aid].commands
    # frozen prefix untouched, adjustment slots scaled
    assert cmds[:LAY.frozen] == (intents[aid],) * LAY.frozen
    for c in cmds[LAY.frozen:]:
        assert c.speed == pytest.approx(f * 1.5)


def test_intent_after_cutoff_waits_for_next_cycle():
    s = agent(0, (0.0, 0.0), (20.0, 0.0))
    buf = IntentBuffer()
    buf.submit(IntentRecord(0, V(1.0, 0.0), 0.0, 1))
    buf.submit(IntentRecord(0, V(0.0, 1.0), snapshot_cutoff(0.0, T) + 0.01, 2))
    new, _ = coordinator_cycle([s], buf, {}, T, t=0.0)
    assert new[0].commands[-1] == V(1.0, 0.0)
    new, _ = coordinator_cycle([s], buf, new, T, t=0.2, cycle=1)
    assert new[0].commands[-1] == V(0.0, 1.0)


def test_preemption_rate_examples():
    assert preemption_rate([CycleLog(k, 0.2 * k, 0, False) for k in range(5)]) == 0.0
    assert preemption_rate([CycleLog(k, 0.2 * k, 1, True) for k in range(5)]) == 1.0
    assert preemption_rate([]) == 0.0


def test_cycle_log_csv_row():
    assert CycleLog(3, 0.6, 2, True, [(1, 0.5)]).csv_row() == "3,2,1,1:0.50"


def test_frozen_plan_schedule():
    p = FrozenPlan(0, 1.0, 0.2, (V(1.0, 0.0), V(0.5, 0.0)))
    assert p.covers(0.4) and not p.covers(0.41)
    assert p.command_at(1.25) == V(0.5, 0.0)
    with pytest.raises(IndexError):
        p.command_at(1.5)


# -- invariants ---------------------------------------------------------------


@pytest.mark.parametrize("alpha", [1, 3])
def test_frozen_immutability_over_a_run(alpha):
    exp = ExperimentConfig(timing=TimingConfig.from_alpha(alpha))
    res = run_single(ScenarioSpec("intersection", 8, 0), exp, record=True)
    plans = res.trace.plans
    F = WindowLayout.from_timing(exp.timing).frozen
    for prev, cur in zip(plans, plans[1:]):
        # the commands executed next were committed a cycle earlier
        assert np.array_equal(cur[:, :F], prev[:, 1:F + 1])


agents_st = st.lists(st.tuples(st.floats(-6, 6), st.floats(-6, 6), st.floats(-math.pi, math.pi)),
                     min_size=2, max_size=6)


@settings(max_examples=40, deadline=None)
@given(agents_st)
def test_adjustments_never_exceed_intent_speed(rows):
    pos = np.array([[x, y] for x, y, _ in rows])
    intents = 1.5 * np.array([[math.cos(a), math.sin(a)] for _, _, a in rows])
    n = len(rows)
    coord = Coordinator(LAY, CoordinatorConfig())
    plans = coord.initial_plans(intents)
    remaining = {i: float(10 + i) for i in range(n)}
    new, log, _, dirs = coord.cycle(0, 0.0, pos, plans, intents, np.full(n, 0.5),
                                    np.ones(n, bool), np.arange(n), remaining)
    speed = np.linalg.norm(new, axis=-1)
    assert (speed <= 1.5 + 1e-9).all()
    assert np.array_equal(new[:, :LAY.frozen], plans[:, 1:LAY.frozen + 1])
    for d in dirs:
        assert 0.0 <= d.speed_factor <= 1.0
    assert log.preempt_triggered == bool(dirs)
