import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prollect.comms import (COMMS_STREAM, SCENARIO_STREAM, CommConfig, FrozenBuffer, MessageBus,
                            blackout_audit, blackout_runs, delivery_log, execute_with_fallback,
                            make_rng, required_frozen_cycles, transmit)
from prollect.harness.scenarios import ScenarioSpec, build_scenario


def test_lossless_same_cycle_delivery():
    log = delivery_log(200, CommConfig())
    assert all(e.delivered and e.delivery_cycle == e.cycle for e in log)


def test_drop_rate_binomial_concentration():
    p, n = 0.9, 10_000
    log = delivery_log(n, CommConfig(p_drop=p, seed=3))
    rate = sum(not e.delivered for e in log) / n
    assert abs(rate - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_delay_contract():
    bus = MessageBus(CommConfig(delay_cycles=1))
    bus.transmit("bundle", 5)
    assert bus.receive(5) is None
    assert bus.receive(6) == (5, "bundle")


def test_config_validation():
    with pytest.raises(ValueError):
        CommConfig(p_drop=1.0)
    with pytest.raises(ValueError):
        CommConfig(delay_cycles=-1)


def test_streams_are_independent():
    a = make_rng(4, SCENARIO_STREAM).random(5)
    b = make_rng(4, COMMS_STREAM).random(5)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, make_rng(4, SCENARIO_STREAM).random(5))


def test_delivery_independent_of_scenario_seed():
    cfg = CommConfig(p_drop=0.3, seed=11)
    first = delivery_log(300, cfg)
    build_scenario(ScenarioSpec("random", 20, 99))
    assert delivery_log(300, cfg) == first


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.95), st.integers(0, 3), st.integers(0, 10_000))
def test_delivery_determinism(p, d, seed):
    cfg = CommConfig(p_drop=p, delay_cycles=d, seed=seed)
    assert delivery_log(100, cfg) == delivery_log(100, cfg)


def buffer_run(k_f, streak):
    """Agent with a ``k_f``-slot buffer facing ``streak`` blacked-out cycles after cycle 0."""
    buf = FrozenBuffer(np.ones((k_f, 2)), send_cycle=0)
    starved = []
    for c in range(1, streak + 1):
        _, s = execute_with_fallback(buf, c, None)
        starved.append(s)
    return starved


def test_fallback_streak_below_window():
    assert not any(buffer_run(3, 2))


def test_fallback_streak_beyond_window_starves():
    assert buffer_run(3, 4)[-1]


def test_fallback_adopts_fresh_bundles():
    buf = FrozenBuffer(np.zeros((2, 2)), 0)
    for c in range(10):
        cmd, starved = execute_with_fallback(buf, c, (c, np.full((2, 2), float(c))))
        assert not starved and cmd[0] == c
    # stale bundles never overwrite newer ones
    buf.adopt(np.full((2, 2), -1.0), 3)
    assert buf.command(9)[0] == 9


def test_required_frozen_cycles_examples():
    assert required_frozen_cycles(0.01, 0.1) == 2
    assert required_frozen_cycles(0.05, 0.2) == math.ceil(math.log(0.05) / math.log(0.2)) == 2
    assert 0.2 ** 2 <= 0.05
    assert required_frozen_cycles(0.05, 0.0) == 1
    for bad in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            required_frozen_cycles(bad, 0.1)


@settings(max_examples=100)
@given(st.floats(1e-4, 0.5), st.floats(0.01, 0.95))
def test_required_cycles_is_smallest_safe_window(eps, p):
    k = required_frozen_cycles(eps, p)
    assert p ** k <= eps * (1 + 1e-9)
    assert k == 1 or p ** (k - 1) > eps * (1 - 1e-9)


def test_blackout_audit_examples():
    a = blackout_audit([False, False, True], 2)
    assert (a.max_streak, a.violation_count) == (2, 0)
    a = blackout_audit([False] * 5, 2)
    assert a.violation_count == 1 and a.max_streak == 5
    assert blackout_runs([True, False, False, True, False]) == [2, 1]


def test_blackout_audit_rate_against_power_law():
    p, k, n = 0.3, 3, 100_000
    audit = blackout_audit(delivery_log(n, CommConfig(p_drop=p, seed=0)), k)
    target = p ** k
    sigma = math.sqrt(target * (1 - target) / (n - k + 1))
    # overlapping windows are correlated; 3 sigma of the independent case plus a factor for that
    assert abs(audit.empirical_violation_rate - target) <= 3 * sigma * math.sqrt(1 + 2 * p / (1 - p))


def test_transmit_draws_one_number_per_cycle():
    r1, r2 = make_rng(0, COMMS_STREAM), make_rng(0, COMMS_STREAM)
    transmit(None, 0, CommConfig(p_drop=0.0), r1)
    transmit(None, 0, CommConfig(p_drop=0.7), r2)
    assert r1.random() == r2.random()
