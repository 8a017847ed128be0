"""Hybrid-automaton model of the coordinator clock and its dwell-time audits.

Two modes: ``calc`` runs for a sampled solve time, then the automaton idles
until its timer reaches ``t_step``, where the timer resets and the next cycle
begins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .core import TimingConfig


class DwellTimeViolation(ValueError):
    """Raised when ``t_step > 1.5 * t_adj_max`` does not hold."""


Mode = Literal["calc", "idle"]


@dataclass
class HybridTimerState:
    mode: Mode = "calc"
    tau: float = 0.0
    cycle_index: int = 0


@dataclass
class TimingTrace:
    # (kind, absolute time, t_adj sample); kind in {"reset", "converged"}
    events: list[tuple[str, float, float]] = field(default_factory=list)

    @property
    def resets(self) -> list[float]:
        return [t for k, t, _ in self.events if k == "reset"]

    @property
    def adj_samples(self) -> list[float]:
        return [a for k, _, a in self.events if k == "converged"]


def sample_adj_time(rng: np.random.Generator, t_adj_max: float, jitter_fraction: float) -> float:
    """Solver time drawn uniformly from ``[(1 - jitter) * t_adj_max, t_adj_max]``."""
    if not 0.0 <= jitter_fraction <= 1.0:
        raise ValueError("jitter_fraction must lie in [0, 1]")
    if jitter_fraction == 0.0:
        return t_adj_max
    return float(rng.uniform((1.0 - jitter_fraction) * t_adj_max, t_adj_max))


def check_dwell_condition(config: TimingConfig) -> float:
    margin = config.t_step - 1.5 * config.t_adj_max
    if not margin > 0:
        raise DwellTimeViolation(
            f"t_step={config.t_step} must exceed 1.5*t_adj_max={1.5 * config.t_adj_max} "
            f"(margin {margin:.6g})")
    return margin


def hybrid_run(config: TimingConfig, n_cycles: int, rng: np.random.Generator,
               jitter_fraction: float = 0.0) -> TimingTrace:
    """Simulate ``n_cycles`` calc/idle cycles and record every discrete transition.

    Reset times are computed as ``k * t_step`` rather than accumulated so the
    trace carries no floating-point drift.
    """
    check_dwell_condition(config)
    trace = TimingTrace()
    state = HybridTimerState()
    for k in range(n_cycles):
        start = k * config.t_step
        trace.events.append(("reset", start, 0.0))
        state.mode, state.tau, state.cycle_index = "calc", 0.0, k
        t_adj = sample_adj_time(rng, config.t_adj_max, jitter_fraction)
        if t_adj > config.t_adj_max:
            raise DwellTimeViolation(f"solve time {t_adj} left the calc domain")
        state.tau = t_adj
        trace.events.append(("converged", start + t_adj, t_adj))
        state.mode = "idle"
        state.tau = config.t_step
    return trace


@dataclass(frozen=True)
class DwellAudit:
    min_idle_dwell: float
    min_reset_gap: float
    zeno_free: bool


def dwell_audit(trace: TimingTrace, config: TimingConfig) -> DwellAudit:
    """Minimum idle dwell and reset spacing of a trace."""
    adj = np.asarray(trace.adj_samples, dtype=float)
    resets = np.asarray(trace.resets, dtype=float)
    min_dwell = float((config.t_step - adj).min()) if len(adj) else math.inf
    gaps = np.diff(resets)
    min_gap = float(gaps.min()) if len(gaps) else math.inf
    bound = config.t_step - config.t_adj_max
    # gap tolerance absorbs the rounding of k * t_step
    zeno_free = (min_gap >= config.t_step - 1e-9) and (min_dwell >= bound) and bound > 0
    return DwellAudit(min_dwell, min_gap, bool(zeno_free))


TIMING_AUDIT_HEADER = "t_step,t_adj_max,jitter,min_idle_dwell,zeno_free"


def timing_audit_row(config: TimingConfig, jitter: float, audit: DwellAudit) -> str:
    return (f"{config.t_step:.9f},{config.t_adj_max:.9f},{jitter:.9f},"
            f"{audit.min_idle_dwell:.9f},{str(audit.zeno_free).lower()}")
