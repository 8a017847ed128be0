"""Per-run metrics and their median/IQR aggregation across seeds."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

QUANTILE_METHOD = "linear"
DEADLOCK_SPEED = 0.1
DEADLOCK_AFTER = 10.0


@dataclass(frozen=True)
class RunMetrics:
    completed: bool
    collision: bool
    completion_time: float | None
    min_dist: float
    min_clearance: float
    avg_speed: float
    avg_dv: float
    preempt_rate: float
    proj_act: float
    deadlock: bool
    runtime_per_call_us: float
    starvation_events: int = 0

    def __post_init__(self):
        if self.deadlock and self.completed:
            raise ValueError("a completed run cannot be deadlocked")
        for name in ("preempt_rate", "proj_act"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class Quantiles:
    median: float
    q25: float
    q75: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Quantiles | None":
        if len(values) == 0:
            return None
        arr = np.sort(np.asarray(values, dtype=float))
        q25, med, q75 = np.quantile(arr, [0.25, 0.5, 0.75], method=QUANTILE_METHOD)
        return cls(float(med), float(q25), float(q75))


@dataclass(frozen=True)
class AggregateRow:
    n_runs: int
    completion_rate_pct: float
    collision_rate_pct: float
    deadlock_rate_pct: float
    completion_time: Quantiles | None
    min_dist: Quantiles
    avg_speed: Quantiles
    avg_dv: Quantiles
    preempt_rate: Quantiles
    proj_act: Quantiles
    runtime_us: Quantiles

    @property
    def standoff_rate_pct(self) -> float:
        return 100.0 - self.completion_rate_pct


def avg_velocity_disruption(executed: np.ndarray, nominal: np.ndarray,
                            active: np.ndarray | None = None) -> float:
    """Mean ``|v_exec - v_nom|`` over agent-ticks, skipping ticks masked inactive."""
    executed = np.asarray(executed, dtype=float)
    nominal = np.asarray(nominal, dtype=float)
    d = np.sqrt(((executed - nominal) ** 2).sum(-1))
    if active is not None:
        d = d[np.asarray(active, dtype=bool)]
    if d.size == 0:
        return 0.0
    return float(d.mean())


def classify_deadlock(times: np.ndarray, speeds: np.ndarray, completed: bool,
                      speed_threshold: float = DEADLOCK_SPEED,
                      after: float = DEADLOCK_AFTER) -> bool:
    """Stand-still diagnostic: unfinished run whose mean speed after ``after`` s is tiny."""
    if completed:
        return False
    times = np.asarray(times, dtype=float)
    speeds = np.asarray(speeds, dtype=float)
    late = speeds[times > after]
    if late.size == 0:
        return False
    return bool(late.mean() < speed_threshold)


def aggregate(runs: Sequence[RunMetrics]) -> AggregateRow:
    """Median and quartiles per metric; completion time over completed runs only."""
    if not runs:
        raise ValueError("no runs to aggregate")
    n = len(runs)

    def q(name: str) -> Quantiles:
        return Quantiles.of([getattr(r, name) for r in runs])

    times = [r.completion_time for r in runs if r.completed and r.completion_time is not None]
    return AggregateRow(
        n_runs=n,
        completion_rate_pct=100.0 * sum(r.completed for r in runs) / n,
        collision_rate_pct=100.0 * sum(r.collision for r in runs) / n,
        deadlock_rate_pct=100.0 * sum(r.deadlock for r in runs) / n,
        completion_time=Quantiles.of(times),
        min_dist=q("min_dist"),
        avg_speed=q("avg_speed"),
        avg_dv=q("avg_dv"),
        preempt_rate=q("preempt_rate"),
        proj_act=q("proj_act"),
        runtime_us=q("runtime_per_call_us"),
    )


def fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "--"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9f}"


RUN_FIELDS = [f.name for f in fields(RunMetrics)]
