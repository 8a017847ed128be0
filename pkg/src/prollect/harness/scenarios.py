"""Benchmark scenario construction: intersection, bidirectional bottleneck, random goals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..comms import SCENARIO_STREAM, make_rng
from ..core import Rect

KINDS = ("intersection", "bottleneck", "random")
MAX_ATTEMPTS = 10_000


class ScenarioError(RuntimeError):
    """Raised when rejection sampling cannot place the requested agents."""


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    n_agents: int
    seed: int = 0
    radius: float = 0.5
    # intersection / bottleneck queues
    spacing: float = 3.0
    start_distance: float = 15.0
    lane_offset: float = 1.0
    # bottleneck passage
    corridor_width: float = 3.0
    corridor_length: float = 10.0
    # lateral lane offset inside the passage; below one radius the flows meet head on
    bottleneck_offset: float = 0.25
    # random
    side: float = 40.0
    min_clearance: float = 0.5
    min_travel: float = 10.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if self.kind == "intersection" and self.n_agents % 4:
            raise ValueError("intersection needs a multiple of 4 agents")
        if self.kind == "bottleneck" and self.n_agents % 2:
            raise ValueError("bottleneck needs an even number of agents")


@dataclass(frozen=True)
class World:
    starts: np.ndarray
    goals: np.ndarray
    radii: np.ndarray
    ids: np.ndarray
    passage: Rect | None = None

    @property
    def n(self) -> int:
        return len(self.ids)


def _rot90(p: np.ndarray, k: int) -> np.ndarray:
    c, s = [(1, 0), (0, 1), (-1, 0), (0, -1)][k % 4]
    return np.stack([c * p[:, 0] - s * p[:, 1], s * p[:, 0] + c * p[:, 1]], axis=1)


def intersection(spec: ScenarioSpec) -> World:
    """Four arms queued along right-hand lanes; each arm is a 90 degree rotation of the east arm.

    East-arm agents sit at ``(start_distance + k * spacing, lane_offset)``
    heading west; goals mirror the starts across the y axis. The layout is
    seed-independent so every run faces the same exactly symmetric conflict.
    """
    m = spec.n_agents // 4
    xs = spec.start_distance + spec.spacing * np.arange(m)
    east = np.stack([xs, np.full(m, spec.lane_offset)], axis=1)
    east_goal = np.stack([-xs, np.full(m, spec.lane_offset)], axis=1)
    starts = np.concatenate([_rot90(east, k) for k in range(4)])
    goals = np.concatenate([_rot90(east_goal, k) for k in range(4)])
    # interleave arms so ids 0..3 are the four queue leaders
    order = np.arange(spec.n_agents).reshape(4, m).T.ravel()
    return _world(starts[order], goals[order], spec.radius)


def bottleneck(spec: ScenarioSpec) -> World:
    """Counterflow through a passage of ``corridor_width`` by ``corridor_length``.

    Each direction queues single file on its right-hand lane before the
    passage mouth and heads to the mirrored point beyond the far mouth. A
    seeded longitudinal jitter of up to a quarter spacing staggers arrivals.
    """
    m = spec.n_agents // 2
    half = spec.corridor_length / 2.0
    if spec.bottleneck_offset + spec.radius > spec.corridor_width / 2.0:
        raise ScenarioError("lanes do not fit inside the passage")
    rng = make_rng(spec.seed, SCENARIO_STREAM)
    jitter = rng.uniform(-0.25, 0.25, size=(2, m)) * spec.spacing
    base = half + 1.0 + spec.spacing * np.arange(m)
    xr = -(base + jitter[0])
    xl = base + jitter[1]
    y = spec.bottleneck_offset
    starts = np.concatenate([np.stack([xr, np.full(m, -y)], 1), np.stack([xl, np.full(m, y)], 1)])
    goals = np.concatenate([np.stack([-xr, np.full(m, -y)], 1), np.stack([-xl, np.full(m, y)], 1)])
    passage = Rect(-half, -spec.corridor_width / 2.0, half, spec.corridor_width / 2.0)
    order = np.arange(spec.n_agents).reshape(2, m).T.ravel()
    return _world(starts[order], goals[order], spec.radius, passage)


def random_goals(spec: ScenarioSpec) -> World:
    """Rejection-sampled starts and goals inside a ``side`` by ``side`` square."""
    rng = make_rng(spec.seed, SCENARIO_STREAM)
    lo = -spec.side / 2.0 + spec.radius
    hi = spec.side / 2.0 - spec.radius
    sep = 2.0 * spec.radius + spec.min_clearance
    starts: list[np.ndarray] = []
    goals: list[np.ndarray] = []
    attempts = 0
    while len(starts) < spec.n_agents:
        attempts += 1
        if attempts > MAX_ATTEMPTS:
            raise ScenarioError(f"could not place {spec.n_agents} agents "
                                f"after {MAX_ATTEMPTS} attempts")
        s = rng.uniform(lo, hi, 2)
        g = rng.uniform(lo, hi, 2)
        if math.dist(s, g) < spec.min_travel:
            continue
        if any(math.dist(s, o) < sep for o in starts):
            continue
        if any(math.dist(g, o) < sep for o in goals):
            continue
        starts.append(s)
        goals.append(g)
    return _world(np.array(starts), np.array(goals), spec.radius)


def _world(starts, goals, radius, passage=None) -> World:
    n = len(starts)
    return World(np.asarray(starts, dtype=float), np.asarray(goals, dtype=float),
                 np.full(n, radius), np.arange(n), passage)


def build_scenario(spec: ScenarioSpec) -> World:
    return {"intersection": intersection, "bottleneck": bottleneck,
            "random": random_goals}[spec.kind](spec)


DEFAULT_N = {"intersection": 20, "bottleneck": 16, "random": 20}
