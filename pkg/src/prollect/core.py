"""Domain types, sampled integration and geometric queries shared by every controller."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

Vec2 = tuple[float, float]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle ``[xmin, xmax] x [ymin, ymax]`` in meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def center(self) -> Vec2:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def contains(self, p: Sequence[float], tol: float = 0.0) -> bool:
        return (self.xmin - tol <= p[0] <= self.xmax + tol
                and self.ymin - tol <= p[1] <= self.ymax + tol)

    def distance_to(self, p: Sequence[float]) -> float:
        """Euclidean distance from ``p`` to the rectangle (0 inside)."""
        dx = max(self.xmin - p[0], 0.0, p[0] - self.xmax)
        dy = max(self.ymin - p[1], 0.0, p[1] - self.ymax)
        return math.hypot(dx, dy)


@dataclass(frozen=True)
class VelocityCommand:
    """Planar velocity command; clamped to ``v_max`` on construction."""

    vx: float
    vy: float
    v_max: float = field(default=math.inf, compare=False, repr=False)

    def __post_init__(self):
        speed = math.hypot(self.vx, self.vy)
        if speed > self.v_max:
            k = self.v_max / speed
            object.__setattr__(self, "vx", self.vx * k)
            object.__setattr__(self, "vy", self.vy * k)

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    def scaled(self, factor: float) -> "VelocityCommand":
        return VelocityCommand(self.vx * factor, self.vy * factor, self.v_max)

    @classmethod
    def zero(cls) -> "VelocityCommand":
        return cls(0.0, 0.0)


@dataclass(frozen=True)
class AgentState:
    id: int
    position: Vec2
    heading: float
    goal: Vec2
    radius: float
    completed: bool = False

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("agent radius must be positive")

    def distance_to_goal(self) -> float:
        return math.hypot(self.goal[0] - self.position[0], self.goal[1] - self.position[1])


@dataclass(frozen=True)
class TimingConfig:
    """Window and cycle durations of the coordination protocol, in seconds.

    ``t_frozen`` must equal ``alpha * t_step``; use :meth:`from_alpha` to
    build a consistent instance.
    """

    t_step: float = 0.2
    t_frozen: float = 0.2
    t_planning: float = 0.2
    t_lookahead: float = 1.5
    t_pad: float = 0.6
    t_tx: float = 0.0
    dt: float = 0.05
    alpha: float = 1.0
    t_adj_max: float = 0.1

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if not math.isclose(self.t_frozen, self.alpha * self.t_step, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("t_frozen must equal alpha * t_step")
        if not self.t_pad > self.t_tx:
            raise ValueError("t_pad must exceed t_tx")
        ratio = self.t_step / self.dt
        if self.dt <= 0 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("dt must divide t_step into an integer number of substeps")
        for name in ("t_planning", "t_lookahead"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def from_alpha(cls, alpha: float = 1.0, t_step: float = 0.2, **kw) -> "TimingConfig":
        return cls(t_step=t_step, t_frozen=alpha * t_step, alpha=alpha, **kw)

    @property
    def substeps(self) -> int:
        return int(round(self.t_step / self.dt))

    @property
    def frozen_cycles(self) -> int:
        return int(math.floor(self.t_frozen / self.t_step + 1e-9))

    @property
    def tx_cycles(self) -> int:
        return int(math.ceil(self.t_tx / self.t_step - 1e-9))

    @property
    def planning_cycles(self) -> int:
        return int(math.ceil(self.t_planning / self.t_step - 1e-9))

    @property
    def lookahead_cycles(self) -> int:
        return int(math.ceil(self.t_lookahead / self.t_step - 1e-9))

    def dwell_ok(self) -> bool:
        return self.t_step > 1.5 * self.t_adj_max


@dataclass(frozen=True)
class WorldConfig:
    v_max: float = 1.5
    goal_tolerance: float = 2.0
    neighbor_radius: float = 20.0
    safety_margin: float = 0.3
    max_time: float = 90.0
    workspace: Rect = Rect(-20.0, -20.0, 20.0, 20.0)

    def __post_init__(self):
        for name in ("v_max", "goal_tolerance", "neighbor_radius", "max_time"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.safety_margin < 0:
            raise ValueError("safety_margin must be non-negative")

    def check_radii(self, radii: Sequence[float]) -> None:
        if radii and not self.neighbor_radius > 2 * max(radii):
            raise ValueError("neighbor_radius must exceed twice the largest agent radius")


def integrate_step(state: AgentState, cmd: VelocityCommand, dt: float,
                   goal_tolerance: float = 2.0) -> AgentState:
    """Advance one agent by ``dt`` under a constant velocity command."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = state.position[0] + cmd.vx * dt
    y = state.position[1] + cmd.vy * dt
    heading = math.atan2(cmd.vy, cmd.vx) if (cmd.vx != 0.0 or cmd.vy != 0.0) else state.heading
    reached = math.hypot(state.goal[0] - x, state.goal[1] - y) <= goal_tolerance
    return replace(state, position=(x, y), heading=heading,
                   completed=state.completed or reached)


def nominal_command(state: AgentState, world: WorldConfig) -> VelocityCommand:
    """Straight-to-goal command at full speed; zero once completed."""
    if state.completed:
        return VelocityCommand(0.0, 0.0, world.v_max)
    dx = state.goal[0] - state.position[0]
    dy = state.goal[1] - state.position[1]
    dist = math.sqrt(dx * dx + dy * dy)
    if dist == 0.0:
        return VelocityCommand(0.0, 0.0, world.v_max)
    return VelocityCommand(dx / dist * world.v_max, dy / dist * world.v_max, world.v_max)


def nominal_velocities(pos: np.ndarray, goals: np.ndarray, active: np.ndarray,
                       v_max: float) -> np.ndarray:
    """Array form of :func:`nominal_command` for a whole team."""
    d = goals - pos
    dist = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1])
    out = np.zeros_like(pos)
    ok = active & (dist > 0.0)
    out[ok] = d[ok] / dist[ok, None] * v_max
    return out


def _active(states: Sequence[AgentState]) -> list[AgentState]:
    return [s for s in states if not s.completed]


def pairwise_center_distances(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt((diff ** 2).sum(-1))


def min_pairwise_distance(states: Sequence[AgentState]) -> float:
    """Smallest surface clearance among active agents (+inf with fewer than two)."""
    act = _active(states)
    if len(act) < 2:
        return math.inf
    pos = np.array([s.position for s in act], dtype=float)
    rad = np.array([s.radius for s in act], dtype=float)
    clear = pairwise_center_distances(pos) - rad[:, None] - rad[None, :]
    iu = np.triu_indices(len(act), 1)
    return float(clear[iu].min())


def min_center_distance(states: Sequence[AgentState]) -> float:
    act = _active(states)
    if len(act) < 2:
        return math.inf
    pos = np.array([s.position for s in act], dtype=float)
    iu = np.triu_indices(len(act), 1)
    return float(pairwise_center_distances(pos)[iu].min())


def detect_collision(states: Sequence[AgentState], margin: float = 0.0) -> bool:
    """True iff some pair of active agents has clearance below ``margin``."""
    return min_pairwise_distance(states) < margin


def clamp_to_workspace(pos: np.ndarray, vel: np.ndarray, dt: float, ws: Rect) -> np.ndarray:
    """Shrink commands whose next position would leave the workspace."""
    nxt = pos + vel * dt
    lo = np.array([ws.xmin, ws.ymin])
    hi = np.array([ws.xmax, ws.ymax])
    inside = np.clip(nxt, lo, hi)
    if np.array_equal(inside, nxt):
        return vel
    return (inside - pos) / dt
