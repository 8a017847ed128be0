"""Workspace partition, ownership, spatiotemporal tubes and shadow-agent exchange."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import AgentState, Rect, VelocityCommand

TUBE_HEADER = "agent_id,t,cx,cy,R"


@dataclass(frozen=True)
class Subspace:
    id: int
    rect: Rect
    core: Rect
    neighbor_ids: tuple[int, ...]
    overlap_band: float


def partition_grid(workspace: Rect, nx: int, ny: int, overlap_band: float,
                   min_diameter: float = 0.0) -> list[Subspace]:
    """``nx * ny`` grid cells, each grown by half the band on interior edges.

    Neighbors share an edge (diagonals excluded). Cells narrower than
    ``min_diameter`` are rejected to avoid handover thrashing.
    """
    if nx < 1 or ny < 1:
        raise ValueError("grid must have at least one cell")
    if overlap_band <= 0 and nx * ny > 1:
        raise ValueError("adjacent subspaces need a boundary band of positive width")
    w = workspace.width / nx
    h = workspace.height / ny
    if min(w, h) < min_diameter:
        raise ValueError(f"cells of {min(w, h):.3g} m are below the minimum diameter {min_diameter}")
    half = overlap_band / 2.0
    out = []
    for iy in range(ny):
        for ix in range(nx):
            sid = iy * nx + ix
            core = Rect(workspace.xmin + ix * w, workspace.ymin + iy * h,
                        workspace.xmin + (ix + 1) * w, workspace.ymin + (iy + 1) * h)
            rect = Rect(core.xmin - (half if ix > 0 else 0.0),
                        core.ymin - (half if iy > 0 else 0.0),
                        core.xmax + (half if ix < nx - 1 else 0.0),
                        core.ymax + (half if iy < ny - 1 else 0.0))
            nbrs = []
            if iy > 0:
                nbrs.append(sid - nx)
            if ix > 0:
                nbrs.append(sid - 1)
            if ix < nx - 1:
                nbrs.append(sid + 1)
            if iy < ny - 1:
                nbrs.append(sid + nx)
            out.append(Subspace(sid, rect, core, tuple(sorted(nbrs)), overlap_band))
    return out


def assign_ownership(states: Sequence[AgentState], subspaces: Sequence[Subspace],
                     previous: Mapping[int, int] | None = None) -> dict[int, int]:
    """Owner coordinator per agent by centroid containment.

    An agent keeps its previous owner while its centroid stays inside that
    owner's (band-expanded) rectangle, so a crossing flips ownership once,
    when the centroid leaves the band. New or displaced agents go to the
    lowest-id containing subspace.
    """
    previous = previous or {}
    by_id = {s.id: s for s in subspaces}
    out = {}
    for st in states:
        prev = previous.get(st.id)
        if prev is not None and by_id[prev].rect.contains(st.position):
            out[st.id] = prev
            continue
        owner = next((s.id for s in sorted(subspaces, key=lambda s: s.id)
                      if s.rect.contains(st.position)), None)
        if owner is None:
            owner = min(subspaces, key=lambda s: (s.rect.distance_to(st.position), s.id)).id
        out[st.id] = owner
    return out


def assign_ownership_arrays(pos: np.ndarray, subspaces: Sequence[Subspace],
                            previous: np.ndarray | None = None) -> np.ndarray:
    """Array form of :func:`assign_ownership`; ``pos`` is ``(N, 2)``, result ``(N,)``."""
    states = [AgentState(i, (float(p[0]), float(p[1])), 0.0, (0.0, 0.0), 0.5)
              for i, p in enumerate(pos)]
    prev = None if previous is None else {i: int(o) for i, o in enumerate(previous)}
    own = assign_ownership(states, subspaces, prev)
    return np.array([own[i] for i in range(len(pos))], dtype=int)


@dataclass(frozen=True)
class SpatioTemporalTube:
    agent_id: int
    times: tuple[float, ...]
    centers: tuple[tuple[float, float], ...]
    radius: float

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("tube times must be strictly increasing")

    @property
    def samples(self) -> list[tuple[float, tuple[float, float], float]]:
        return [(t, c, self.radius) for t, c in zip(self.times, self.centers)]

    def centers_array(self) -> np.ndarray:
        return np.asarray(self.centers, dtype=float).reshape(-1, 2)

    def center_at(self, t: float) -> np.ndarray:
        ts = np.asarray(self.times)
        c = self.centers_array()
        return np.array([np.interp(t, ts, c[:, 0]), np.interp(t, ts, c[:, 1])])

    def intersects(self, rect: Rect) -> bool:
        return any(rect.distance_to(c) < self.radius for c in self.centers)


@dataclass(frozen=True)
class ShadowAgent:
    agent_id: int
    owner_coordinator: int
    tube: SpatioTemporalTube


def tube_centers(position: Sequence[float], commands: np.ndarray, t_step: float, dt: float,
                 start_slot: int, end_slot: int) -> np.ndarray:
    """Centers at every ``dt`` over slots ``[start_slot, end_slot)`` of a slot plan.

    The first center is the end of the first substep of ``start_slot``.
    """
    commands = np.asarray(commands, dtype=float).reshape(-1, 2)
    sub = int(round(t_step / dt))
    p = np.asarray(position, dtype=float) + t_step * commands[:start_slot].sum(axis=0)
    out = []
    for k in range(start_slot, end_slot):
        v = commands[k] if k < len(commands) else commands[-1]
        for m in range(1, sub + 1):
            out.append(p + v * (m * dt))
        p = p + v * t_step
    return np.asarray(out).reshape(-1, 2)


def build_tube(agent: AgentState, plan_commands: Sequence[VelocityCommand] | np.ndarray,
               t: float, t_step: float, dt: float, start_slot: int, end_slot: int,
               e_track: float) -> SpatioTemporalTube:
    """Tube over slots ``[start_slot, end_slot)``; the plan is held at its last command."""
    if len(plan_commands) and isinstance(plan_commands[0], VelocityCommand):
        cmds = np.array([[c.vx, c.vy] for c in plan_commands], dtype=float)
    else:
        cmds = np.asarray(plan_commands, dtype=float).reshape(-1, 2)
    centers = tube_centers(agent.position, cmds, t_step, dt, start_slot, end_slot)
    sub = int(round(t_step / dt))
    n = (end_slot - start_slot) * sub
    times = t + start_slot * t_step + dt * np.arange(1, n + 1)
    return SpatioTemporalTube(agent.id, tuple(float(x) for x in times),
                              tuple((float(c[0]), float(c[1])) for c in centers),
                              agent.radius + e_track)


def exchange_shadows(subspaces: Sequence[Subspace], ownership: Mapping[int, int],
                     tubes: Mapping[int, SpatioTemporalTube]) -> dict[int, list[ShadowAgent]]:
    """Send each tube to every other coordinator whose rectangle it touches.

    Diagonal cells are included: at a four-cell corner two agents owned by
    diagonal coordinators can meet where no edge neighbor owns either.
    """
    out: dict[int, list[ShadowAgent]] = {s.id: [] for s in subspaces}
    for aid in sorted(tubes):
        owner = ownership[aid]
        tube = tubes[aid]
        for sub in subspaces:
            if sub.id != owner and tube.intersects(sub.rect):
                out[sub.id].append(ShadowAgent(aid, owner, tube))
    return out


def shadow_disagreement_correct(owner_tube: SpatioTemporalTube, shadow_tube: SpatioTemporalTube,
                                lambda_b: float, dt: float) -> SpatioTemporalTube:
    """Contract each shadow center toward the owner's by ``1 - exp(-lambda_b * dt)``."""
    if lambda_b <= 0:
        raise ValueError("lambda_b must be positive")
    if owner_tube.times != shadow_tube.times:
        raise ValueError("tubes must share sample times")
    k = 1.0 - math.exp(-lambda_b * dt)
    o = owner_tube.centers_array()
    s = shadow_tube.centers_array()
    c = s + k * (o - s)
    return SpatioTemporalTube(shadow_tube.agent_id, shadow_tube.times,
                              tuple((float(x), float(y)) for x, y in c), shadow_tube.radius)


def serialize_tube(tube: SpatioTemporalTube, header: bool = False) -> str:
    buf = io.StringIO()
    if header:
        buf.write(TUBE_HEADER + "\n")
    for t, (cx, cy) in zip(tube.times, tube.centers):
        buf.write(f"{tube.agent_id},{t:.9f},{cx:.9f},{cy:.9f},{tube.radius:.9f}\n")
    return buf.getvalue()


def parse_tubes(text: str) -> dict[int, SpatioTemporalTube]:
    rows: dict[int, list[tuple[float, float, float, float]]] = {}
    for line in text.strip().splitlines():
        if not line or line.startswith("agent_id"):
            continue
        a, t, cx, cy, r = line.split(",")
        rows.setdefault(int(a), []).append((float(t), float(cx), float(cy), float(r)))
    return {a: SpatioTemporalTube(a, tuple(x[0] for x in v), tuple((x[1], x[2]) for x in v),
                                  v[0][3])
            for a, v in rows.items()}
