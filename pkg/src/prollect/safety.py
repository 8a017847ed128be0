"""Shared discrete-time safety projection and projection-activation accounting.

Every method in the benchmark passes its intended command through the same
operator. The neighbor set is predicted at constant velocity (their last
executed command) and the separation test is evaluated at every integration
substep of the projection horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .core import AgentState, VelocityCommand

# squared-distance slack below which a constraint counts as satisfied (m^2)
_VIOL_TOL = 1e-9
_STEP_BELOW = 1e-12


@dataclass(frozen=True)
class ProjectionConfig:
    margin: float = 0.3
    max_iters: int = 6
    eta: float = 1e-9
    horizon: float = 0.2
    dt: float = 0.05

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if self.horizon <= 0 or self.dt <= 0:
            raise ValueError("horizon and dt must be positive")

    @property
    def substeps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


@dataclass(frozen=True)
class ProjectionOutcome:
    executed: VelocityCommand
    modified: bool
    iterations_used: int


@njit(cache=True)
def _max_scale(bx, by, px, py, nb_px, nb_py, nb_vx, nb_vy, req, n, nsub, dt, s0, budget):
    """Largest scale ``s <= s0`` of base command ``(bx, by)`` meeting every constraint.

    Returns ``(s, iterations)``; ``s < 0`` means no non-negative scale works
    within the iteration budget.
    """
    s = s0
    it = 0
    while True:
        lowest = 1e300
        violated = False
        for j in range(n):
            R2 = req[j] * req[j]
            for k in range(1, nsub + 1):
                tau = k * dt
                ax = px - nb_px[j] - nb_vx[j] * tau
                ay = py - nb_py[j] - nb_vy[j] * tau
                cx = ax + s * bx * tau
                cy = ay + s * by * tau
                val = cx * cx + cy * cy - R2
                if val < -_VIOL_TOL:
                    violated = True
                    A = (bx * bx + by * by) * tau * tau
                    if A <= 1e-18:
                        lo = -1.0
                    else:
                        B = (ax * bx + ay * by) * tau
                        C = ax * ax + ay * ay - R2
                        disc = B * B - A * C
                        if disc < 0.0:
                            disc = 0.0
                        lo = (-B - math.sqrt(disc)) / A
                    if lo < lowest:
                        lowest = lo
        if not violated:
            return s, it
        it += 1
        if lowest < 0.0 or it >= budget:
            return -1.0, it
        s = lowest - _STEP_BELOW
        if s < 0.0:
            s = 0.0


@njit(cache=True)
def _project_one(px, py, vx, vy, gx, gy, r, nb_px, nb_py, nb_vx, nb_vy, nb_r, nb_id, n,
                 margin, max_iters, nsub, dt):
    """Project one intended command; returns ``(ex, ey, iterations, saturated)``."""
    if n == 0:
        return vx, vy, 0, False
    req = np.empty(n)
    best_j = -1
    best_clear = 1e300
    for j in range(n):
        dx = px - nb_px[j]
        dy = py - nb_py[j]
        d0 = math.sqrt(dx * dx + dy * dy)
        R = r + nb_r[j] + margin
        # a pair already inside the margin may not get any closer
        req[j] = R if d0 >= R else d0
        clear = d0 - r - nb_r[j]
        if clear < best_clear or (clear == best_clear and nb_id[j] < nb_id[best_j]):
            best_clear = clear
            best_j = j
    s, it = _max_scale(vx, vy, px, py, nb_px, nb_py, nb_vx, nb_vy, req, n, nsub, dt, 1.0,
                       max_iters)
    if s >= 1.0:
        return vx, vy, it, False
    if s > 0.0:
        return s * vx, s * vy, it, False
    if s == 0.0:
        return 0.0, 0.0, it, False
    # scaling alone cannot satisfy the pair set: slide tangentially around the
    # closest neighbor, toward the goal side (counter-clockwise on a tie)
    speed = math.sqrt(vx * vx + vy * vy)
    remaining = max_iters - it
    if speed > 0.0 and remaining > 0:
        nx = nb_px[best_j] - px
        ny = nb_py[best_j] - py
        nn = math.sqrt(nx * nx + ny * ny)
        if nn > 0.0:
            nx /= nn
            ny /= nn
            tx = -ny
            ty = nx
            side = tx * (gx - px) + ty * (gy - py)
            if side < 0.0:
                tx = -tx
                ty = -ty
            for attempt in range(2):
                if attempt == 0:
                    bx = tx * speed
                    by = ty * speed
                else:
                    bx = -nx * speed
                    by = -ny * speed
                s2, it2 = _max_scale(bx, by, px, py, nb_px, nb_py, nb_vx, nb_vy, req, n, nsub,
                                     dt, 1.0, remaining)
                it += it2
                remaining -= it2
                if s2 > 0.0:
                    return s2 * bx, s2 * by, it, False
                if remaining <= 0:
                    break
    return 0.0, 0.0, it, True


@njit(cache=True)
def project_team(pos, v_int, v_prev, radii, goals, active, ids, margin, max_iters, horizon, dt,
                 neighbor_radius):
    """Project every active agent's intended command against the pre-tick snapshot."""
    N = pos.shape[0]
    out = np.zeros_like(v_int)
    iters = np.zeros(N, dtype=np.int64)
    saturated = np.zeros(N, dtype=np.bool_)
    nsub = max(1, int(round(horizon / dt)))
    nb_px = np.empty(N)
    nb_py = np.empty(N)
    nb_vx = np.empty(N)
    nb_vy = np.empty(N)
    nb_r = np.empty(N)
    nb_id = np.empty(N, dtype=np.int64)
    nr2 = neighbor_radius * neighbor_radius
    for i in range(N):
        if not active[i]:
            continue
        n = 0
        for j in range(N):
            if j == i or not active[j]:
                continue
            dx = pos[j, 0] - pos[i, 0]
            dy = pos[j, 1] - pos[i, 1]
            if dx * dx + dy * dy > nr2:
                continue
            nb_px[n] = pos[j, 0]
            nb_py[n] = pos[j, 1]
            nb_vx[n] = v_prev[j, 0]
            nb_vy[n] = v_prev[j, 1]
            nb_r[n] = radii[j]
            nb_id[n] = ids[j]
            n += 1
        ex, ey, it, sat = _project_one(pos[i, 0], pos[i, 1], v_int[i, 0], v_int[i, 1],
                                       goals[i, 0], goals[i, 1], radii[i], nb_px, nb_py, nb_vx,
                                       nb_vy, nb_r, nb_id, n, margin, max_iters, nsub, dt)
        out[i, 0] = ex
        out[i, 1] = ey
        iters[i] = it
        saturated[i] = sat
    return out, iters, saturated


def modified_mask(executed: np.ndarray, intended: np.ndarray, eta: float) -> np.ndarray:
    d = executed - intended
    return np.sqrt((d * d).sum(-1)) > eta


def project_safe(agent: AgentState, intended: VelocityCommand,
                 neighbors: Sequence[tuple[AgentState, VelocityCommand]],
                 cfg: ProjectionConfig = ProjectionConfig()) -> ProjectionOutcome:
    """Correct ``intended`` so no predicted pair separation drops below the margin.

    Neighbors are predicted at constant velocity over ``cfg.horizon`` and
    checked at every ``cfg.dt`` substep. The command is first scaled down; if
    even a full stop leaves a pair in violation the agent slides tangentially
    around its closest neighbor. When nothing works the result is a zero
    command flagged as modified.
    """
    nbrs = [(s, c) for s, c in neighbors if not s.completed]
    n = len(nbrs)
    nb_px = np.array([s.position[0] for s, _ in nbrs], dtype=float)
    nb_py = np.array([s.position[1] for s, _ in nbrs], dtype=float)
    nb_vx = np.array([c.vx for _, c in nbrs], dtype=float)
    nb_vy = np.array([c.vy for _, c in nbrs], dtype=float)
    nb_r = np.array([s.radius for s, _ in nbrs], dtype=float)
    nb_id = np.array([s.id for s, _ in nbrs], dtype=np.int64)
    ex, ey, it, sat = _project_one(agent.position[0], agent.position[1], intended.vx, intended.vy,
                                   agent.goal[0], agent.goal[1], agent.radius, nb_px, nb_py,
                                   nb_vx, nb_vy, nb_r, nb_id, n, cfg.margin, cfg.max_iters,
                                   cfg.substeps, cfg.dt)
    executed = VelocityCommand(ex, ey)
    modified = bool(sat) or math.hypot(ex - intended.vx, ey - intended.vy) > cfg.eta
    return ProjectionOutcome(executed=executed, modified=modified, iterations_used=int(it))


def proj_act_rate(log: Iterable[ProjectionOutcome | bool]) -> float:
    """Fraction of projection calls that modified the intended command."""
    flags = [o.modified if isinstance(o, ProjectionOutcome) else bool(o) for o in log]
    if not flags:
        return 0.0
    return sum(flags) / len(flags)
