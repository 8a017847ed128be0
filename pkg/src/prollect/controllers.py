"""Baseline controllers: reactive VO-projection, reactive ORCA and DMPC best response.

Each controller only produces an *intended* command. The shared safety
projection in :mod:`prollect.safety` is applied afterwards by the runner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .core import AgentState, VelocityCommand, WorldConfig, nominal_command

RVO_EPSILON = 1e-5


@dataclass(frozen=True)
class OrcaConfig:
    time_horizon: float = 1.0
    neighbor_radius: float = 20.0
    # extra clearance each agent adds to its own radius (half the pair margin)
    radius_padding: float = 0.15
    time_step: float = 0.2

    def __post_init__(self):
        if self.time_horizon <= 0:
            raise ValueError("time_horizon must be positive")


@dataclass(frozen=True)
class DmpcConfig:
    iterations: int = 3
    horizon: float = 1.0
    dt: float = 0.05
    speed_levels: tuple[float, ...] = (1.0, 0.75, 0.5, 0.25, 0.0)
    heading_levels: int = 16
    separation_weight: float = 50.0
    separation_buffer: float = 0.4  # margin + 0.1
    neighbor_radius: float = 20.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.speed_levels or self.heading_levels < 1:
            raise ValueError("candidate grid must be nonempty")


def vo_projection_intent(agent: AgentState, world: WorldConfig) -> VelocityCommand:
    """Straight-to-goal at full speed; all avoidance is left to the projection layer."""
    return nominal_command(agent, world)


# ---------------------------------------------------------------------------
# ORCA: half-plane construction and incremental 2-D linear programming


@njit(cache=True)
def _det(ax, ay, bx, by):
    return ax * by - ay * bx


@njit(cache=True)
def _lp1(lines, line_no, radius, optx, opty, direction_opt):
    px = lines[line_no, 0]
    py = lines[line_no, 1]
    dx = lines[line_no, 2]
    dy = lines[line_no, 3]
    dot = px * dx + py * dy
    disc = dot * dot + radius * radius - (px * px + py * py)
    if disc < 0.0:
        return False, 0.0, 0.0
    sq = math.sqrt(disc)
    t_left = -dot - sq
    t_right = -dot + sq
    for i in range(line_no):
        denom = _det(dx, dy, lines[i, 2], lines[i, 3])
        numer = _det(lines[i, 2], lines[i, 3], px - lines[i, 0], py - lines[i, 1])
        if abs(denom) <= RVO_EPSILON:
            if numer < 0.0:
                return False, 0.0, 0.0
            continue
        t = numer / denom
        if denom >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return False, 0.0, 0.0
    if direction_opt:
        if optx * dx + opty * dy > 0.0:
            return True, px + t_right * dx, py + t_right * dy
        return True, px + t_left * dx, py + t_left * dy
    t = dx * (optx - px) + dy * (opty - py)
    if t < t_left:
        return True, px + t_left * dx, py + t_left * dy
    if t > t_right:
        return True, px + t_right * dx, py + t_right * dy
    return True, px + t * dx, py + t * dy


@njit(cache=True)
def _lp2(lines, n, radius, optx, opty, direction_opt):
    if direction_opt:
        rx = optx * radius
        ry = opty * radius
    elif optx * optx + opty * opty > radius * radius:
        norm = math.sqrt(optx * optx + opty * opty)
        rx = optx / norm * radius
        ry = opty / norm * radius
    else:
        rx = optx
        ry = opty
    for i in range(n):
        if _det(lines[i, 2], lines[i, 3], lines[i, 0] - rx, lines[i, 1] - ry) > 0.0:
            ok, nx, ny = _lp1(lines, i, radius, optx, opty, direction_opt)
            if not ok:
                return i, rx, ry
            rx = nx
            ry = ny
    return n, rx, ry


@njit(cache=True)
def _lp3(lines, n, begin, radius, rx, ry):
    distance = 0.0
    proj = np.empty((n, 4))
    for i in range(begin, n):
        if _det(lines[i, 2], lines[i, 3], lines[i, 0] - rx, lines[i, 1] - ry) > distance:
            m = 0
            for j in range(i):
                determinant = _det(lines[i, 2], lines[i, 3], lines[j, 2], lines[j, 3])
                if abs(determinant) <= RVO_EPSILON:
                    if lines[i, 2] * lines[j, 2] + lines[i, 3] * lines[j, 3] > 0.0:
                        continue
                    ppx = 0.5 * (lines[i, 0] + lines[j, 0])
                    ppy = 0.5 * (lines[i, 1] + lines[j, 1])
                else:
                    k = _det(lines[j, 2], lines[j, 3], lines[i, 0] - lines[j, 0],
                             lines[i, 1] - lines[j, 1]) / determinant
                    ppx = lines[i, 0] + k * lines[i, 2]
                    ppy = lines[i, 1] + k * lines[i, 3]
                ddx = lines[j, 2] - lines[i, 2]
                ddy = lines[j, 3] - lines[i, 3]
                nn = math.sqrt(ddx * ddx + ddy * ddy)
                proj[m, 0] = ppx
                proj[m, 1] = ppy
                proj[m, 2] = ddx / nn
                proj[m, 3] = ddy / nn
                m += 1
            keep_x = rx
            keep_y = ry
            cnt, nx, ny = _lp2(proj, m, radius, -lines[i, 3], lines[i, 2], True)
            if cnt < m:
                rx = keep_x
                ry = keep_y
            else:
                rx = nx
                ry = ny
            distance = _det(lines[i, 2], lines[i, 3], lines[i, 0] - rx, lines[i, 1] - ry)
    return rx, ry


@njit(cache=True)
def _orca_lines(px, py, vx, vy, r, nb_px, nb_py, nb_vx, nb_vy, nb_r, n, time_horizon, time_step):
    lines = np.empty((n, 4))
    inv_th = 1.0 / time_horizon
    for j in range(n):
        rpx = nb_px[j] - px
        rpy = nb_py[j] - py
        rvx = vx - nb_vx[j]
        rvy = vy - nb_vy[j]
        dist_sq = rpx * rpx + rpy * rpy
        cr = r + nb_r[j]
        cr_sq = cr * cr
        if dist_sq > cr_sq:
            wx = rvx - inv_th * rpx
            wy = rvy - inv_th * rpy
            w_len_sq = wx * wx + wy * wy
            dot1 = wx * rpx + wy * rpy
            if dot1 < 0.0 and dot1 * dot1 > cr_sq * w_len_sq:
                w_len = math.sqrt(w_len_sq)
                uwx = wx / w_len
                uwy = wy / w_len
                ldx = uwy
                ldy = -uwx
                ux = (cr * inv_th - w_len) * uwx
                uy = (cr * inv_th - w_len) * uwy
            else:
                leg = math.sqrt(dist_sq - cr_sq)
                if _det(rpx, rpy, wx, wy) > 0.0:
                    ldx = (rpx * leg - rpy * cr) / dist_sq
                    ldy = (rpx * cr + rpy * leg) / dist_sq
                else:
                    ldx = -(rpx * leg + rpy * cr) / dist_sq
                    ldy = -(-rpx * cr + rpy * leg) / dist_sq
                dot2 = rvx * ldx + rvy * ldy
                ux = dot2 * ldx - rvx
                uy = dot2 * ldy - rvy
        else:
            inv_ts = 1.0 / time_step
            wx = rvx - inv_ts * rpx
            wy = rvy - inv_ts * rpy
            w_len = math.sqrt(wx * wx + wy * wy)
            if w_len == 0.0:
                w_len = 1e-12
            uwx = wx / w_len
            uwy = wy / w_len
            ldx = uwy
            ldy = -uwx
            ux = (cr * inv_ts - w_len) * uwx
            uy = (cr * inv_ts - w_len) * uwy
        lines[j, 0] = vx + 0.5 * ux
        lines[j, 1] = vy + 0.5 * uy
        lines[j, 2] = ldx
        lines[j, 3] = ldy
    return lines


@njit(cache=True)
def _orca_one(px, py, vx, vy, r, prefx, prefy, nb_px, nb_py, nb_vx, nb_vy, nb_r, n, v_max,
              time_horizon, time_step):
    if n == 0:
        return prefx, prefy
    lines = _orca_lines(px, py, vx, vy, r, nb_px, nb_py, nb_vx, nb_vy, nb_r, n, time_horizon,
                        time_step)
    fail, rx, ry = _lp2(lines, n, v_max, prefx, prefy, False)
    if fail < n:
        rx, ry = _lp3(lines, n, fail, v_max, rx, ry)
    return rx, ry


@njit(cache=True)
def orca_team(pos, vel, pref, radii, active, v_max, time_horizon, time_step, neighbor_radius):
    N = pos.shape[0]
    out = np.zeros_like(pref)
    nb_px = np.empty(N)
    nb_py = np.empty(N)
    nb_vx = np.empty(N)
    nb_vy = np.empty(N)
    nb_r = np.empty(N)
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
            nb_vx[n] = vel[j, 0]
            nb_vy[n] = vel[j, 1]
            nb_r[n] = radii[j]
            n += 1
        rx, ry = _orca_one(pos[i, 0], pos[i, 1], vel[i, 0], vel[i, 1], radii[i], pref[i, 0],
                           pref[i, 1], nb_px, nb_py, nb_vx, nb_vy, nb_r, n, v_max, time_horizon,
                           time_step)
        s = math.sqrt(rx * rx + ry * ry)
        if s > v_max:
            rx *= v_max / s
            ry *= v_max / s
        out[i, 0] = rx
        out[i, 1] = ry
    return out


def orca_step(agent: AgentState, neighbors: Sequence[tuple[AgentState, VelocityCommand]],
              cfg: OrcaConfig, world: WorldConfig,
              velocity: VelocityCommand | None = None) -> VelocityCommand:
    """Velocity closest to the nominal command that satisfies every ORCA half-plane.

    ``velocity`` is the agent's own current velocity (defaults to nominal).
    Neighbors beyond ``cfg.neighbor_radius`` are ignored. Infeasible
    programs fall back to the least-violation relaxation.
    """
    pref = nominal_command(agent, world)
    if agent.completed:
        return pref
    own = velocity if velocity is not None else pref
    px, py = agent.position
    nbrs = [(s, c) for s, c in neighbors
            if not s.completed
            and math.hypot(s.position[0] - px, s.position[1] - py) <= cfg.neighbor_radius]
    n = len(nbrs)
    pad = cfg.radius_padding
    rx, ry = _orca_one(px, py, own.vx, own.vy, agent.radius + pad, pref.vx, pref.vy,
                       np.array([s.position[0] for s, _ in nbrs], dtype=float),
                       np.array([s.position[1] for s, _ in nbrs], dtype=float),
                       np.array([c.vx for _, c in nbrs], dtype=float),
                       np.array([c.vy for _, c in nbrs], dtype=float),
                       np.array([s.radius + pad for s, _ in nbrs], dtype=float),
                       n, world.v_max, cfg.time_horizon, cfg.time_step)
    return VelocityCommand(rx, ry, world.v_max)


# ---------------------------------------------------------------------------
# DMPC: iterative best response over a finite constant-velocity candidate grid


def candidate_grid(nominal: np.ndarray, cfg: DmpcConfig, v_max: float) -> np.ndarray:
    """Candidate velocities: exact nominal heading first, then the fixed heading ring."""
    speed = math.hypot(nominal[0], nominal[1])
    headings = [math.atan2(nominal[1], nominal[0])] if speed > 0 else []
    headings += [2.0 * math.pi * k / cfg.heading_levels for k in range(cfg.heading_levels)]
    out = []
    for h in headings:
        c, s = math.cos(h), math.sin(h)
        for lvl in cfg.speed_levels:
            out.append((lvl * v_max * c, lvl * v_max * s))
    if speed > 0:
        out[0] = (float(nominal[0]), float(nominal[1]))
    return np.array(out, dtype=float)


@njit(cache=True)
def _dmpc_cost(i, cx, cy, pos, it_vel, radii, active, nomx, nomy, horizon, dt, buffer, weight,
               nr2):
    ex = cx - nomx
    ey = cy - nomy
    cost = (ex * ex + ey * ey) * horizon
    nsub = int(round(horizon / dt))
    pen = 0.0
    N = pos.shape[0]
    for j in range(N):
        if j == i or not active[j]:
            continue
        dx0 = pos[i, 0] - pos[j, 0]
        dy0 = pos[i, 1] - pos[j, 1]
        if dx0 * dx0 + dy0 * dy0 > nr2:
            continue
        R = radii[i] + radii[j] + buffer
        rvx = cx - it_vel[j, 0]
        rvy = cy - it_vel[j, 1]
        for k in range(1, nsub + 1):
            tau = k * dt
            dx = dx0 + rvx * tau
            dy = dy0 + rvy * tau
            d = math.sqrt(dx * dx + dy * dy)
            if d < R:
                pen += (R - d) * (R - d)
    return cost + weight * pen


@njit(cache=True)
def dmpc_team(pos, nominal, radii, active, order, cands, iterations, horizon, dt, buffer, weight,
              neighbor_radius):
    """Sweep agents in ``order`` ``iterations`` times; ``cands[i]`` is agent i's grid."""
    it_vel = nominal.copy()
    nr2 = neighbor_radius * neighbor_radius
    for _ in range(iterations):
        for idx in range(order.shape[0]):
            i = order[idx]
            if not active[i]:
                continue
            best = 1e300
            bx = 0.0
            by = 0.0
            for c in range(cands.shape[1]):
                cx = cands[i, c, 0]
                cy = cands[i, c, 1]
                val = _dmpc_cost(i, cx, cy, pos, it_vel, radii, active, nominal[i, 0],
                                 nominal[i, 1], horizon, dt, buffer, weight, nr2)
                if val < best:
                    best = val
                    bx = cx
                    by = cy
            it_vel[i, 0] = bx
            it_vel[i, 1] = by
    return it_vel


def dmpc_arrays(states: Sequence[AgentState], cfg: DmpcConfig, world: WorldConfig):
    ordered = sorted(states, key=lambda s: s.id)
    pos = np.array([s.position for s in ordered], dtype=float).reshape(-1, 2)
    nominal = np.array([[nominal_command(s, world).vx, nominal_command(s, world).vy]
                        for s in ordered], dtype=float).reshape(-1, 2)
    radii = np.array([s.radius for s in ordered], dtype=float)
    active = np.array([not s.completed for s in ordered], dtype=bool)
    return ordered, pos, nominal, radii, active


def team_candidates(nominal: np.ndarray, cfg: DmpcConfig, v_max: float) -> np.ndarray:
    n_c = (cfg.heading_levels + 1) * len(cfg.speed_levels)
    out = np.zeros((nominal.shape[0], n_c, 2))
    for i in range(nominal.shape[0]):
        g = candidate_grid(nominal[i], cfg, v_max)
        out[i, :len(g)] = g
        if len(g) < n_c:
            out[i, len(g):] = g[0]
    return out


def dmpc_br_step(agents: Sequence[AgentState], cfg: DmpcConfig,
                 world: WorldConfig) -> Mapping[int, VelocityCommand]:
    """Iterative best response in ascending id order; returns commands keyed by id."""
    ordered, pos, nominal, radii, active = dmpc_arrays(agents, cfg, world)
    if not ordered:
        return {}
    cands = team_candidates(nominal, cfg, world.v_max)
    vel = dmpc_team(pos, nominal, radii, active, np.arange(len(ordered)), cands, cfg.iterations,
                    cfg.horizon, cfg.dt, cfg.separation_buffer, cfg.separation_weight,
                    cfg.neighbor_radius)
    return {s.id: VelocityCommand(float(vel[k, 0]), float(vel[k, 1]), world.v_max)
            for k, s in enumerate(ordered)}
