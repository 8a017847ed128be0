"""Single-run simulator shared by every method.

Each control cycle of ``t_step`` the method produces intended commands, the
shared safety projection corrects them, and agents integrate at ``dt`` until
the next cycle. Completed agents leave the interaction set.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..comms import CommConfig, MessageBus
from ..controllers import (DmpcConfig, OrcaConfig, dmpc_team, orca_team, team_candidates)
from ..coordinator import Coordinator, CoordinatorConfig, CycleLog, WindowLayout
from ..core import Rect, TimingConfig, WorldConfig, nominal_velocities
from ..hierarchy import assign_ownership_arrays, partition_grid, tube_centers
from ..metrics import RunMetrics, classify_deadlock
from ..safety import ProjectionConfig, modified_mask, project_team
from .scenarios import ScenarioSpec, World, build_scenario

METHODS = ("vo", "orca", "dmpc", "prollect")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "prollect"
    timing: TimingConfig = field(default_factory=TimingConfig)
    comm: CommConfig = field(default_factory=CommConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    preemption_enabled: bool = True
    seeds: int = 30
    world: WorldConfig = field(default_factory=WorldConfig)
    orca: OrcaConfig = field(default_factory=OrcaConfig)
    dmpc: DmpcConfig = field(default_factory=DmpcConfig)
    coordinator: CoordinatorConfig = field(default_factory=CoordinatorConfig)
    partition: tuple[int, int] | None = None
    overlap_band: float = 2.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if not math.isclose(self.projection.dt, self.timing.dt):
            raise ValueError("projection and integration must share dt")


def projection_signature(cfg: ProjectionConfig) -> str:
    """Hash identifying the projection operator and its configuration."""
    key = f"{project_team.__module__}.{project_team.__name__}|{cfg!r}"
    return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass
class RunTrace:
    """Per-cycle records kept for property checks."""

    remaining_sum: list[float] = field(default_factory=list)
    n_active: list[int] = field(default_factory=list)
    preempted: list[bool] = field(default_factory=list)
    ownership: list[np.ndarray] = field(default_factory=list)
    positions: list[np.ndarray] = field(default_factory=list)
    executed: list[np.ndarray] = field(default_factory=list)
    plans: list[np.ndarray] = field(default_factory=list)


@dataclass
class RunResult:
    metrics: RunMetrics
    projection_hash: str
    trace: RunTrace | None = None


class _Prollect:
    """Coordinator side of a run: windowed plans, lossy broadcast, frozen buffers."""

    def __init__(self, exp: ExperimentConfig, pos: np.ndarray, nominal: np.ndarray,
                 radii: np.ndarray, ids: np.ndarray, workspace: Rect):
        d = exp.comm.delay_cycles
        self.layout = WindowLayout.from_timing(exp.timing, d, exp.coordinator.detect_steps)
        self.coord = Coordinator(self.layout, replace(exp.coordinator,
                                                      preemption_enabled=exp.preemption_enabled))
        self.enabled = exp.preemption_enabled
        self.bus = MessageBus(exp.comm)
        self.plans = self.coord.initial_plans(nominal)
        nb = self.layout.bundle_slots
        # the nominal fill counts as delivered before the run starts
        self.buf = self.plans[:, :nb].copy()
        self.buf_send = -d
        self.radii = radii
        self.ids = ids
        self.starvation = 0
        self.logs = []
        self.subspaces = None
        self.owner = None
        if exp.partition is not None:
            nx, ny = exp.partition
            self.subspaces = partition_grid(workspace, nx, ny, exp.overlap_band)
            self.owner = assign_ownership_arrays(pos, self.subspaces, None)
        self.e_track = exp.coordinator.e_track

    def step(self, c: int, t: float, pos, nominal, active, remaining) -> np.ndarray:
        """Run cycle ``c`` and return the buffered command every agent executes."""
        lay = self.layout
        if self.subspaces is None:
            plans, log, _, _ = self.coord.cycle(
                c, t, pos, self.plans, nominal, self.radii, active, self.ids, remaining)
        else:
            plans, log = self._partitioned(c, t, pos, nominal, active, remaining)
        self.plans = plans
        self.logs.append(log)
        self.bus.transmit(plans[:, :lay.bundle_slots].copy(), c)
        got = self.bus.receive(c)
        if got is not None and got[0] > self.buf_send:
            self.buf_send, self.buf = got
        k = c - self.buf_send
        if k >= lay.bundle_slots:
            self.starvation += int(active.sum())
            return np.zeros_like(nominal)
        return self.buf[:, k].copy()

    def _partitioned(self, c, t, pos, nominal, active, remaining):
        lay = self.layout
        self.owner = assign_ownership_arrays(pos, self.subspaces, self.owner)
        shifted = self.coord.shift_append(self.plans, nominal)
        out = shifted.copy()
        det = lay.predict(pos, shifted)
        hold = pos + lay.t_step * shifted[:, :lay.frozen].sum(axis=1)
        tube_r = self.radii + self.e_track
        # tubes cover the adjustable slots plus the detection slot
        tubes = [tube_centers(pos[i], shifted[i], lay.t_step, lay.dt, lay.frozen, lay.horizon)
                 for i in range(len(pos))]
        live = np.nonzero(active)[0]
        # shadows: tubes reaching a foreign cell, plus the replies of that
        # cell's agents whose tubes come within conflict range of them
        sees = {sub.id: {int(j) for j in live if self.owner[j] != sub.id
                         and _touches(tubes[j], tube_r[j], sub.rect)}
                for sub in self.subspaces}
        reach = self.coord.cfg.margin
        for sid, seen in list(sees.items()):
            own = live[self.owner[live] == sid]
            for j in sorted(seen):
                for i in own:
                    gap = np.sqrt(((tubes[i] - tubes[j]) ** 2).sum(-1)).min()
                    if gap < tube_r[i] + tube_r[j] + reach:
                        sees[int(self.owner[j])].add(int(i))
        conflicts = 0
        directives = []
        for sub in self.subspaces:
            own = live[self.owner[live] == sub.id]
            if len(own) == 0:
                continue
            ext = np.array(sorted(sees[sub.id]), dtype=int)
            kw = {}
            if len(ext):
                kw = dict(ext_pts=det[ext], ext_radii=self.radii[ext], ext_ids=self.ids[ext])
            recs = self.coord.detect(pos[own], shifted[own], self.radii[own], active[own],
                                     self.ids[own], t, **kw)
            conflicts += len(recs)
            if recs and self.enabled:
                # owned agents that the shadow's own coordinator sees in return
                mutual = {int(self.ids[j]): {int(self.ids[i]) for i in own
                                             if i in sees[int(self.owner[j])]}
                          for j in ext}
                adj, dirs = self.coord.preempt(recs, pos[own], shifted[own], self.radii[own],
                                               active[own], self.ids[own], remaining,
                                               ext_hold=hold[ext], mutual=mutual, **kw)
                out[own] = adj
                directives += [(d.agent_id, d.speed_factor) for d in dirs]
        return out, CycleLog(c, t, conflicts, bool(directives), directives)


def _touches(pts: np.ndarray, radius: float, rect: Rect) -> bool:
    dx = np.maximum(np.maximum(rect.xmin - pts[:, 0], 0.0), pts[:, 0] - rect.xmax)
    dy = np.maximum(np.maximum(rect.ymin - pts[:, 1], 0.0), pts[:, 1] - rect.ymax)
    return bool((np.hypot(dx, dy) < radius).any())


def _intents(method: str, exp: ExperimentConfig, pos, v_prev, nominal, radii, active):
    if method == "vo":
        return nominal
    if method == "orca":
        pad = exp.orca.radius_padding
        return orca_team(pos, v_prev, nominal, radii + pad, active, exp.world.v_max,
                         exp.orca.time_horizon, exp.orca.time_step, exp.orca.neighbor_radius)
    cfg = exp.dmpc
    cands = team_candidates(nominal, cfg, exp.world.v_max)
    return dmpc_team(pos, nominal, radii, active, np.arange(len(pos)), cands, cfg.iterations,
                     cfg.horizon, cfg.dt, cfg.separation_buffer, cfg.separation_weight,
                     cfg.neighbor_radius)


def run_world(world: World, exp: ExperimentConfig, record: bool = False) -> RunResult:
    """Simulate one prepared world until every agent arrives or ``max_time`` elapses."""
    w = exp.world
    tm = exp.timing
    pr = exp.projection
    pos = world.starts.copy()
    goals = world.goals
    radii = world.radii
    ids = world.ids
    n = len(ids)
    w.check_radii(list(radii))
    dt = tm.dt
    sub = tm.substeps
    n_cycles = int(round(w.max_time / tm.t_step))

    done = np.linalg.norm(goals - pos, axis=1) <= w.goal_tolerance
    done_time = np.where(done, 0.0, np.nan)
    v_prev = np.zeros((n, 2))
    nominal = nominal_velocities(pos, goals, ~done, w.v_max)
    pro = (_Prollect(exp, pos, nominal, radii, ids, w.workspace)
           if exp.method == "prollect" else None)
    trace = RunTrace() if record else None

    min_center = math.inf
    min_clear = math.inf
    dv_sum = speed_sum = 0.0
    n_calls = n_mod = 0
    cycle_times, cycle_speeds, runtimes = [], [], []
    cycles_run = 0
    iu = np.triu_indices(n, 1)
    rsum = (radii[:, None] + radii[None, :])[iu]

    for c in range(n_cycles):
        active = ~done
        if not active.any():
            break
        cycles_run += 1
        t = c * tm.t_step
        nominal = nominal_velocities(pos, goals, active, w.v_max)
        remaining = np.linalg.norm(goals - pos, axis=1)
        t0 = time.perf_counter()
        if pro is not None:
            rem = {int(k): float(r) for k, r in zip(ids, remaining)}
            intent = pro.step(c, t, pos, nominal, active, rem)
        else:
            intent = _intents(exp.method, exp, pos, v_prev, nominal, radii, active)
        intent = np.where(active[:, None], intent, 0.0)
        t_ctrl = time.perf_counter() - t0
        if trace is not None:
            trace.remaining_sum.append(float(remaining[active].sum()))
            trace.n_active.append(int(active.sum()))
            trace.preempted.append(bool(pro is not None and pro.logs[-1].preempt_triggered))
            trace.positions.append(pos.copy())
            if pro is not None:
                trace.plans.append(pro.plans.copy())
                if pro.owner is not None:
                    trace.ownership.append(pro.owner.copy())

        # the intent is held for the cycle; the projection re-checks it every tick
        speeds = []
        for m in range(sub):
            moving = ~done
            if not moving.any():
                break
            t1 = time.perf_counter()
            executed, _, sat = project_team(pos, intent, v_prev, radii, goals, moving, ids,
                                            pr.margin, pr.max_iters, pr.horizon, pr.dt,
                                            w.neighbor_radius)
            t_ctrl += time.perf_counter() - t1
            executed = np.where(moving[:, None], executed, 0.0)
            nom = nominal_velocities(pos, goals, moving, w.v_max)
            mod = (modified_mask(executed, intent, pr.eta) | sat)[moving]
            n_calls += int(moving.sum())
            n_mod += int(mod.sum())
            sp = np.linalg.norm(executed, axis=1)[moving]
            dv_sum += float(np.linalg.norm(executed - nom, axis=1)[moving].sum())
            speed_sum += float(sp.sum())
            speeds.append(float(sp.mean()))
            if m == 0 and trace is not None:
                trace.executed.append(executed.copy())

            pos = pos + executed * dt
            if n > 1:
                diff = pos[:, None, :] - pos[None, :, :]
                dist = np.sqrt((diff ** 2).sum(-1))[iu]
                pair = (moving[:, None] & moving[None, :])[iu]
                if pair.any():
                    min_center = min(min_center, float(dist[pair].min()))
                    min_clear = min(min_clear, float((dist - rsum)[pair].min()))
            arrived = moving & (np.linalg.norm(goals - pos, axis=1) <= w.goal_tolerance)
            done_time[arrived] = t + (m + 1) * dt
            done = done | arrived
            v_prev = np.where(done[:, None], 0.0, executed)
        runtimes.append(t_ctrl)
        cycle_times.append(t)
        cycle_speeds.append(float(np.mean(speeds)) if speeds else 0.0)

    completed = bool(done.all())
    completion_time = float(np.nanmax(done_time)) if completed else None
    preempt_rate = 0.0
    if pro is not None and pro.logs:
        preempt_rate = sum(l.preempt_triggered for l in pro.logs) / len(pro.logs)
    metrics = RunMetrics(
        completed=completed,
        collision=bool(min_clear < 0.0),
        completion_time=completion_time,
        min_dist=min_center,
        min_clearance=min_clear,
        avg_speed=speed_sum / n_calls if n_calls else 0.0,
        avg_dv=dv_sum / n_calls if n_calls else 0.0,
        preempt_rate=preempt_rate,
        proj_act=n_mod / n_calls if n_calls else 0.0,
        deadlock=classify_deadlock(np.array(cycle_times), np.array(cycle_speeds), completed),
        runtime_per_call_us=float(np.median(runtimes)) * 1e6 if runtimes else 0.0,
        starvation_events=pro.starvation if pro is not None else 0,
    )
    return RunResult(metrics, projection_signature(pr), trace)


def run_single(spec: ScenarioSpec, exp: ExperimentConfig, record: bool = False) -> RunResult:
    return run_world(build_scenario(spec), exp, record)
