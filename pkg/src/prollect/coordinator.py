"""Preemptive windowed coordinator.

Time is cut into control cycles of ``t_step``. Every agent carries a plan of
per-cycle velocity commands. Slot 0 is the cycle being executed. The first
``F = alpha + d`` slots are frozen (frozen window plus the transmission
delay), the following ``P`` slots form the planning window, and slot
``F + P`` is the one-step detection interval at the head of the look-ahead
window. Each cycle:

1. snapshot the buffered intents at the cut-off,
2. shift every plan by one slot and append the snapshot intent,
3. predict pairwise conflicts inside the detection interval,
4. if any, slow the yielding agent over the adjustment interval
   (slots ``F .. F+P``), leaving the frozen prefix untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import AgentState, TimingConfig, VelocityCommand

SPEED_FACTORS = (0.75, 0.5, 0.25, 0.0)


@dataclass(frozen=True)
class FrozenPlan:
    agent_id: int
    start_time: float
    t_step: float
    commands: tuple[VelocityCommand, ...]

    @property
    def schedule(self) -> list[tuple[float, VelocityCommand]]:
        return [(self.start_time + k * self.t_step, c) for k, c in enumerate(self.commands)]

    @property
    def horizon(self) -> float:
        return len(self.commands) * self.t_step

    def covers(self, duration: float) -> bool:
        return self.horizon + 1e-9 >= duration

    def command_at(self, t: float) -> VelocityCommand:
        k = int(math.floor((t - self.start_time) / self.t_step + 1e-9))
        if not 0 <= k < len(self.commands):
            raise IndexError(f"time {t} outside plan coverage")
        return self.commands[k]


@dataclass(frozen=True)
class IntentRecord:
    agent_id: int
    desired_command: VelocityCommand
    submit_time: float
    version: int


@dataclass(frozen=True)
class ConflictRecord:
    pair: tuple[int, int]
    breach_time: float
    predicted_clearance: float


@dataclass(frozen=True)
class AdjustmentDirective:
    agent_id: int
    speed_factor: float
    interval: tuple[float, float]
    saturated: bool = False
    # radians, counter-clockwise; nonzero only for the steering fallback
    heading_offset: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.speed_factor <= 1.0:
            raise ValueError("adjustments may only slow an agent down")


@dataclass
class CycleLog:
    cycle: int
    time: float
    conflicts: int
    preempt_triggered: bool
    directives: list[tuple[int, float]] = field(default_factory=list)

    def csv_row(self) -> str:
        d = ";".join(f"{a}:{f:.2f}" for a, f in self.directives)
        return f"{self.cycle},{self.conflicts},{int(self.preempt_triggered)},{d}"


CYCLE_LOG_HEADER = "cycle,conflicts,preempt,directives"


@dataclass(frozen=True)
class CoordinatorConfig:
    margin: float = 0.3
    e_track: float = 0.05
    preemption_enabled: bool = True
    factors: tuple[float, ...] = SPEED_FACTORS
    # t_step slots scanned for conflicts after the planning window
    detect_steps: int = 1
    # heading offsets (degrees) tried when no speed factor clears a yielder
    steer_angles: tuple[float, ...] = (15.0, 30.0, 45.0, 60.0, 75.0, 90.0)
    # re-seed every non-frozen slot from the fresh intent before detection
    refresh: bool = True

    def __post_init__(self):
        if self.detect_steps < 1:
            raise ValueError("detect_steps must be >= 1")

    @property
    def detection_margin(self) -> float:
        # both footprints inflated by the tracking envelope
        return self.margin + 2.0 * self.e_track


@dataclass(frozen=True)
class WindowLayout:
    """Slot indices derived from a :class:`TimingConfig` and a delivery delay."""

    frozen: int
    planning: int
    lookahead: int
    substeps: int
    t_step: float
    dt: float
    detect_steps: int = 1

    @classmethod
    def from_timing(cls, timing: TimingConfig, delay_cycles: int | None = None,
                    detect_steps: int = 1) -> "WindowLayout":
        d = timing.tx_cycles if delay_cycles is None else delay_cycles
        return cls(frozen=timing.frozen_cycles + d, planning=timing.planning_cycles,
                   lookahead=timing.lookahead_cycles, substeps=timing.substeps,
                   t_step=timing.t_step, dt=timing.dt, detect_steps=detect_steps)

    @property
    def detect_slot(self) -> int:
        return self.frozen + self.planning

    @property
    def horizon(self) -> int:
        return self.frozen + self.planning + self.detect_steps

    @property
    def adjust_slots(self) -> slice:
        return slice(self.frozen, self.horizon)

    @property
    def bundle_slots(self) -> int:
        return self.frozen + 1

    def detection_times(self, t: float) -> np.ndarray:
        start = t + self.detect_slot * self.t_step
        return start + self.dt * np.arange(1, self.substeps * self.detect_steps + 1)

    def predict(self, pos: np.ndarray, plans: np.ndarray) -> np.ndarray:
        """Positions at every ``dt`` of the detection interval; ``(N, K, 2)``."""
        return predict_window(pos, plans, self.detect_slot, self.detect_steps, self.t_step,
                              self.dt, self.substeps)


# ---------------------------------------------------------------------------
# array kernels


def predict_slot(pos: np.ndarray, plan: np.ndarray, slot: int, t_step: float, dt: float,
                 substeps: int) -> np.ndarray:
    """Positions at the ``dt`` substeps inside ``slot``; shape ``(N, substeps, 2)``."""
    start = pos + t_step * plan[:, :slot].sum(axis=1)
    k = dt * np.arange(1, substeps + 1)
    return start[:, None, :] + plan[:, slot][:, None, :] * k[None, :, None]


def predict_window(pos: np.ndarray, plan: np.ndarray, first: int, count: int, t_step: float,
                   dt: float, substeps: int) -> np.ndarray:
    """Substep positions over slots ``first .. first + count``; ``(N, count * substeps, 2)``."""
    return np.concatenate([predict_slot(pos, plan, s, t_step, dt, substeps)
                           for s in range(first, first + count)], axis=1)


def conflict_pairs(pts: np.ndarray, radii: np.ndarray, active: np.ndarray, margin: float,
                   ext_pts: np.ndarray | None = None, ext_radii: np.ndarray | None = None):
    """Pairs whose predicted center distance drops below ``r_i + r_j + margin``.

    Returns ``(i, j, first_substep, min_clearance)`` arrays with ``i < j``;
    indices ``>= N`` refer to external (shadow) participants.
    """
    if ext_pts is not None and len(ext_pts):
        pts = np.concatenate([pts, ext_pts])
        radii = np.concatenate([radii, ext_radii])
        active = np.concatenate([active, np.ones(len(ext_pts), dtype=bool)])
    M = len(pts)
    if M < 2:
        e = np.zeros(0, dtype=int)
        return e, e, e, np.zeros(0)
    diff = pts[:, None, :, :] - pts[None, :, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))  # (M, M, K)
    rsum = radii[:, None] + radii[None, :]
    hit = dist < (rsum + margin)[:, :, None]
    pair_ok = np.triu(active[:, None] & active[None, :], 1)
    any_hit = hit.any(-1) & pair_ok
    ii, jj = np.nonzero(any_hit)
    first = hit[ii, jj].argmax(-1)
    clear = dist[ii, jj].min(-1) - rsum[ii, jj]
    return ii, jj, first, clear


def _find_cycle(edges: Sequence[tuple[int, int]]) -> list[int] | None:
    graph: dict[int, list[int]] = {}
    for y, o in edges:
        graph.setdefault(y, []).append(o)
    color: dict[int, int] = {}
    stack: list[int] = []

    def visit(u: int) -> list[int] | None:
        color[u] = 1
        stack.append(u)
        for v in graph.get(u, ()):
            if color.get(v) == 1:
                return stack[stack.index(v):]
            if v not in color:
                found = visit(v)
                if found:
                    return found
        color[u] = 2
        stack.pop()
        return None

    for u in sorted(graph):
        if u not in color:
            found = visit(u)
            if found:
                return found
    return None


def break_yield_cycles(edges: Sequence[tuple[int, int]], remaining: Mapping[int, float],
                       owned: set[int]) -> list[tuple[int, int]]:
    """Make the yield relation acyclic.

    Edges are ``(yielder, other)``. Pairwise rules can chain into a ring in
    which every agent waits on the next; on each ring the agent closest to
    its goal (then the lowest id) stops yielding and its owned partners
    yield to it instead.
    """
    edges = list(dict.fromkeys(edges))
    for _ in range(len(edges) + 1):
        ring = _find_cycle(edges)
        if ring is None:
            return edges
        on_ring = [k for k in ring if k in owned]
        if not on_ring:
            return edges
        w = min(on_ring, key=lambda k: (remaining.get(k, 0.0), k))
        flipped = []
        for y, o in edges:
            if y == w and o in owned:
                flipped.append((o, w))
            else:
                flipped.append((y, o))
        edges = list(dict.fromkeys(flipped))
    return edges


class Coordinator:
    """Array-backed coordinator for one subspace; plans are ``(N, H, 2)``."""

    def __init__(self, layout: WindowLayout, cfg: CoordinatorConfig):
        self.layout = layout
        self.cfg = cfg

    def initial_plans(self, intents: np.ndarray) -> np.ndarray:
        return np.repeat(intents[:, None, :], self.layout.horizon, axis=1).copy()

    def shift_append(self, plans: np.ndarray, intents: np.ndarray) -> np.ndarray:
        out = np.empty_like(plans)
        out[:, :-1] = plans[:, 1:]
        out[:, -1] = intents
        if self.cfg.refresh:
            out[:, self.layout.frozen:] = intents[:, None, :]
        return out

    def detect(self, pos, plans, radii, active, ids, t, ext_pts=None, ext_radii=None,
               ext_ids=None) -> list[ConflictRecord]:
        lay = self.layout
        pts = lay.predict(pos, plans)
        ii, jj, first, clear = conflict_pairs(pts, radii, active, self.cfg.detection_margin,
                                              ext_pts, ext_radii)
        all_ids = ids if ext_ids is None else np.concatenate([ids, ext_ids])
        times = lay.detection_times(t)
        recs = []
        n = len(pos)
        for a, b, k, c in zip(ii, jj, first, clear):
            if a >= n and b >= n:
                continue  # shadow pairs belong to their owners
            ia, ib = int(all_ids[a]), int(all_ids[b])
            recs.append(((float(times[k]), min(ia, ib), max(ia, ib)),
                         ConflictRecord((min(ia, ib), max(ia, ib)), float(times[k]), float(c))))
        recs.sort(key=lambda x: x[0])
        return [r for _, r in recs]

    @staticmethod
    def yielder(a: int, b: int, remaining: Mapping[int, float]) -> int:
        """Agent that slows: the one farther from its goal, then the lower id."""
        ka = (-remaining[a], a)
        kb = (-remaining[b], b)
        return a if ka < kb else b

    def preempt(self, conflicts: Sequence[ConflictRecord], pos, plans, radii, active, ids,
                remaining: Mapping[int, float], ext_pts=None, ext_radii=None,
                ext_ids=None, ext_hold=None,
                mutual=None) -> tuple[np.ndarray, list[AdjustmentDirective]]:
        """Choose and apply speed factors; returns the adjusted plans and directives.

        Shadows (``ext_*``) are never adjusted here. ``ext_hold`` gives each
        shadow's position at the start of the adjustable slots, so every
        coordinator seeing a pair reaches the same yield decision. When that
        decision falls on a shadow whose owner also sees our agent
        (``mutual[shadow]`` holds our id), the owner resolves the pair;
        otherwise our agent treats the shadow as a hard obstacle.
        """
        lay = self.layout
        index = {int(k): n for n, k in enumerate(ids)}
        owned = set(index)
        ext_index = {} if ext_ids is None else {int(k): n for n, k in enumerate(ext_ids)}
        plans = plans.copy()
        pts = lay.predict(pos, plans)
        hold = pos + lay.t_step * plans[:, :lay.frozen].sum(axis=1)
        margin = self.cfg.detection_margin

        def can_clear(y: int, other: int) -> bool:
            if y in index:
                p, r = hold[index[y]], radii[index[y]]
            elif ext_hold is not None:
                p, r = ext_hold[ext_index[y]], ext_radii[ext_index[y]]
            else:
                return False
            return self._clear(p[None], r, other, index, ext_index, pts, radii, ext_pts,
                               ext_radii, margin)

        edges: list[tuple[int, int]] = []
        blocked: list[int] = []
        for rec in conflicts:
            a, b = rec.pair
            y = self.yielder(a, b, remaining)
            other = b if y == a else a
            # a yielder that cannot clear even at standstill hands the turn to its partner
            if not can_clear(y, other) and can_clear(other, y):
                y, other = other, y
            if y not in owned:
                if mutual is None or other not in mutual.get(y, ()):
                    y, other = other, y
                elif not can_clear(y, other):
                    # the shadow's owner cannot resolve it by slowing: steer ours
                    blocked.append(other)
            edges.append((y, other))
        # shadow yield edges still close rings; their owners act on them
        edges = [e for e in break_yield_cycles(edges, remaining, owned) if e[0] in owned]
        partners: dict[int, list[int]] = {}
        for y, other in edges:
            partners.setdefault(y, []).append(other)
        directives = []
        for y, others in partners.items():
            iy = index[y]
            chosen, saturated = None, False
            for f in self.cfg.factors:
                trial = plans[iy].copy()
                trial[lay.adjust_slots] *= f
                tp = lay.predict(pos[iy:iy + 1], trial[None])[0]
                if all(self._clear(tp, radii[iy], o, index, ext_index, pts, radii, ext_pts,
                                   ext_radii, margin) for o in others):
                    chosen = f
                    break
            heading = 0.0
            steered_partner = None
            if chosen is None:
                chosen, saturated = 0.0, True
                steer = self._steer(iy, pos, plans, radii, active, pts, ext_pts, ext_radii, margin)
                if steer is not None:
                    chosen, heading = steer
                    saturated = False
            self._apply(iy, chosen, heading, pos, plans, pts)
            if saturated:
                # the yielder is stuck in a partner's path: the partner steers around it
                for o in others:
                    if o not in index or o in partners:
                        continue
                    steer = self._steer(index[o], pos, plans, radii, active, pts, ext_pts,
                                        ext_radii, margin, best_effort=True)
                    if steer is not None:
                        self._apply(index[o], steer[0], steer[1], pos, plans, pts)
                        steered_partner = AdjustmentDirective(o, steer[0],
                                                              self.adjust_interval(0.0),
                                                              False, steer[1])
                        break
            directives.append(AdjustmentDirective(y, chosen, self.adjust_interval(0.0),
                                                  saturated, heading))
            if steered_partner is not None:
                directives.append(steered_partner)
        done = {d.agent_id for d in directives}
        for o in dict.fromkeys(blocked):
            if o in done:
                continue
            steer = self._steer(index[o], pos, plans, radii, active, pts, ext_pts, ext_radii,
                                margin, best_effort=True)
            if steer is not None:
                self._apply(index[o], steer[0], steer[1], pos, plans, pts)
                directives.append(AdjustmentDirective(o, steer[0], self.adjust_interval(0.0),
                                                      False, steer[1]))
        return plans, directives

    def _apply(self, i, factor, heading, pos, plans, pts):
        lay = self.layout
        seg = plans[i, lay.adjust_slots] * factor
        if heading:
            c, s_ = math.cos(heading), math.sin(heading)
            seg = seg @ np.array([[c, s_], [-s_, c]])
        plans[i, lay.adjust_slots] = seg
        pts[i] = lay.predict(pos[i:i + 1], plans[i:i + 1])[0]

    def _steer(self, iy, pos, plans, radii, active, pts, ext_pts, ext_radii, margin,
               best_effort=False):
        """First ``(factor, heading)`` that clears every other agent, or ``None``.

        Tried only when slowing down cannot clear the yielder (a partner is
        heading into its standstill position). Smaller turns and higher
        speeds come first; left turns precede right turns at equal angle.
        With ``best_effort`` and no clearing candidate, the candidate with the
        largest worst-case slack is returned if it beats the unsteered plan.
        """
        lay = self.layout
        others = [k for k in range(len(pos)) if k != iy and active[k]]

        def slack(tp):
            s = min((np.sqrt(((tp - pts[k]) ** 2).sum(-1)).min() - radii[iy] - radii[k] - margin
                     for k in others), default=math.inf)
            if ext_pts is not None and len(ext_pts):
                d = np.sqrt(((tp[None] - ext_pts) ** 2).sum(-1)).min(-1)
                s = min(s, float((d - radii[iy] - ext_radii - margin).min()))
            return s

        best, best_s = None, slack(pts[iy])
        for deg in self.cfg.steer_angles:
            for sign in (1.0, -1.0):
                a = math.radians(sign * deg)
                c, s_ = math.cos(a), math.sin(a)
                rot = np.array([[c, s_], [-s_, c]])
                for f in (1.0, 0.5):
                    trial = plans[iy].copy()
                    trial[lay.adjust_slots] = (trial[lay.adjust_slots] * f) @ rot
                    s = slack(lay.predict(pos[iy:iy + 1], trial[None])[0])
                    if s >= 0:
                        return f, a
                    if s > best_s + 1e-9:
                        best, best_s = (f, a), s
        return best if best_effort else None

    @staticmethod
    def _clear(tp, ry, other, index, ext_index, pts, radii, ext_pts, ext_radii, margin) -> bool:
        if other in index:
            op, ro = pts[index[other]], radii[index[other]]
        else:
            op, ro = ext_pts[ext_index[other]], ext_radii[ext_index[other]]
        d = np.sqrt(((tp - op) ** 2).sum(-1))
        return bool((d >= ry + ro + margin).all())

    def adjust_interval(self, t: float) -> tuple[float, float]:
        lay = self.layout
        return (t + lay.frozen * lay.t_step, t + lay.horizon * lay.t_step)

    def cycle(self, cycle: int, t: float, pos, plans, intents, radii, active, ids,
              remaining: Mapping[int, float], ext_pts=None, ext_radii=None, ext_ids=None):
        """One coordinator cycle; returns ``(new_plans, CycleLog, conflicts, directives)``."""
        plans = self.shift_append(plans, intents)
        conflicts = self.detect(pos, plans, radii, active, ids, t, ext_pts, ext_radii, ext_ids)
        directives: list[AdjustmentDirective] = []
        if conflicts and self.cfg.preemption_enabled:
            plans, directives = self.preempt(conflicts, pos, plans, radii, active, ids, remaining,
                                             ext_pts, ext_radii, ext_ids)
            directives = [AdjustmentDirective(d.agent_id, d.speed_factor,
                                              self.adjust_interval(t), d.saturated,
                                              d.heading_offset)
                          for d in directives]
        log = CycleLog(cycle, t, len(conflicts), bool(directives),
                       [(d.agent_id, d.speed_factor) for d in directives])
        return plans, log, conflicts, directives


# ---------------------------------------------------------------------------
# record-level API


class IntentBuffer:
    """Double-buffered intent store: snapshots consume records up to the cut-off."""

    def __init__(self):
        self._records: list[IntentRecord] = []
        self._last_version: dict[int, int] = {}

    def submit(self, rec: IntentRecord) -> None:
        last = self._last_version.get(rec.agent_id)
        if last is not None and rec.version <= last:
            raise ValueError(f"intent versions must increase for agent {rec.agent_id}")
        self._last_version[rec.agent_id] = rec.version
        self._records.append(rec)

    @property
    def pending(self) -> list[IntentRecord]:
        return list(self._records)

    def snapshot(self, cutoff: float,
                 defaults: Mapping[int, VelocityCommand] | None = None) -> dict[int, VelocityCommand]:
        taken = snapshot_intents(self._records, cutoff, defaults)
        self._records = [r for r in self._records if r.submit_time > cutoff]
        return taken


def snapshot_intents(buffer: Iterable[IntentRecord], cutoff: float,
                     defaults: Mapping[int, VelocityCommand] | None = None
                     ) -> dict[int, VelocityCommand]:
    """Highest-version intent per agent submitted no later than ``cutoff``.

    Agents without an eligible record fall back to ``defaults`` (their
    nominal command).
    """
    best: dict[int, IntentRecord] = {}
    for rec in buffer:
        if rec.submit_time > cutoff:
            continue
        cur = best.get(rec.agent_id)
        if cur is None or rec.version > cur.version:
            best[rec.agent_id] = rec
    out = dict(defaults or {})
    out.update({k: r.desired_command for k, r in best.items()})
    return out


def snapshot_cutoff(t: float, timing: TimingConfig) -> float:
    return t + timing.t_frozen + timing.t_planning + timing.t_pad


def _stack(states: Sequence[AgentState], plans: Mapping[int, FrozenPlan],
           intents: Mapping[int, VelocityCommand], layout: WindowLayout):
    pos = np.array([s.position for s in states], dtype=float).reshape(-1, 2)
    radii = np.array([s.radius for s in states], dtype=float)
    active = np.array([not s.completed for s in states], dtype=bool)
    ids = np.array([s.id for s in states], dtype=int)
    arr = np.zeros((len(states), layout.horizon, 2))
    for n, s in enumerate(states):
        cmds = list(plans[s.id].commands) if s.id in plans else []
        fill = intents.get(s.id, VelocityCommand.zero())
        for k in range(layout.horizon):
            c = cmds[k] if k < len(cmds) else fill
            arr[n, k] = (c.vx, c.vy)
    return pos, radii, active, ids, arr


def _require_coverage(states, plans, layout: WindowLayout):
    for s in states:
        if s.completed:
            continue
        p = plans.get(s.id)
        if p is None or len(p.commands) < layout.frozen:
            raise ValueError(f"agent {s.id} has no committed plan covering the frozen window")


def detect_conflicts(states: Sequence[AgentState], intents: Mapping[int, VelocityCommand],
                     plans: Mapping[int, FrozenPlan], timing: TimingConfig,
                     margin: float = 0.3, t: float | None = None) -> list[ConflictRecord]:
    """Conflicts inside the detection interval, sorted by breach time then ids.

    Each agent follows its committed plan and then its intent (piecewise
    constant velocity); a pair conflicts when its predicted center distance
    drops below ``r_i + r_j + margin`` at a substep of the interval.
    """
    layout = WindowLayout.from_timing(timing)
    _require_coverage(states, plans, layout)
    if t is None:
        t = min((p.start_time for p in plans.values()), default=0.0)
    pos, radii, active, ids, arr = _stack(states, plans, intents, layout)
    coord = Coordinator(layout, CoordinatorConfig(margin=margin, e_track=0.0))
    return coord.detect(pos, arr, radii, active, ids, t)


def preempt_adjust(conflicts: Sequence[ConflictRecord], states: Sequence[AgentState],
                   intents: Mapping[int, VelocityCommand], timing: TimingConfig,
                   plans: Mapping[int, FrozenPlan] | None = None, margin: float = 0.3,
                   t: float = 0.0) -> list[AdjustmentDirective]:
    """Slow the yielding agent of every conflicting pair by the mildest sufficient factor."""
    if not conflicts:
        return []
    layout = WindowLayout.from_timing(timing)
    plans = plans or {s.id: FrozenPlan(s.id, t, timing.t_step,
                                       (intents[s.id],) * layout.horizon) for s in states}
    pos, radii, active, ids, arr = _stack(states, plans, intents, layout)
    remaining = {s.id: s.distance_to_goal() for s in states}
    coord = Coordinator(layout, CoordinatorConfig(margin=margin, e_track=0.0))
    _, directives = coord.preempt(conflicts, pos, arr, radii, active, ids, remaining)
    # an agent named twice keeps its smallest factor
    merged: dict[int, AdjustmentDirective] = {}
    for d in directives:
        cur = merged.get(d.agent_id)
        if cur is None or d.speed_factor < cur.speed_factor:
            merged[d.agent_id] = AdjustmentDirective(d.agent_id, d.speed_factor,
                                                     coord.adjust_interval(t), d.saturated)
    return list(merged.values())


def compose_directives(directives: Iterable[AdjustmentDirective]) -> dict[int, float]:
    """Minimum factor per agent."""
    out: dict[int, float] = {}
    for d in directives:
        out[d.agent_id] = min(out.get(d.agent_id, 1.0), d.speed_factor)
    return out


def coordinator_cycle(states: Sequence[AgentState], buffer: IntentBuffer,
                      plans: Mapping[int, FrozenPlan], timing: TimingConfig,
                      cfg: CoordinatorConfig = CoordinatorConfig(), t: float = 0.0,
                      cycle: int = 0,
                      defaults: Mapping[int, VelocityCommand] | None = None
                      ) -> tuple[dict[int, FrozenPlan], CycleLog]:
    """Snapshot, detect, preempt and commit for one cycle starting at ``t``.

    ``plans`` are the plans committed at the previous cycle (start time
    ``t - t_step``); the returned plans start at ``t``.
    """
    layout = WindowLayout.from_timing(timing)
    intents = buffer.snapshot(snapshot_cutoff(t, timing), defaults)
    prev = {}
    for s in states:
        p = plans.get(s.id)
        if p is None:
            fill = intents.get(s.id, VelocityCommand.zero())
            p = FrozenPlan(s.id, t - timing.t_step, timing.t_step, (fill,) * layout.horizon)
        prev[s.id] = p
    pos, radii, active, ids, arr = _stack(states, prev, intents, layout)
    icmd = np.array([[intents.get(s.id, VelocityCommand.zero()).vx,
                      intents.get(s.id, VelocityCommand.zero()).vy] for s in states],
                    dtype=float).reshape(-1, 2)
    remaining = {s.id: s.distance_to_goal() for s in states}
    coord = Coordinator(layout, cfg)
    new, log, _, _ = coord.cycle(cycle, t, pos, arr, icmd, radii, active, ids, remaining)
    out = {s.id: FrozenPlan(s.id, t, timing.t_step,
                            tuple(VelocityCommand(float(v[0]), float(v[1])) for v in new[n]))
           for n, s in enumerate(states)}
    return out, log


def preemption_rate(logs: Sequence[CycleLog]) -> float:
    if not logs:
        return 0.0
    return sum(1 for c in logs if c.preempt_triggered) / len(logs)
