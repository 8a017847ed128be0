"""Lossy plan dissemination: i.i.d. broadcast blackouts plus a fixed delivery delay."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

RNG_ALGORITHM = "numpy.Philox4x64-10"
SCENARIO_STREAM = 0
COMMS_STREAM = 1


def make_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one named stream of a seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class CommConfig:
    p_drop: float = 0.0
    delay_cycles: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_drop < 1.0:
            raise ValueError("p_drop must lie in [0, 1)")
        if self.delay_cycles < 0:
            raise ValueError("delay_cycles must be >= 0")


@dataclass(frozen=True)
class DeliveryEntry:
    cycle: int
    delivered: bool
    delivery_cycle: int


class MessageBus:
    """Single-owner bus advanced once per cycle; one Bernoulli draw per broadcast."""

    def __init__(self, cfg: CommConfig):
        self.cfg = cfg
        self.rng = make_rng(cfg.seed, COMMS_STREAM)
        self.log: list[DeliveryEntry] = []
        self._inbox: dict[int, object] = {}

    def transmit(self, bundle, cycle: int) -> DeliveryEntry:
        entry = transmit(bundle, cycle, self.cfg, self.rng)
        self.log.append(entry)
        if entry.delivered:
            self._inbox[entry.delivery_cycle] = (cycle, bundle)
        return entry

    def receive(self, cycle: int):
        """Bundle becoming visible at ``cycle`` as ``(send_cycle, bundle)``, or None."""
        return self._inbox.pop(cycle, None)

    @property
    def delivered_flags(self) -> list[bool]:
        return [e.delivered for e in self.log]


def transmit(bundle, cycle: int, cfg: CommConfig, rng: np.random.Generator) -> DeliveryEntry:
    """Drop the whole bundle with probability ``p_drop``; else deliver after the delay."""
    # draw unconditionally so the stream position never depends on p_drop
    u = rng.random()
    delivered = not (u < cfg.p_drop)
    return DeliveryEntry(cycle, delivered, cycle + cfg.delay_cycles)


def delivery_log(n_cycles: int, cfg: CommConfig) -> list[DeliveryEntry]:
    rng = make_rng(cfg.seed, COMMS_STREAM)
    return [transmit(None, c, cfg, rng) for c in range(n_cycles)]


class FrozenBuffer:
    """An agent's last visible plan bundle; replayed slot by slot during blackouts."""

    def __init__(self, commands: np.ndarray, send_cycle: int):
        self.commands = np.asarray(commands, dtype=float)
        self.send_cycle = send_cycle
        self.starved = False

    def adopt(self, commands: np.ndarray, send_cycle: int) -> None:
        if send_cycle > self.send_cycle:
            self.commands = np.asarray(commands, dtype=float)
            self.send_cycle = send_cycle

    def command(self, cycle: int) -> np.ndarray | None:
        k = cycle - self.send_cycle
        if 0 <= k < len(self.commands):
            return self.commands[k]
        return None


def execute_with_fallback(buffer: FrozenBuffer, cycle: int,
                          fresh: tuple[int, np.ndarray] | None = None
                          ) -> tuple[np.ndarray, bool]:
    """Command for ``cycle``: adopt a fresh bundle if one is visible, else replay the buffer.

    Returns ``(command, starved)``; a buffer that no longer covers ``cycle``
    yields a zero command with ``starved=True``.
    """
    if fresh is not None:
        buffer.adopt(fresh[1], fresh[0])
    cmd = buffer.command(cycle)
    if cmd is None:
        buffer.starved = True
        return np.zeros(2), True
    return cmd, False


def required_frozen_cycles(epsilon: float, p_drop: float) -> int:
    """Smallest frozen-window length whose blackout-run probability stays below ``epsilon``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0.0 <= p_drop < 1.0:
        raise ValueError("p_drop must lie in [0, 1)")
    if p_drop == 0.0:
        return 1
    return max(1, math.ceil(math.log(epsilon) / math.log(p_drop) - 1e-12))


@dataclass(frozen=True)
class BlackoutAudit:
    max_streak: int
    violation_count: int
    empirical_violation_rate: float


def blackout_runs(delivered: Sequence[bool]) -> list[int]:
    runs, cur = [], 0
    for ok in delivered:
        if ok:
            if cur:
                runs.append(cur)
            cur = 0
        else:
            cur += 1
    if cur:
        runs.append(cur)
    return runs


def blackout_audit(log: Sequence[DeliveryEntry | bool], k_f: int) -> BlackoutAudit:
    """Blackout streak statistics against a frozen window of ``k_f`` cycles.

    ``violation_count`` counts maximal blackout runs longer than ``k_f``;
    ``empirical_violation_rate`` is the fraction of cycles that start ``k_f``
    consecutive blackouts, comparable to ``p_drop ** k_f``.
    """
    delivered = [e.delivered if isinstance(e, DeliveryEntry) else bool(e) for e in log]
    runs = blackout_runs(delivered)
    max_streak = max(runs, default=0)
    violations = sum(1 for r in runs if r > k_f)
    n = len(delivered)
    windows = n - k_f + 1
    if windows <= 0:
        return BlackoutAudit(max_streak, violations, 0.0)
    drop = np.logical_not(np.asarray(delivered, dtype=bool)).astype(np.int64)
    csum = np.concatenate([[0], np.cumsum(drop)])
    full = (csum[k_f:] - csum[:-k_f]) == k_f
    return BlackoutAudit(max_streak, violations, float(full.sum()) / windows)
