"""Executable checks of the protocol guarantees, bundled into one report.

Each check returns a :class:`VerificationReport` whose margin is the worst
slack observed over its trials; a check passes exactly when that margin is
non-negative. Asymptotic stability is covered only through the
remaining-distance monotonicity surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .comms import CommConfig, blackout_audit, delivery_log, make_rng, required_frozen_cycles
from .coordinator import CoordinatorConfig, WindowLayout, predict_window
from .core import TimingConfig
from .timing import check_dwell_condition, dwell_audit, hybrid_run

REPORT_HEADER = "check,passed,margin,trials"
ISS_SLACK = 1e-6


class PreconditionError(ValueError):
    """The fixture does not satisfy the premise of the property being checked."""


@dataclass(frozen=True)
class VerificationReport:
    check: str
    passed: bool
    margin: float
    trials: int

    def __post_init__(self):
        if self.passed != (self.margin >= 0.0):
            raise ValueError("passed must hold exactly when margin >= 0")

    @classmethod
    def from_margin(cls, check: str, margin: float, trials: int) -> "VerificationReport":
        return cls(check, bool(margin >= 0.0), float(margin), int(trials))

    def csv_row(self) -> str:
        return f"{self.check},{str(self.passed).lower()},{self.margin:.9f},{self.trials}"


# ---------------------------------------------------------------------------
# recursive feasibility of shift-and-append


def plan_clearance(pos: np.ndarray, plans: np.ndarray, radii: np.ndarray, layout: WindowLayout,
                   first: int = 0) -> float:
    """Smallest surface gap over every ``dt`` sample of slots ``first..H``."""
    count = plans.shape[1] - first
    pts = predict_window(pos, plans, first, count, layout.t_step, layout.dt, layout.substeps)
    if first == 0:
        pts = np.concatenate([pos[:, None, :], pts], axis=1)
    n = len(pos)
    if n < 2:
        return math.inf
    iu = np.triu_indices(n, 1)
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))[iu]
    rsum = (radii[:, None] + radii[None, :])[iu]
    return float((d.min(-1) - rsum).min())


def shift_candidate(pos: np.ndarray, plans: np.ndarray, t_step: float) -> tuple[np.ndarray, np.ndarray]:
    """State and plan one cycle later without re-optimizing: drop slot 0, append a stop."""
    nxt = pos + t_step * plans[:, 0]
    cand = np.concatenate([plans[:, 1:], np.zeros_like(plans[:, :1])], axis=1)
    return nxt, cand


def feasibility_margin(pos: np.ndarray, plans: np.ndarray, radii: np.ndarray,
                       layout: WindowLayout, margin: float) -> float:
    """Tightened-separation slack of the shifted candidate.

    Raises :class:`PreconditionError` when the committed plans do not cover
    the layout horizon or are not themselves conflict-free.
    """
    pos = np.asarray(pos, dtype=float)
    plans = np.asarray(plans, dtype=float)
    if plans.shape[1] < layout.horizon:
        raise PreconditionError(f"plans cover {plans.shape[1]} slots, the window needs "
                                f"{layout.horizon}")
    if plan_clearance(pos, plans, radii, layout) < margin:
        raise PreconditionError("committed plans are not conflict-free")
    nxt, cand = shift_candidate(pos, plans, layout.t_step)
    return plan_clearance(nxt, cand, radii, layout) - margin


def random_feasible_fixture(rng: np.random.Generator, n: int, layout: WindowLayout,
                            margin: float, v_max: float = 1.5, radius: float = 0.5,
                            side: float = 20.0, max_tries: int = 1000):
    """Random positions and slot plans, resampled until conflict-free over the horizon."""
    radii = np.full(n, radius)
    for _ in range(max_tries):
        pos = rng.uniform(-side / 2, side / 2, (n, 2))
        speed = rng.uniform(0.0, v_max, (n, layout.horizon, 1))
        ang = rng.uniform(-math.pi, math.pi, (n, layout.horizon, 1))
        plans = speed * np.concatenate([np.cos(ang), np.sin(ang)], axis=-1)
        if plan_clearance(pos, plans, radii, layout) >= margin:
            return pos, plans, radii
    raise PreconditionError("could not sample a conflict-free fixture")


def check_recursive_feasibility(trials: int = 100, seed: int = 0, n_agents: int = 6,
                                timing: TimingConfig | None = None,
                                coordinator: CoordinatorConfig | None = None) -> VerificationReport:
    layout = WindowLayout.from_timing(timing or TimingConfig())
    margin = (coordinator or CoordinatorConfig()).detection_margin
    rng = make_rng(seed, 0)
    worst = math.inf
    for _ in range(trials):
        pos, plans, radii = random_feasible_fixture(rng, n_agents, layout, margin)
        worst = min(worst, feasibility_margin(pos, plans, radii, layout, margin))
    return VerificationReport.from_margin("recursive_feasibility", worst, trials)


# ---------------------------------------------------------------------------
# value monotonicity


def monotonicity_margin(remaining_sum: Sequence[float], preempted: Sequence[bool],
                        n_active: Sequence[int], slack_per_agent: float) -> tuple[float, int]:
    """Worst ``slack - increase`` of the remaining-distance sum after the last preemption.

    Returns ``(margin, cycles checked)``; cycles up to the last preemption
    are excluded.
    """
    r = np.asarray(remaining_sum, dtype=float)
    pre = np.asarray(preempted, dtype=bool)
    start = int(np.nonzero(pre)[0].max()) + 1 if pre.any() else 0
    inc = np.diff(r[start:])
    if inc.size == 0:
        return math.inf, 0
    slack = slack_per_agent * np.asarray(n_active, dtype=float)[start:start + inc.size]
    return float((slack - inc).min()), int(inc.size)


def check_value_monotonicity(scenario: str = "random", n_agents: int = 20, seed: int = 0,
                             exp=None) -> VerificationReport:
    from .harness.runner import ExperimentConfig, run_single
    from .harness.scenarios import ScenarioSpec

    exp = exp or ExperimentConfig(method="prollect")
    res = run_single(ScenarioSpec(scenario, n_agents, seed), exp, record=True)
    tr = res.trace
    slack = exp.timing.dt * exp.world.v_max
    margin, n = monotonicity_margin(tr.remaining_sum, tr.preempted, tr.n_active, slack)
    return VerificationReport.from_margin("value_monotonicity", margin, n)


# ---------------------------------------------------------------------------
# ISS bound on shadow disagreement


def iss_bound(t: np.ndarray, e0: float, c: float, d_sup: float) -> np.ndarray:
    return np.exp(-c * t / 2.0) * e0 + math.sqrt(1.0 / c) * d_sup


def simulate_disagreement(lambda_b: float, l_f: float, d_sup: float, e0: np.ndarray,
                          rng: np.random.Generator, t_end: float, h: float = 1e-3,
                          hold: float = 0.1, constant: bool = False,
                          theta: float | None = None):
    """Disagreement ``e' = -lambda_b e + L_f R e + d`` sampled every ``h`` seconds.

    ``R`` is a fixed rotation by ``theta`` (random when None), so the
    perturbation has gain exactly ``L_f``; ``theta=0`` is the destabilizing
    worst case. The disturbance is piecewise constant over ``hold`` seconds (one
    fixed vector when ``constant``) with ``|d| <= d_sup``, which lets each
    step use the exact matrix exponential of the linear flow.
    """
    th = rng.uniform(-math.pi, math.pi) if theta is None else theta
    sigma = -lambda_b + l_f * math.cos(th)
    omega = l_f * math.sin(th)
    a = np.array([[sigma, -omega], [omega, sigma]])
    g = math.exp(sigma * h)
    phi = g * np.array([[math.cos(omega * h), -math.sin(omega * h)],
                        [math.sin(omega * h), math.cos(omega * h)]])
    a_inv = np.linalg.inv(a)
    n = int(round(t_end / h))
    per = max(1, int(round(hold / h)))
    n_d = 1 if constant else n // per + 1
    ang = rng.uniform(-math.pi, math.pi, n_d)
    mag = np.full(n_d, d_sup) if constant else d_sup * np.sqrt(rng.uniform(0.0, 1.0, n_d))
    ds = mag[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    e = np.asarray(e0, dtype=float).copy()
    out = np.empty(n + 1)
    out[0] = np.linalg.norm(e)
    for k in range(n):
        # equilibrium of the current constant-disturbance segment
        eq = -a_inv @ ds[0 if constant else k // per]
        e = phi @ (e - eq) + eq
        out[k + 1] = math.hypot(e[0], e[1])
    return h * np.arange(n + 1), out


def check_iss_bound(configs: Sequence[tuple[float, float, float]], seed: int = 0,
                    samples: int = 3, horizon: float = 10.0,
                    constant: bool = False, theta: float | None = None) -> VerificationReport:
    """Worst slack of ``|e(t)|`` against the exponential-plus-gain bound.

    ``configs`` holds ``(lambda_b, L_f, sup|d|)``; each is integrated for
    ``samples`` random initial errors and disturbance signals.
    """
    rng = make_rng(seed, 0)
    worst = math.inf
    trials = 0
    for lam, l_f, d_sup in configs:
        c = lam - l_f
        if not c > 0:
            raise PreconditionError(f"lambda_b={lam} must exceed L_f={l_f}")
        for _ in range(samples):
            e0 = rng.uniform(-2.0, 2.0, 2)
            t, norm = simulate_disagreement(lam, l_f, d_sup, e0, rng, horizon / c + 1.0,
                                            constant=constant, theta=theta)
            bound = iss_bound(t, float(np.linalg.norm(e0)), c, d_sup)
            worst = min(worst, float((bound + ISS_SLACK - norm).min()))
            trials += 1
    return VerificationReport.from_margin("iss_bound", worst, trials)


def iss_grid(n: int = 20, seed: int = 0) -> list[tuple[float, float, float]]:
    """``n`` configurations with ``lambda_b - L_f >= 1``."""
    rng = make_rng(seed, 0)
    out = []
    for _ in range(n):
        l_f = float(rng.choice([0.0, 0.5, 1.0, 2.0]))
        c = float(rng.uniform(1.0, 5.0))
        out.append((l_f + c, l_f, float(rng.uniform(0.0, 1.0))))
    return out


# ---------------------------------------------------------------------------
# blackout rule


def check_blackout_rule(epsilon: float, p_drop: float, cycles: int = 100_000, seed: int = 0,
                        k_f: int | None = None) -> VerificationReport:
    """Empirical rate of ``K_f``-long blackout runs against ``epsilon`` plus 3 sigma.

    ``k_f`` defaults to the smallest window the rule requires; passing a
    shorter one serves as a negative control.
    """
    k = required_frozen_cycles(epsilon, p_drop) if k_f is None else k_f
    log = delivery_log(cycles, CommConfig(p_drop=p_drop, seed=seed))
    audit = blackout_audit(log, k)
    windows = max(1, cycles - k + 1)
    tol = epsilon + 3.0 * math.sqrt(epsilon * (1.0 - epsilon) / windows)
    return VerificationReport.from_margin(f"blackout_eps{epsilon:g}_p{p_drop:g}_k{k}",
                                          tol - audit.empirical_violation_rate, cycles)


# ---------------------------------------------------------------------------
# dwell time


def check_dwell_time(config: TimingConfig | None = None, n_cycles: int = 10_000,
                     jitter: float = 0.5, seed: int = 0) -> VerificationReport:
    config = config or TimingConfig()
    check_dwell_condition(config)
    trace = hybrid_run(config, n_cycles, make_rng(seed, 0), jitter)
    audit = dwell_audit(trace, config)
    margin = audit.min_idle_dwell - (config.t_step - config.t_adj_max)
    if not audit.zeno_free:
        margin = min(margin, -abs(margin) - 1e-12)
    return VerificationReport.from_margin("dwell_time", margin, n_cycles)


# ---------------------------------------------------------------------------
# suite


def run_all(seed: int = 0, quick: bool = False) -> list[VerificationReport]:
    """Every check at its default size, sorted by name."""
    cycles = 10_000 if quick else 100_000
    reports = [
        check_recursive_feasibility(trials=20 if quick else 100, seed=seed),
        check_value_monotonicity(seed=seed),
        check_iss_bound(iss_grid(20, seed), seed=seed, samples=1 if quick else 3),
        check_dwell_time(seed=seed),
    ]
    reports += [check_blackout_rule(eps, p, cycles, seed)
                for eps in (0.05, 0.01) for p in (0.1, 0.2, 0.3)]
    return sorted(reports, key=lambda r: r.check)


def write_report(path: Path, reports: Sequence[VerificationReport]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join([REPORT_HEADER, *(r.csv_row() for r in reports)]) + "\n")
    return path
