"""Accuracy-driven round planning for federated training.

Each round runs ``E^r`` local epochs on every node and then merges. After two
bootstrap rounds the planner sets a per-round accuracy target on a linear or
concave-quadratic path towards the required accuracy, and extrapolates the
epochs needed from the last two measured rounds. The learning curve it is
measured against is synthetic.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .control import clamp

SLOPE_EPS = 1e-6


class Trajectory(str, enum.Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


@dataclass
class FederationConfig:
    rounds: int = 10
    ac_sla: float = 0.80
    trajectory: Trajectory = Trajectory.QUADRATIC
    e_bootstrap: int = 1
    e_max: int = 16
    node_count: int = 4
    sync_delay: float = 0.0  # seconds added per round for aggregation
    headroom: float = 0.0  # planned over ac_sla so that ac_eval, not ac_fit, clears it

    def __post_init__(self):
        self.trajectory = Trajectory(self.trajectory)
        if self.rounds < 3:
            raise ValueError(f"rounds must be >= 3, got {self.rounds}")
        if not 0 < self.ac_sla < 1:
            raise ValueError(f"ac_sla must be in (0, 1), got {self.ac_sla}")
        if self.e_bootstrap < 1 or self.e_max < 1:
            raise ValueError("e_bootstrap and e_max must be >= 1")
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        if not 0 <= self.headroom < 1 - self.ac_sla:
            raise ValueError(f"headroom must be in [0, 1 - ac_sla), got {self.headroom}")


@dataclass(frozen=True)
class RoundState:
    r: int
    e: int
    s: int
    ac: float


@dataclass
class LearningCurveOracle:
    """Synthetic accuracy plant ``a_max * (1 - exp(-k * S))`` with per-node jitter on ``k``."""

    a_max: float = 0.85
    k: float = 0.21
    noise_sd: float = 0.0
    jitter: tuple[float, ...] = ()
    gap: float = 0.01
    epoch_time: float = 1.0  # simulated seconds per local epoch

    def __post_init__(self):
        if not 0 < self.a_max <= 1:
            raise ValueError(f"a_max must be in (0, 1], got {self.a_max}")
        if not self.k > 0:
            raise ValueError(f"k must be > 0, got {self.k}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if any(j <= -1 for j in self.jitter):
            raise ValueError("jitter factors must be > -1")

    def curve(self, s: float, jitter: float = 0.0) -> float:
        return self.a_max * (1.0 - math.exp(-self.k * (1.0 + jitter) * s))


def target_accuracy(r: int, cfg: FederationConfig, anchor: tuple[int, float]) -> float:
    r0, ac0 = anchor
    if not r0 < r <= cfg.rounds:
        raise ValueError(f"round {r} outside ({r0}, {cfg.rounds}]")
    if r == cfg.rounds:
        return cfg.ac_sla
    x = (r - r0) / (cfg.rounds - r0)
    if cfg.trajectory is Trajectory.LINEAR:
        frac = x
    else:
        frac = 1.0 - (1.0 - x) ** 2
    return ac0 + (cfg.ac_sla - ac0) * frac


def estimate_epochs(target: float, hist: tuple[RoundState, RoundState], e_max: int) -> int:
    """Epochs for the next round from a secant through the last two rounds.

    Falls back to repeating the previous round's epochs when accuracy did not
    improve between them.
    """
    prev2, prev1 = hist
    if not prev2.s < prev1.s:
        raise ValueError("history must have strictly increasing cumulative epochs")
    slope = (prev1.ac - prev2.ac) / (prev1.s - prev2.s)
    if slope <= SLOPE_EPS:
        return prev1.e
    need = math.ceil((target - prev1.ac) / slope - 1e-9)
    return int(clamp(need, 1, e_max))


def simulate_round(oracle: LearningCurveOracle, e: int, s_prev: int,
                   rng: np.random.Generator | None = None,
                   node_count: int = 1) -> tuple[float, float]:
    """Measured ``(ac_fit, ac_eval)`` after ``e`` more epochs on every node."""
    if e < 1:
        raise ValueError(f"e must be >= 1, got {e}")
    s = s_prev + e
    jitter = oracle.jitter or (0.0,) * node_count
    ac = sum(oracle.curve(s, j) for j in jitter) / len(jitter)
    if oracle.noise_sd > 0:
        if rng is None:
            raise ValueError("a random generator is required when noise_sd > 0")
        ac += rng.normal(0.0, oracle.noise_sd)
    ac_fit = clamp(ac, 0.0, 1.0)
    return ac_fit, clamp(ac_fit - oracle.gap, 0.0, 1.0)


@dataclass
class FederationLog:
    rounds: list[dict] = field(default_factory=list)

    @property
    def final(self) -> dict:
        return self.rounds[-1]

    def epochs(self) -> list[int]:
        return [row["e_r"] for row in self.rounds]


def run_federation(cfg: FederationConfig, oracle: LearningCurveOracle,
                   rng: np.random.Generator | None = None) -> FederationLog:
    log = FederationLog()
    plan = replace(cfg, ac_sla=cfg.ac_sla + cfg.headroom) if cfg.headroom else cfg
    hist: list[RoundState] = []
    s = 0
    clock = 0.0
    anchor = None
    for r in range(1, cfg.rounds + 1):
        if r <= 2:
            target = None
            e = cfg.e_bootstrap
        else:
            if anchor is None:
                anchor = (2, hist[-1].ac)
            target = target_accuracy(r, plan, anchor)
            e = estimate_epochs(target, (hist[-2], hist[-1]), cfg.e_max)
        ac_fit, ac_eval = simulate_round(oracle, e, s, rng, cfg.node_count)
        s += e
        clock += e * oracle.epoch_time + cfg.sync_delay
        hist.append(RoundState(r, e, s, ac_fit))
        log.rounds.append({"r": r, "target": target, "e_r": e, "s_r": s,
                           "ac_fit": ac_fit, "ac_eval": ac_eval, "time": clock})
    return log
