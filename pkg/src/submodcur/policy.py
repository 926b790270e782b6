"""Explore/exploit arm selection with annealing threshold schedules.

Each step draws zeta ~ U(0,1) and computes the threshold
Xi_t = t / (t + lambda(t))^pi(t), clamped to [0, 1].  zeta > Xi_t picks
the argmax-by-reward arm (exploit); otherwise an arm is drawn uniformly
(explore).  For pi < 1 the raw threshold exceeds 1 past small t, so the
clamp pins the policy to the uniform branch; pi > 1 anneals toward
exploitation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ExplorationSchedule:
    """lambda(t) dampening and pi(t) sharpness schedules."""

    lambda_kind: str = "constant"  # constant | exp-grow | exp-decay
    pi_kind: str = "constant"      # constant | table
    epsilon: float = 0.5
    rate: float = 1.0
    pi_value: float = 0.5
    pi_table: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lambda_kind not in ("constant", "exp-grow", "exp-decay"):
            raise ValueError(f"unknown lambda kind {self.lambda_kind!r}")
        if self.pi_kind not in ("constant", "table"):
            raise ValueError(f"unknown pi kind {self.pi_kind!r}")
        if self.lambda_kind == "constant" and not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.rate <= 0.0:
            raise ValueError("rate must be positive")
        if self.pi_value <= 0.0:
            raise ValueError("pi must be positive")

    def dampening(self, t: int) -> float:
        if self.lambda_kind == "constant":
            return self.epsilon
        if self.lambda_kind == "exp-grow":
            return 1.0 - math.exp(-self.rate * t)
        return math.exp(-self.rate * t)

    def sharpness(self, t: int) -> float:
        if self.pi_kind == "constant":
            return self.pi_value
        if t in self.pi_table:
            return float(self.pi_table[t])
        # table lookups fall back to the largest configured step <= t
        keys = [k for k in self.pi_table if k <= t]
        if not keys:
            return self.pi_value
        return float(self.pi_table[max(keys)])


def threshold(t: int, schedule: ExplorationSchedule) -> tuple[float, float]:
    """(clamped, raw) exploration threshold at step t >= 1."""
    if t < 1:
        raise ValueError("t must be >= 1")
    lam = schedule.dampening(t)
    pi = schedule.sharpness(t)
    raw = t / (t + lam) ** pi
    return min(max(raw, 0.0), 1.0), raw


@dataclass
class PolicyState:
    """Counters and RNG for one training run of the arm-selection policy."""

    n_arms: int
    rng_seed: int = 0
    cold_start: bool = True
    t: int = 0
    pulls: np.ndarray = None
    uniform_pulls: np.ndarray = None
    last_rewards: list = None
    rng: np.random.Generator = None

    def __post_init__(self):
        if self.n_arms < 1:
            raise ValueError("need at least one arm")
        if self.pulls is None:
            self.pulls = np.zeros(self.n_arms, dtype=np.int64)
        if self.uniform_pulls is None:
            self.uniform_pulls = np.zeros(self.n_arms, dtype=np.int64)
        if self.last_rewards is None:
            self.last_rewards = [0.0] * self.n_arms
        if self.rng is None:
            self.rng = np.random.default_rng(np.random.PCG64(self.rng_seed))


@dataclass
class RegretTracker:
    """Per-step optimality gaps and their running sum."""

    optimality_gap_floor: float = 0.0
    gaps: list = field(default_factory=list)
    total: float = 0.0

    def record(self, chosen_value: float, best_value: float) -> None:
        if not (np.isfinite(chosen_value) and np.isfinite(best_value)):
            raise ValueError("regret inputs must be finite")
        gap = max(0.0, float(best_value) - float(chosen_value))
        self.gaps.append(gap)
        self.total += gap


def record_regret(tracker: RegretTracker, chosen_value: float,
                  best_value: float) -> RegretTracker:
    tracker.record(chosen_value, best_value)
    return tracker


def select_arm(state: PolicyState, schedule: ExplorationSchedule,
               rewards=None, zeta: float | None = None):
    """Advance the policy one step; returns (arm, branch, xi, xi_raw, zeta).

    One zeta draw is consumed per step (before any uniform arm draw)
    when not supplied by the caller.  During cold start the first K
    steps pull each arm once, round-robin, on the explore branch.
    """
    k = state.n_arms
    t = state.t + 1
    if rewards is not None:
        rewards = [float(r) for r in rewards]
        if len(rewards) != k:
            raise ValueError(f"expected {k} arm rewards, got {len(rewards)}")
        state.last_rewards = rewards
    xi, xi_raw = threshold(t, schedule)
    if zeta is None:
        zeta = float(state.rng.random())
    if state.cold_start and t <= k:
        arm, branch = t - 1, "explore"
    elif zeta > xi:
        best = max(state.last_rewards)
        arm = min(a for a in range(k) if state.last_rewards[a] == best)
        branch = "exploit"
    else:
        arm = int(state.rng.integers(0, k))
        branch = "explore"
    state.t = t
    state.pulls[arm] += 1
    if branch == "explore":
        state.uniform_pulls[arm] += 1
    return arm, branch, xi, xi_raw, zeta
