"""Empirical verification of the policy's counting and regret statements.

Three checks live here:

* ``simulate_regret`` - synthetic Gaussian arms driven by the real
  policy rule, recording per-step optimality gaps.
* ``check_counting_lemma`` - frequency of uniform-branch pulls against
  the concentration lower bound.
* ``check_integral_bounds`` - adaptive-Simpson quadrature of the
  threshold sums against both closed-form lower bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .policy import ExplorationSchedule, threshold


@dataclass
class SyntheticArm:
    """Gaussian reward stream with fixed mean and noise level."""

    mean: float
    noise_sd: float = 0.0

    def __post_init__(self):
        if self.noise_sd < 0.0:
            raise ValueError("noise_sd must be >= 0")


@dataclass
class RegretCurve:
    mean_regret: np.ndarray
    stderr: np.ndarray
    horizon: int
    runs: int
    schedule: ExplorationSchedule = None

    def slope(self, t_lo: int = 100, t_hi: int | None = None) -> float:
        """OLS slope of log10 mean regret vs log10 t over [t_lo, t_hi]."""
        t_hi = t_hi or self.horizon
        t = np.arange(1, self.horizon + 1)
        mask = (t >= t_lo) & (t <= t_hi) & (self.mean_regret > 0.0)
        if mask.sum() < 2:
            return 0.0
        x = np.log10(t[mask])
        y = np.log10(self.mean_regret[mask])
        return float(np.polyfit(x, y, 1)[0])


def _clamped_thresholds(schedule: ExplorationSchedule, horizon: int):
    xi = np.empty(horizon)
    xi_raw = np.empty(horizon)
    for t in range(1, horizon + 1):
        xi[t - 1], xi_raw[t - 1] = threshold(t, schedule)
    return xi, xi_raw


def simulate_regret(n_arms: int, gaps, schedule: ExplorationSchedule,
                    horizon: int, runs: int, seed: int = 0,
                    noise_sd: float = 0.1, gap_floor: float | None = None,
                    feedback: str = "bandit") -> RegretCurve:
    """Policy regret on synthetic arms, averaged over seeded runs.

    ``gaps`` holds one entry per arm; exactly one must be zero (the
    optimal arm) and, when rewards are noisy, every other gap must sit
    above a positive floor.
    """
    gaps = np.asarray(gaps, dtype=np.float64)
    if gaps.shape != (n_arms,):
        raise ValueError("need one gap per arm")
    if np.count_nonzero(gaps == 0.0) != 1:
        raise ValueError("exactly one arm must have zero gap")
    floor = min(g for g in gaps if g > 0.0) if np.any(gaps > 0.0) else 0.0
    if gap_floor is not None and noise_sd > 0.0 and gap_floor <= 0.0:
        raise ValueError("positive noise requires a positive gap floor")
    if gap_floor is not None and floor and floor < gap_floor - 1e-12:
        raise ValueError("suboptimal gaps fall below the declared floor")
    if feedback not in ("bandit", "full"):
        raise ValueError(f"unknown feedback mode {feedback!r}")
    means = -gaps  # best arm at 0, suboptimal arms below
    xi, _ = _clamped_thresholds(schedule, horizon)
    total = np.zeros(horizon)
    total_sq = np.zeros(horizon)
    for r in range(runs):
        rng = np.random.default_rng(seed + r)
        zetas = rng.random(horizon)
        uniform_arms = rng.integers(0, n_arms, size=horizon)
        noise = rng.standard_normal(horizon) * noise_sd
        estimates = np.zeros(n_arms)
        counts = np.zeros(n_arms, dtype=np.int64)
        regret = np.empty(horizon)
        for t in range(horizon):
            if feedback == "full":
                estimates = means + rng.standard_normal(n_arms) * noise_sd
                counts += 1
            if zetas[t] > xi[t]:
                arm = int(np.argmax(estimates))
            else:
                arm = int(uniform_arms[t])
            regret[t] = gaps[arm]
            if feedback == "bandit":
                reward = means[arm] + noise[t]
                counts[arm] += 1
                estimates[arm] += (reward - estimates[arm]) / counts[arm]
        total += regret
        total_sq += regret**2
    mean = total / runs
    var = np.maximum(total_sq / runs - mean**2, 0.0)
    stderr = np.sqrt(var / runs)
    return RegretCurve(mean, stderr, horizon, runs, schedule)


def check_counting_lemma(n_arms: int, schedule: ExplorationSchedule,
                         horizon: int, runs: int, seed: int = 0,
                         checkpoints=(100, 1000, 10000)) -> dict:
    """Empirical uniform-branch pull counts vs the concentration bound."""
    if schedule.lambda_kind != "constant":
        raise ValueError("counting lemma assumes constant dampening")
    eps = schedule.epsilon
    pi = schedule.pi_value
    if not 0.0 < pi < 1.0:
        raise ValueError("counting lemma assumes sharpness in (0, 1)")
    checkpoints = sorted(c for c in checkpoints if c <= horizon)
    xi, xi_raw = _clamped_thresholds(schedule, horizon)
    sat = {c: 0 for c in checkpoints}
    tau_sums = {c: np.zeros(n_arms) for c in checkpoints}
    for r in range(runs):
        rng = np.random.default_rng(seed + r)
        zetas = rng.random(horizon)
        arms = rng.integers(0, n_arms, size=horizon)
        uniform = zetas < xi
        for c in checkpoints:
            # tau^R(t) counts uniform pulls over the first t-1 steps
            window_arms = arms[: c - 1][uniform[: c - 1]]
            tau = np.bincount(window_arms, minlength=n_arms).astype(float)
            tau_sums[c] += tau
            bound = (c - 2) * (1.0 + (1.0 - pi) * eps) / (2.0 * n_arms * (2.0 - pi))
            if np.all(tau >= bound):
                sat[c] += 1
    report = {"n_arms": n_arms, "epsilon": eps, "pi": pi, "runs": runs,
              "checkpoints": []}
    for c in checkpoints:
        bound = (c - 2) * (1.0 + (1.0 - pi) * eps) / (2.0 * n_arms * (2.0 - pi))
        floor = 1.0 - n_arms * math.exp(
            -3.0 * (c - 2) * (1.0 + (1.0 - pi) * eps)
            / (28.0 * n_arms * (2.0 - pi)))
        ideal = float(xi_raw[: c - 1].sum() / n_arms)
        clamped = float(xi[: c - 1].sum() / n_arms)
        empirical_mean = float(tau_sums[c].mean() / runs)
        report["checkpoints"].append({
            "t": c,
            "tau_lower_bound": bound,
            "empirical_satisfaction_rate": sat[c] / runs,
            "theoretical_floor": max(floor, 0.0),
            "holds": sat[c] / runs >= max(floor, 0.0),
            "expected_tau_clamped": clamped,
            "expected_tau_raw": ideal,
            "empirical_mean_tau": empirical_mean,
            "clamp_divergence": abs(ideal - clamped) > 1e-9,
        })
    report["all_hold"] = all(cp["holds"] for cp in report["checkpoints"])
    return report


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-9,
                     max_depth: int = 50) -> float:
    """Recursive Simpson quadrature with Richardson correction."""
    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = (lo + hi) / 2.0
        lm, rm = (lo + mid) / 2.0, (mid + hi) / 2.0
        flm, frm = f(lm), f(rm)
        left = simpson(lo, mid, flo, flm, fmid)
        right = simpson(mid, hi, fmid, frm, fhi)
        if depth >= max_depth:
            raise RuntimeError("quadrature failed to converge")
        if abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (recurse(lo, mid, flo, flm, fmid, left, eps / 2.0, depth + 1)
                + recurse(mid, hi, fmid, frm, fhi, right, eps / 2.0, depth + 1))

    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f((a + b) / 2.0), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def constant_dampening_lhs(eps: float, pi: float, t: float,
                           tol: float = 1e-9) -> float:
    return adaptive_simpson(lambda x: x / (x + eps) ** pi, 1.0, t - 1.0, tol)


def constant_dampening_rhs(eps: float, pi: float, t: float) -> float:
    return (t - 2.0) / (2.0 - pi) * (1.0 + (1.0 - pi) * eps)


def growing_dampening_lhs(rate: float, pi: float, t: float,
                          tol: float = 1e-9) -> float:
    return adaptive_simpson(
        lambda x: x / (x + 1.0 - math.exp(-rate * x)) ** pi, 1.0, t - 1.0, tol)


def growing_dampening_rhs(rate: float, pi: float, t: float) -> float:
    # log(2 e^{r(t-1)} - 1) evaluated stably for large exponents
    def log2exp_minus_1(u):
        return u + math.log(2.0 - math.exp(-u)) if u > 0 else math.log(2.0 * math.exp(u) - 1.0)

    inner = (log2exp_minus_1(rate * (t - 1.0)) - log2exp_minus_1(rate)) / (2.0 * rate)
    return inner ** pi


def check_integral_bounds(eps_grid=None, rate_grid=None, pi_grid=None,
                          t_grid=None, slack_tol: float = 1e-6) -> dict:
    """Verify both integral lower bounds over a parameter grid."""
    eps_grid = list(eps_grid) if eps_grid is not None else \
        np.linspace(0.05, 0.95, 10).tolist()
    rate_grid = list(rate_grid) if rate_grid is not None else \
        np.linspace(0.2, 2.0, 10).tolist()
    pi_grid = list(pi_grid) if pi_grid is not None else \
        np.linspace(0.05, 0.95, 10).tolist()
    t_grid = list(t_grid) if t_grid is not None else \
        np.unique(np.round(np.geomspace(3, 1000, 10))).astype(float).tolist()
    results = {"constant": {"min_slack": math.inf, "argmin": None, "violations": 0},
               "growing": {"min_slack": math.inf, "argmin": None, "violations": 0}}
    for pi in pi_grid:
        for t in t_grid:
            if t < 3:
                continue
            for eps in eps_grid:
                slack = (constant_dampening_lhs(eps, pi, t)
                         - constant_dampening_rhs(eps, pi, t))
                bucket = results["constant"]
                if slack < bucket["min_slack"]:
                    bucket["min_slack"] = slack
                    bucket["argmin"] = {"epsilon": eps, "pi": pi, "t": t}
                if slack < -slack_tol:
                    bucket["violations"] += 1
            for rate in rate_grid:
                slack = (growing_dampening_lhs(rate, pi, t)
                         - growing_dampening_rhs(rate, pi, t))
                bucket = results["growing"]
                if slack < bucket["min_slack"]:
                    bucket["min_slack"] = slack
                    bucket["argmin"] = {"rate": rate, "pi": pi, "t": t}
                if slack < -slack_tol:
                    bucket["violations"] += 1
    results["all_bounds_hold"] = (results["constant"]["violations"] == 0
                                  and results["growing"]["violations"] == 0)
    return results
