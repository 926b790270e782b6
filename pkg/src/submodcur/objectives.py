"""Submodular set functions over a similarity kernel, plus maximizers.

Supported kinds
---------------
facility-location   sum_i max_{j in X} s_ij
graph-cut           sum_{i in V, j in X} s_ij - rho * sum_{i,j in X} s_ij
log-determinant     logdet(S_X + ridge * I)
disparity-min       min_{i != j in X} (1 - s_ij)           (non-submodular)
disparity-sum       sum over unordered pairs of (1 - s_ij)
gcmi                2 * mi_scale * sum_{i in A, q in Q} s_iq
fl1mi               sum_{i in V} min(max_{j in A} s_ij, eta * max_{q in Q} s_iq)
logdet-mi           logdet(S_A) - logdet(S_A - eta^2 S_AQ S_Q^-1 S_AQ^T)
com                 eta * sum_A psi(row query mass) + sum_Q psi(column mass)

Mutual-information kinds require a query set: the kernel covers the
candidate ground set plus the query items, and selection happens over
the non-query indices only.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .kernels import SimilarityMatrix

KINDS = (
    "facility-location",
    "graph-cut",
    "log-determinant",
    "disparity-min",
    "disparity-sum",
    "gcmi",
    "fl1mi",
    "logdet-mi",
    "com",
)
MI_KINDS = ("gcmi", "fl1mi", "logdet-mi", "com")
MONOTONE_KINDS = ("facility-location", "graph-cut", "gcmi", "fl1mi", "com")
PSI_FUNCS = {"sqrt": np.sqrt, "log1p": np.log1p}


@dataclass
class SubmodularObjective:
    """One arm's set function: a kind plus its parameters and kernel."""

    kind: str
    kernel: SimilarityMatrix
    rho: float = 0.5
    eta_mi: float = 1.0
    mi_scale: float = 0.5
    ridge: float = 1e-6
    query: list | None = None
    psi: str = "sqrt"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.ridge <= 0.0:
            raise ValueError("ridge must be positive")
        if self.rho < 0.0 or self.eta_mi < 0.0 or self.mi_scale < 0.0:
            raise ValueError("rho, eta_mi and mi_scale must be non-negative")
        if self.psi not in PSI_FUNCS:
            raise ValueError(f"unknown concave tag {self.psi!r}")
        if self.kind in MI_KINDS:
            if not self.query:
                raise ValueError(f"{self.kind} requires a query set")
            self.query = sorted(int(q) for q in self.query)
            n = self.kernel.ground_size
            if len(set(self.query)) != len(self.query):
                raise ValueError("query indices must be unique")
            if self.query[0] < 0 or self.query[-1] >= n:
                raise IndexError("query index out of kernel bounds")

    @property
    def ground(self) -> list:
        """Selectable indices: everything outside the query set."""
        if self.kind in MI_KINDS:
            q = set(self.query)
            return [i for i in range(self.kernel.ground_size) if i not in q]
        return list(range(self.kernel.ground_size))


@dataclass
class Selection:
    """Greedy output: chosen indices in selection order with per-step gains."""

    chosen: list
    value: float
    gains: list
    budget: int

    def __post_init__(self):
        if len(self.chosen) > self.budget:
            raise ValueError("selection exceeds budget")
        if len(set(self.chosen)) != len(self.chosen):
            raise ValueError("selection indices must be unique")


class CholeskyState:
    """Incremental lower-Cholesky factor of a growing principal submatrix.

    Supports O(k^2) rank-one extension; ``logdet`` accumulates as rows
    are appended.  The base matrix must stay positive definite on every
    principal submatrix encountered.
    """

    def __init__(self, base: np.ndarray):
        self.base = base
        self.order: list = []
        self.factor = np.zeros((0, 0))
        self.logdet = 0.0

    def extension(self, index: int):
        """(new diagonal pivot, solved column) for appending ``index``."""
        k = len(self.order)
        if k:
            col = self.base[self.order, index]
            w = self._forward(col)
        else:
            w = np.zeros(0)
        pivot = self.base[index, index] - float(w @ w)
        return pivot, w

    def _forward(self, col: np.ndarray) -> np.ndarray:
        w = np.empty(len(col))
        for i in range(len(col)):
            w[i] = (col[i] - self.factor[i, :i] @ w[:i]) / self.factor[i, i]
        return w

    def gain(self, index: int) -> float:
        pivot, _ = self.extension(index)
        if pivot <= 0.0:
            return -math.inf
        return math.log(pivot)

    def append(self, index: int) -> None:
        pivot, w = self.extension(index)
        if pivot <= 0.0:
            raise np.linalg.LinAlgError(
                f"matrix loses positive definiteness when adding index {index}")
        k = len(self.order)
        new = np.zeros((k + 1, k + 1))
        new[:k, :k] = self.factor
        new[k, :k] = w
        new[k, k] = math.sqrt(pivot)
        self.factor = new
        self.order.append(index)
        self.logdet += math.log(pivot)


def _logdet_psd(mat: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(mat)
    if sign <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return float(val)


def _mi_deflated(obj: SubmodularObjective) -> np.ndarray:
    """S_C - eta^2 S_CQ (S_Q + ridge I)^-1 S_CQ^T over candidates, plus ridge."""
    s = obj.kernel.entries
    cand = obj.ground
    q = obj.query
    s_q = s[np.ix_(q, q)] + obj.ridge * np.eye(len(q))
    s_cq = s[np.ix_(cand, q)]
    try:
        solve = np.linalg.solve(s_q, s_cq.T)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("query kernel singular after ridging") from exc
    m = s[np.ix_(cand, cand)] - obj.eta_mi**2 * (s_cq @ solve)
    m = (m + m.T) / 2.0
    return m + obj.ridge * np.eye(len(cand))


class _Evaluator:
    """Incremental marginal-gain engine for one objective kind."""

    def __init__(self, obj: SubmodularObjective):
        self.obj = obj
        self.s = obj.kernel.entries
        self.chosen: list = []
        kind = obj.kind
        if kind == "facility-location":
            self.rowmax = np.zeros(self.s.shape[0])
        elif kind == "graph-cut":
            self.colsums = self.s.sum(axis=0)
            self.cross = np.zeros(self.s.shape[0])  # sum_{k in X} s_k.
        elif kind == "log-determinant":
            base = self.s + obj.ridge * np.eye(self.s.shape[0])
            self.chol = CholeskyState(base)
        elif kind in ("disparity-sum", "disparity-min"):
            self.pairsum = 0.0
            self.curmin = math.inf
        elif kind == "gcmi":
            self.qmass = 2.0 * obj.mi_scale * self.s[:, obj.query].sum(axis=1)
        elif kind == "fl1mi":
            cand = np.array(obj.ground, dtype=int)
            self.cand = cand
            self.cap = obj.eta_mi * self.s[np.ix_(cand, obj.query)].max(axis=1)
            self.curmax = np.zeros(len(cand))
        elif kind == "logdet-mi":
            cand = list(obj.ground)
            self.pos = {g: k for k, g in enumerate(cand)}
            base1 = self.s[np.ix_(cand, cand)] + obj.ridge * np.eye(len(cand))
            base2 = _mi_deflated(obj)
            self.chol_a = CholeskyState(base1)
            self.chol_b = CholeskyState(base2)
        elif kind == "com":
            self.psi = PSI_FUNCS[obj.psi]
            self.qrow = self.s[:, obj.query]
            self.colmass = np.zeros(len(obj.query))

    def gain(self, c: int) -> float:
        kind = self.obj.kind
        if kind == "facility-location":
            return float(np.maximum(self.s[:, c] - self.rowmax, 0.0).sum())
        if kind == "graph-cut":
            return float(self.colsums[c]
                         - self.obj.rho * (2.0 * self.cross[c] + self.s[c, c]))
        if kind == "log-determinant":
            return self.chol.gain(c)
        if kind == "disparity-sum":
            if not self.chosen:
                return 0.0
            return float((1.0 - self.s[self.chosen, c]).sum())
        if kind == "disparity-min":
            if not self.chosen:
                return 0.0
            newmin = float((1.0 - self.s[self.chosen, c]).min())
            if len(self.chosen) == 1:
                return newmin
            return min(self.curmin, newmin) - self.curmin
        if kind == "gcmi":
            return float(self.qmass[c])
        if kind == "fl1mi":
            new = np.minimum(np.maximum(self.curmax, self.s[self.cand, c]), self.cap)
            old = np.minimum(self.curmax, self.cap)
            return float((new - old).sum())
        if kind == "logdet-mi":
            k = self.pos[c]
            ga = self.chol_a.gain(k)
            gb = self.chol_b.gain(k)
            if not math.isfinite(gb):
                raise np.linalg.LinAlgError(
                    "deflated kernel not positive definite; reduce eta_mi")
            return ga - gb
        if kind == "com":
            own = self.obj.eta_mi * float(self.psi(self.qrow[c].sum()))
            grown = float((self.psi(self.colmass + self.qrow[c])
                           - self.psi(self.colmass)).sum())
            return own + grown
        raise AssertionError(kind)

    def add(self, c: int) -> None:
        kind = self.obj.kind
        if kind == "facility-location":
            self.rowmax = np.maximum(self.rowmax, self.s[:, c])
        elif kind == "graph-cut":
            self.cross = self.cross + self.s[c, :]
        elif kind == "log-determinant":
            self.chol.append(c)
        elif kind == "disparity-sum":
            if self.chosen:
                self.pairsum += float((1.0 - self.s[self.chosen, c]).sum())
        elif kind == "disparity-min":
            if self.chosen:
                newmin = float((1.0 - self.s[self.chosen, c]).min())
                self.curmin = min(self.curmin, newmin)
        elif kind == "gcmi":
            pass
        elif kind == "fl1mi":
            self.curmax = np.maximum(self.curmax, self.s[self.cand, c])
        elif kind == "logdet-mi":
            k = self.pos[c]
            self.chol_a.append(k)
            self.chol_b.append(k)
        elif kind == "com":
            self.colmass = self.colmass + self.qrow[c]
        self.chosen.append(c)


def evaluate(obj: SubmodularObjective, subset) -> float:
    """Closed-form f(subset); the non-incremental reference path."""
    subset = [int(i) for i in subset]
    n = obj.kernel.ground_size
    if len(set(subset)) != len(subset):
        raise ValueError("subset indices must be unique")
    for i in subset:
        if not 0 <= i < n:
            raise IndexError(f"subset index {i} out of bounds")
    if obj.kind in MI_KINDS:
        return mi_evaluate(obj, subset)
    s = obj.kernel.entries
    if not subset:
        return 0.0
    if obj.kind == "facility-location":
        return float(s[:, subset].max(axis=1).sum())
    if obj.kind == "graph-cut":
        inner = s[np.ix_(subset, subset)]
        return float(s[:, subset].sum() - obj.rho * inner.sum())
    if obj.kind == "log-determinant":
        sub = s[np.ix_(subset, subset)] + obj.ridge * np.eye(len(subset))
        return _logdet_psd(sub)
    if obj.kind == "disparity-sum":
        if len(subset) < 2:
            return 0.0
        inner = s[np.ix_(subset, subset)]
        iu = np.triu_indices(len(subset), k=1)
        return float((1.0 - inner[iu]).sum())
    if obj.kind == "disparity-min":
        if len(subset) < 2:
            return 0.0
        inner = s[np.ix_(subset, subset)]
        iu = np.triu_indices(len(subset), k=1)
        return float((1.0 - inner[iu]).min())
    raise AssertionError(obj.kind)


def mi_evaluate(obj: SubmodularObjective, subset) -> float:
    """Mutual-information variants against the objective's query set."""
    if obj.kind not in MI_KINDS:
        raise ValueError(f"{obj.kind} is not a mutual-information kind")
    subset = [int(i) for i in subset]
    qset = set(obj.query)
    for i in subset:
        if i in qset:
            raise ValueError(f"subset index {i} overlaps the query set")
        if not 0 <= i < obj.kernel.ground_size:
            raise IndexError(f"subset index {i} out of bounds")
    s = obj.kernel.entries
    q = obj.query
    if obj.kind == "gcmi":
        if not subset:
            return 0.0
        return float(2.0 * obj.mi_scale * s[np.ix_(subset, q)].sum())
    if obj.kind == "fl1mi":
        cand = obj.ground
        cap = obj.eta_mi * s[np.ix_(cand, q)].max(axis=1)
        if not subset:
            cover = np.zeros(len(cand))
        else:
            cover = s[np.ix_(cand, subset)].max(axis=1)
        return float(np.minimum(cover, cap).sum())
    if obj.kind == "logdet-mi":
        if not subset:
            return 0.0
        ridge_eye = obj.ridge * np.eye(len(subset))
        s_a = s[np.ix_(subset, subset)] + ridge_eye
        s_q = s[np.ix_(q, q)] + obj.ridge * np.eye(len(q))
        s_aq = s[np.ix_(subset, q)]
        try:
            solve = np.linalg.solve(s_q, s_aq.T)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("query kernel singular after ridging") from exc
        deflated = s_a - obj.eta_mi**2 * (s_aq @ solve)
        return _logdet_psd(s_a) - _logdet_psd((deflated + deflated.T) / 2.0)
    if obj.kind == "com":
        psi = PSI_FUNCS[obj.psi]
        if not subset:
            return 0.0
        qblock = s[np.ix_(subset, q)]
        own = obj.eta_mi * float(psi(qblock.sum(axis=1)).sum())
        grown = float(psi(qblock.sum(axis=0)).sum())
        return own + grown
    raise AssertionError(obj.kind)


def marginal_gain(obj: SubmodularObjective, current: Selection, candidate: int) -> float:
    """f(S + candidate) - f(S) via the kind's incremental formula."""
    candidate = int(candidate)
    if candidate in current.chosen:
        raise ValueError(f"candidate {candidate} already chosen")
    ev = _Evaluator(obj)
    for c in current.chosen:
        ev.add(c)
    return ev.gain(candidate)


def naive_greedy(obj: SubmodularObjective, budget: int,
                 counter: dict | None = None) -> Selection:
    """Plain greedy: full rescan of remaining candidates each step."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    ground = obj.ground
    if not ground:
        raise ValueError("empty ground set")
    ev = _Evaluator(obj)
    remaining = list(ground)
    chosen, gains = [], []
    while remaining and len(chosen) < budget:
        best_gain, best = -math.inf, None
        for c in remaining:
            g = ev.gain(c)
            if counter is not None:
                counter["evals"] = counter.get("evals", 0) + 1
            if g > best_gain:
                best_gain, best = g, c
        ev.add(best)
        remaining.remove(best)
        chosen.append(best)
        gains.append(best_gain)
    return Selection(chosen, float(sum(gains)), gains, budget)


def lazy_greedy(obj: SubmodularObjective, budget: int,
                counter: dict | None = None) -> Selection:
    """Accelerated greedy with stale upper bounds (CELF).

    Matches naive greedy exactly for submodular kinds under the
    lowest-index tie-break.  Kinds without diminishing returns (the
    disparity pair, whose gains grow with the chosen set, and the
    log-det mutual-information difference form) break the
    stale-upper-bound argument and fall back to the naive scan.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if obj.kind in ("disparity-min", "disparity-sum", "logdet-mi"):
        return naive_greedy(obj, budget, counter)
    ground = obj.ground
    if not ground:
        raise ValueError("empty ground set")
    ev = _Evaluator(obj)
    heap = []
    for c in ground:
        g = ev.gain(c)
        if counter is not None:
            counter["evals"] = counter.get("evals", 0) + 1
        heapq.heappush(heap, (-g, c))
    chosen, gains = [], []
    while heap and len(chosen) < budget:
        neg, c = heapq.heappop(heap)
        g = ev.gain(c)
        if counter is not None:
            counter["evals"] = counter.get("evals", 0) + 1
        if not heap or (-g, c) <= heap[0]:
            ev.add(c)
            chosen.append(c)
            gains.append(g)
        else:
            heapq.heappush(heap, (-g, c))
    return Selection(chosen, float(sum(gains)), gains, budget)


def brute_force_opt(obj: SubmodularObjective, budget: int,
                    guard: int = 10**6) -> Selection:
    """Exact argmax over all subsets of size <= budget.

    Deterministic tie-break: smaller subsets first, lexicographic within
    a size, strict improvement required to replace the incumbent.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    ground = obj.ground
    n = len(ground)
    if math.comb(n, min(budget, n)) > guard:
        raise ValueError(
            f"C({n}, {budget}) exceeds the enumeration guard; use lazy_greedy")
    best_subset, best_value = [], evaluate(obj, [])
    for k in range(1, min(budget, n) + 1):
        for combo in itertools.combinations(ground, k):
            v = evaluate(obj, list(combo))
            if v > best_value:
                best_value, best_subset = v, list(combo)
    return Selection(best_subset, float(best_value), [], budget)
