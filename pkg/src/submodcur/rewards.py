"""Validation-driven reward engine.

The per-arm reward is the expected one-step drop in validation loss
caused by an SGD update on the arm's selected subset, estimated from
per-sample gradients and a Hessian surrogate:

    gain = lr * gbar . g_val  -  lr^2 * (1 - sum(gbar)) * gbar^T H gbar

where gbar is the mean of the selected gradient columns.  The
(1 - sum(gbar)) factor comes from expanding the mean-subtraction term
of the second-order correction; the dense-matrix form is kept in the
test suite as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FIM_DIM_GUARD = 4096


@dataclass
class GradientMatrix:
    """d x m matrix whose column j is the loss gradient of sample j."""

    columns: np.ndarray
    step: int = 0

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=np.float64)
        if self.columns.ndim != 2 or self.columns.shape[1] < 1:
            raise ValueError("gradient matrix must be d x m with m >= 1")
        if not np.all(np.isfinite(self.columns)):
            raise ValueError("gradient matrix has non-finite entries")

    @property
    def d(self) -> int:
        return self.columns.shape[0]

    @property
    def m(self) -> int:
        return self.columns.shape[1]


@dataclass
class HessianApprox:
    """Identity surrogate, or an EMA of validation-gradient outer products."""

    kind: str = "identity"
    fim_state: np.ndarray | None = None
    momentum: float = 0.1

    def __post_init__(self):
        if self.kind not in ("identity", "fim-ema"):
            raise ValueError(f"unknown hessian kind {self.kind!r}")
        if not 0.0 < self.momentum <= 1.0:
            raise ValueError("momentum must lie in (0, 1]")
        if self.kind == "identity" and self.fim_state is not None:
            raise ValueError("identity hessian carries no state")
        if self.fim_state is not None:
            self.fim_state = np.asarray(self.fim_state, dtype=np.float64)
            if not np.allclose(self.fim_state, self.fim_state.T, atol=1e-8):
                raise ValueError("fim state must be symmetric")

    def apply(self, vec: np.ndarray) -> np.ndarray:
        if self.kind == "identity" or self.fim_state is None:
            return vec
        return self.fim_state @ vec


@dataclass
class RewardEstimate:
    """Expected marginal gain of one arm, with both terms kept separate."""

    arm: int
    value: float
    term1: float
    term2: float
    lr: float


def exact_utility(val_loss_before: float, val_loss_after: float) -> float:
    """Loss reduction on a validation instance; positive means improvement."""
    if not (np.isfinite(val_loss_before) and np.isfinite(val_loss_after)):
        raise ValueError("losses must be finite")
    return float(val_loss_before - val_loss_after)


def _mean_gradient(columns: np.ndarray) -> np.ndarray:
    # summation order fixed per coordinate, independent of column order,
    # so the result is bit-identical under column permutations
    return np.sort(columns, axis=1).sum(axis=1) / columns.shape[1]


def samplewise_gain(grads: GradientMatrix, val_grad: np.ndarray,
                    hessian: HessianApprox, lr: float,
                    split_terms: bool = False):
    """Expected marginal gain of the batch against one validation gradient."""
    val_grad = np.asarray(val_grad, dtype=np.float64)
    if val_grad.shape != (grads.d,):
        raise ValueError(f"val_grad must have length {grads.d}")
    if lr < 0.0:
        raise ValueError("lr must be non-negative")
    _check_fim_dim(hessian, grads.d)
    gbar = _mean_gradient(grads.columns)
    term1 = lr * float(gbar @ val_grad)
    hg = hessian.apply(gbar)
    term2 = lr**2 * (1.0 - float(gbar.sum())) * float(gbar @ hg)
    if split_terms:
        return term1 - term2, term1, term2
    return term1 - term2


def pairwise_gain(train_grad: np.ndarray, val_grad: np.ndarray,
                  mean_prefix_grad: np.ndarray, hessian: HessianApprox,
                  lr: float):
    """Single-sample gain: influence term minus Hessian-weighted similarity.

    Returns (gain, term1, term2).
    """
    train_grad = np.asarray(train_grad, dtype=np.float64)
    val_grad = np.asarray(val_grad, dtype=np.float64)
    mean_prefix_grad = np.asarray(mean_prefix_grad, dtype=np.float64)
    if not (train_grad.shape == val_grad.shape == mean_prefix_grad.shape):
        raise ValueError("gradient vectors must share one length")
    _check_fim_dim(hessian, train_grad.shape[0])
    term1 = lr * float(train_grad @ val_grad)
    term2 = lr**2 * float(train_grad @ hessian.apply(mean_prefix_grad))
    return term1 - term2, term1, term2


def arm_reward(arm: int, arm_selection, grads: GradientMatrix,
               val_grads: GradientMatrix, hessian: HessianApprox,
               lr: float) -> RewardEstimate:
    """Mean samplewise gain of the selected columns over validation columns."""
    chosen = sorted(int(i) for i in getattr(arm_selection, "chosen", arm_selection))
    if not chosen:
        raise ValueError("empty selection")
    if chosen[0] < 0 or chosen[-1] >= grads.m:
        raise IndexError("selection index outside gradient matrix")
    sub = GradientMatrix(grads.columns[:, chosen], step=grads.step)
    vals, t1s = [], []
    for j in range(val_grads.m):
        v, t1, _ = samplewise_gain(sub, val_grads.columns[:, j], hessian, lr,
                                   split_terms=True)
        vals.append(v)
        t1s.append(t1)
    value = float(np.mean(vals))
    term1 = float(np.mean(t1s))
    # derive term2 from the other two so that value == term1 - term2 holds
    # bit-exactly alongside the mean-of-gains decomposition
    term2 = term1 - value
    return RewardEstimate(arm=arm, value=value, term1=term1, term2=term2, lr=lr)


def batchwise_gain(batch_means: np.ndarray, val_grad: np.ndarray,
                   hessian: HessianApprox, lr: float) -> float:
    """Batch-as-unit gain: cross terms over distinct batch pairs only."""
    batch_means = np.asarray(batch_means, dtype=np.float64)
    val_grad = np.asarray(val_grad, dtype=np.float64)
    if batch_means.ndim != 2 or batch_means.shape[1] < 1:
        raise ValueError("batch_means must be d x k with k >= 1")
    if val_grad.shape != (batch_means.shape[0],):
        raise ValueError("val_grad length mismatch")
    _check_fim_dim(hessian, batch_means.shape[0])
    total = batch_means.sum(axis=1)
    term1 = lr * float(total @ val_grad)
    h_cols = np.column_stack([hessian.apply(batch_means[:, j])
                              for j in range(batch_means.shape[1])])
    pair_sum = float(total @ h_cols.sum(axis=1))
    diag_sum = float(np.einsum("ij,ij->", batch_means, h_cols))
    term2 = lr**2 * (pair_sum - diag_sum)
    return term1 - term2


def fim_update(state: HessianApprox, val_grads: GradientMatrix) -> HessianApprox:
    """EMA step over the batch average of gradient outer products."""
    if state.kind != "fim-ema":
        raise ValueError("fim_update requires a fim-ema hessian")
    _check_fim_dim(state, val_grads.d, building=True)
    cols = val_grads.columns
    batch_avg = (cols @ cols.T) / val_grads.m
    if state.fim_state is None:
        new = batch_avg
    else:
        if state.fim_state.shape[0] != val_grads.d:
            raise ValueError("gradient dimension does not match fim state")
        new = (1.0 - state.momentum) * state.fim_state + state.momentum * batch_avg
    new = (new + new.T) / 2.0
    return HessianApprox(kind="fim-ema", fim_state=new, momentum=state.momentum)


def _check_fim_dim(hessian: HessianApprox, d: int, building: bool = False) -> None:
    if hessian.kind != "fim-ema":
        return
    if d > FIM_DIM_GUARD:
        raise ValueError(
            f"fim-ema hessian limited to d <= {FIM_DIM_GUARD}, got {d}")
    if not building and hessian.fim_state is not None \
            and hessian.fim_state.shape[0] != d:
        raise ValueError("gradient dimension does not match fim state")
