"""Desk-scale supervised training loop driven by the arm-selection policy.

Models are multinomial logistic regression (``linear-softmax``) or a
one-hidden-layer tanh MLP (``mlp-1h``), both with exact analytic
per-sample cross-entropy gradients so the reward engine sees clean
gradient columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Batch, FeatureSet
from .kernels import gradient_features
from .objectives import MI_KINDS, SubmodularObjective, lazy_greedy
from .policy import ExplorationSchedule, PolicyState, select_arm
from .rewards import GradientMatrix, HessianApprox, arm_reward, fim_update

ARCHS = ("linear-softmax", "mlp-1h")


@dataclass
class ModelParams:
    """Flat parameter vector plus enough shape info to unflatten it."""

    arch: str
    n_classes: int
    d_feat: int
    hidden: int = 0
    weights: np.ndarray = None

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch {self.arch!r}")
        if self.arch == "mlp-1h" and self.hidden < 1:
            raise ValueError("mlp-1h needs a positive hidden width")
        if self.weights is None:
            self.weights = np.zeros(self.n_params)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.n_params,):
            raise ValueError(
                f"expected {self.n_params} parameters, got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("parameters must be finite")

    @property
    def n_params(self) -> int:
        c, f, h = self.n_classes, self.d_feat, self.hidden
        if self.arch == "linear-softmax":
            return c * f + c
        return h * f + h + c * h + c

    def unpack(self):
        c, f, h = self.n_classes, self.d_feat, self.hidden
        w = self.weights
        if self.arch == "linear-softmax":
            return w[: c * f].reshape(c, f), w[c * f:]
        o1 = h * f
        o2 = o1 + h
        o3 = o2 + c * h
        return (w[:o1].reshape(h, f), w[o1:o2], w[o2:o3].reshape(c, h), w[o3:])

    @staticmethod
    def init(arch, n_classes, d_feat, hidden=0, seed=0, scale=0.01):
        rng = np.random.default_rng(seed)
        model = ModelParams(arch, n_classes, d_feat, hidden)
        model.weights = scale * rng.standard_normal(model.n_params)
        return model


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(model: ModelParams, x: np.ndarray):
    if model.arch == "linear-softmax":
        w, b = model.unpack()
        return x @ w.T + b, None
    w1, b1, w2, b2 = model.unpack()
    hid = np.tanh(x @ w1.T + b1)
    return hid @ w2.T + b2, hid


def predict_proba(model: ModelParams, x: np.ndarray) -> np.ndarray:
    logits, _ = _forward(model, x)
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite logits")
    return _softmax(logits)


def mean_loss(model: ModelParams, x: np.ndarray, y: np.ndarray) -> float:
    p = predict_proba(model, x)
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(y)), y], 1e-300))))


def accuracy(model: ModelParams, x: np.ndarray, y: np.ndarray) -> float:
    p = predict_proba(model, x)
    return float(np.mean(p.argmax(axis=1) == y))


def per_sample_grads(model: ModelParams, batch: Batch,
                     features: FeatureSet) -> GradientMatrix:
    """Exact cross-entropy gradient columns, one per batch sample."""
    batch.validate_against(features)
    x = features.features[batch.indices]
    y = features.labels[batch.indices]
    logits, hid = _forward(model, x)
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite logits")
    p = _softmax(logits)
    err = p.copy()
    err[np.arange(len(y)), y] -= 1.0  # dL/dlogits per sample
    m = len(y)
    if model.arch == "linear-softmax":
        gw = np.einsum("mc,mf->mcf", err, x).reshape(m, -1)
        cols = np.hstack([gw, err])
    else:
        _, _, w2, _ = model.unpack()
        gw2 = np.einsum("mc,mh->mch", err, hid).reshape(m, -1)
        dhid = err @ w2
        da = dhid * (1.0 - hid**2)
        gw1 = np.einsum("mh,mf->mhf", da, x).reshape(m, -1)
        cols = np.hstack([gw1, da, gw2, err])
    return GradientMatrix(cols.T.copy())


def sgd_step(model: ModelParams, subset_grads: np.ndarray,
             lr: float) -> ModelParams:
    """theta - lr * mean(selected gradient columns)."""
    subset_grads = np.asarray(subset_grads, dtype=np.float64)
    if subset_grads.ndim != 2 or subset_grads.shape[1] < 1:
        raise ValueError("need at least one gradient column")
    new = ModelParams(model.arch, model.n_classes, model.d_feat, model.hidden,
                      model.weights - lr * subset_grads.mean(axis=1))
    return new


@dataclass
class TrainConfig:
    lr: float = 0.1
    lr_schedule: str = "constant"  # constant | cosine
    budget_frac: float = 0.3
    batch_size: int = 32
    epochs: int = 10
    warm_start_epochs: int = 0
    val_points: int = 2
    seed: int = 0
    feedback: str = "full"  # full | bandit
    hessian: str = "identity"  # identity | fim-ema
    fim_momentum: float = 0.1
    arch: str = "linear-softmax"
    hidden: int = 16
    selection: str = "online-submod"  # online-submod | random | full

    def __post_init__(self):
        if not 0.0 < self.budget_frac <= 1.0:
            raise ValueError("budget_frac must lie in (0, 1]")
        if self.warm_start_epochs < 0:
            raise ValueError("warm_start_epochs must be >= 0")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")
        if self.feedback not in ("full", "bandit"):
            raise ValueError(f"unknown feedback mode {self.feedback!r}")
        if self.hessian not in ("identity", "fim-ema"):
            raise ValueError(f"unknown hessian kind {self.hessian!r}")
        if self.selection not in ("online-submod", "random", "full"):
            raise ValueError(f"unknown selection mode {self.selection!r}")
        if self.batch_size < 1 or self.epochs < 1 or self.val_points < 1:
            raise ValueError("batch_size, epochs and val_points must be >= 1")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")


@dataclass
class StepRecord:
    t: int
    arm: int
    branch: str
    xi_raw: float | None
    xi: float | None
    rewards: list
    subset: list
    train_loss: float
    val_loss: float
    val_acc: float

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "arm": self.arm,
            "branch": self.branch,
            "xi_raw": self.xi_raw,
            "xi": self.xi,
            "rewards": self.rewards,
            "subset": self.subset,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "val_acc": self.val_acc,
        }


def warm_start_epochs_from_kappa(total_epochs: int, subset_size: int,
                                 n_samples: int, kappa: float) -> int:
    """Full-training epoch count from the selection-fraction coupling:
    T_s = kappa * T and T_f = T_s * k / n."""
    if not 0.0 < kappa <= 1.0:
        raise ValueError("kappa must lie in (0, 1]")
    t_s = kappa * total_epochs
    return max(0, int(round(t_s * subset_size / n_samples)))


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Per-epoch shuffle with a seed derived from the master seed."""
    return np.random.default_rng([seed, 17, epoch]).permutation(n)


def lr_at(config: TrainConfig, step: int, total_steps: int) -> float:
    if config.lr_schedule == "constant":
        return config.lr
    return config.lr * 0.5 * (1.0 + math.cos(math.pi * step / max(total_steps, 1)))


def build_arm_objectives(arms, kernel, query=None, mi_kernel=None):
    """Instantiate each configured arm over freshly built batch kernels.

    MI arms select over ``mi_kernel`` (batch plus query columns) but
    their ground sets exclude the query, so chosen indices always
    address batch columns.
    """
    objs = []
    for spec_ in arms:
        if isinstance(spec_, str):
            spec_ = {"kind": spec_}
        params = dict(spec_)
        kind = params.pop("kind")
        if kind in MI_KINDS:
            if query is None:
                raise ValueError(f"arm {kind} needs validation query items")
            params.setdefault("query", query)
            objs.append(SubmodularObjective(
                kind=kind, kernel=mi_kernel if mi_kernel is not None else kernel,
                **params))
        else:
            objs.append(SubmodularObjective(kind=kind, kernel=kernel, **params))
    return objs


@dataclass
class RunResult:
    records: list
    model: ModelParams
    policy: PolicyState = None


def run_online_submod(features_train: FeatureSet, features_val: FeatureSet,
                      config: TrainConfig, schedule: ExplorationSchedule,
                      arms) -> RunResult:
    """Full training loop: per-arm greedy selection, reward, policy, SGD."""
    if config.selection == "online-submod" and not arms:
        raise ValueError("arms list must be non-empty")
    if features_val.n_samples < 1:
        raise ValueError("validation set must be non-empty")
    n = features_train.n_samples
    n_classes = max(features_train.n_classes, features_val.n_classes)
    model = ModelParams.init(config.arch, n_classes, features_train.d_feat,
                             hidden=config.hidden, seed=config.seed)
    k_arms = len(arms) if arms else 0
    policy = PolicyState(n_arms=max(k_arms, 1), rng_seed=config.seed + 1)
    val_rng = np.random.default_rng([config.seed, 29])
    subset_rng = np.random.default_rng([config.seed, 43])
    hessian = HessianApprox(kind=config.hessian, momentum=config.fim_momentum)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    needs_query = any(
        (a if isinstance(a, str) else a.get("kind")) in MI_KINDS for a in (arms or []))
    records = []
    xs_val = features_val.features
    ys_val = features_val.labels
    t = 0
    for epoch in range(config.epochs):
        order = epoch_order(config.seed, epoch, n)
        warmup = epoch < config.warm_start_epochs
        for start in range(0, n, config.batch_size):
            t += 1
            idx = order[start:start + config.batch_size].tolist()
            batch = Batch(idx, kind="train")
            xb = features_train.features[idx]
            yb = features_train.labels[idx]
            eta = lr_at(config, t, total_steps)
            grads = per_sample_grads(model, batch, features_train)
            train_loss = mean_loss(model, xb, yb)
            budget = min(len(idx), max(1, round(config.budget_frac * len(idx))))
            if warmup or config.selection == "full":
                subset_cols = list(range(len(idx)))
                arm_id, branch = -1, "warmup" if warmup else "full"
                xi = xi_raw = None
                rewards_out = [0.0] * max(k_arms, 1)
            elif config.selection == "random":
                subset_cols = sorted(subset_rng.choice(len(idx), size=budget,
                                                       replace=False).tolist())
                arm_id, branch = -1, "random"
                xi = xi_raw = None
                rewards_out = [0.0] * max(k_arms, 1)
            else:
                vidx = val_rng.choice(features_val.n_samples,
                                      size=min(config.val_points,
                                               features_val.n_samples),
                                      replace=False).tolist()
                val_grads = per_sample_grads(model, Batch(vidx, "validation"),
                                             features_val)
                if config.hessian == "fim-ema":
                    hessian = fim_update(hessian, val_grads)
                kernel = gradient_features(grads.columns)
                if needs_query:
                    cols = np.hstack([grads.columns, val_grads.columns])
                    mi_kernel = gradient_features(cols)
                    query = list(range(len(idx), len(idx) + val_grads.m))
                else:
                    mi_kernel, query = None, None
                objs = build_arm_objectives(arms, kernel, query, mi_kernel)
                selections = [lazy_greedy(obj, budget) for obj in objs]
                if config.feedback == "full":
                    rewards = [
                        arm_reward(a, selections[a], grads, val_grads, hessian, eta)
                        for a in range(k_arms)
                    ]
                    reward_values = [r.value for r in rewards]
                    arm_id, branch, xi, xi_raw, _ = select_arm(
                        policy, schedule, reward_values)
                else:
                    arm_id, branch, xi, xi_raw, _ = select_arm(policy, schedule)
                    picked = arm_reward(arm_id, selections[arm_id], grads,
                                        val_grads, hessian, eta)
                    policy.last_rewards[arm_id] = picked.value
                rewards_out = [float(v) for v in policy.last_rewards]
                subset_cols = selections[arm_id].chosen
            # ascending column order keeps the update's summation order
            # independent of greedy selection order; a full-coverage subset
            # uses the original array so the trajectory is bitwise identical
            # to plain SGD (slicing changes memory layout and hence the
            # pairwise-summation order inside mean)
            if len(subset_cols) == grads.m:
                model = sgd_step(model, grads.columns, eta)
            else:
                model = sgd_step(model, grads.columns[:, sorted(subset_cols)],
                                 eta)
            val_loss = mean_loss(model, xs_val, ys_val)
            val_acc = accuracy(model, xs_val, ys_val)
            records.append(StepRecord(
                t=t, arm=arm_id, branch=branch, xi_raw=xi_raw, xi=xi,
                rewards=rewards_out, subset=[int(idx[c]) for c in subset_cols],
                train_loss=train_loss, val_loss=val_loss, val_acc=val_acc))
    return RunResult(records=records, model=model, policy=policy)
