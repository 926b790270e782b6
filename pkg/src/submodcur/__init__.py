"""Bandit-guided submodular curriculum learning.

At each training step a family of submodular objectives ("arms") each
propose a gradient-space subset of the mini-batch; a validation-driven
reward scores the proposals; and an annealing explore/exploit policy
picks the arm whose subset the SGD update actually uses.
"""

from .data import Batch, FeatureSet, gaussian_blobs
from .kernels import SimilarityMatrix, build_kernel, gradient_features
from .objectives import (
    KINDS,
    MI_KINDS,
    MONOTONE_KINDS,
    Selection,
    SubmodularObjective,
    brute_force_opt,
    evaluate,
    lazy_greedy,
    marginal_gain,
    mi_evaluate,
    naive_greedy,
)
from .policy import ExplorationSchedule, PolicyState, RegretTracker, select_arm, threshold
from .rewards import (
    GradientMatrix,
    HessianApprox,
    RewardEstimate,
    arm_reward,
    batchwise_gain,
    exact_utility,
    fim_update,
    pairwise_gain,
    samplewise_gain,
)
from .theory import (
    RegretCurve,
    SyntheticArm,
    adaptive_simpson,
    check_counting_lemma,
    check_integral_bounds,
    simulate_regret,
)
from .training import (
    ModelParams,
    RunResult,
    StepRecord,
    TrainConfig,
    accuracy,
    mean_loss,
    per_sample_grads,
    predict_proba,
    run_online_submod,
    sgd_step,
)

__version__ = "0.1.0"

__all__ = [
    "Batch", "FeatureSet", "gaussian_blobs",
    "SimilarityMatrix", "build_kernel", "gradient_features",
    "KINDS", "MI_KINDS", "MONOTONE_KINDS", "Selection", "SubmodularObjective",
    "brute_force_opt", "evaluate", "lazy_greedy", "marginal_gain",
    "mi_evaluate", "naive_greedy",
    "ExplorationSchedule", "PolicyState", "RegretTracker", "select_arm",
    "threshold",
    "GradientMatrix", "HessianApprox", "RewardEstimate", "arm_reward",
    "batchwise_gain", "exact_utility", "fim_update", "pairwise_gain",
    "samplewise_gain",
    "RegretCurve", "SyntheticArm", "adaptive_simpson", "check_counting_lemma",
    "check_integral_bounds", "simulate_regret",
    "ModelParams", "RunResult", "StepRecord", "TrainConfig", "accuracy",
    "mean_loss", "per_sample_grads", "predict_proba", "run_online_submod",
    "sgd_step",
    "__version__",
]
