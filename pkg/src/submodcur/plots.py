"""Matplotlib figure rendering for CLI artifacts (file output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_training_curves(records: list, path: Path) -> Path:
    """Validation loss/accuracy and arm choices over training steps."""
    steps = [r.t for r in records]
    val_loss = [r.val_loss for r in records]
    val_acc = [r.val_acc for r in records]
    arms = [r.arm for r in records]
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    axes[0].plot(steps, val_loss, lw=1.0, color="tab:blue")
    axes[0].set_ylabel("validation loss")
    axes[1].plot(steps, val_acc, lw=1.0, color="tab:green")
    axes[1].set_ylabel("validation accuracy")
    axes[2].scatter(steps, arms, s=4, color="tab:red")
    axes[2].set_ylabel("chosen arm")
    axes[2].set_xlabel("step")
    fig.suptitle("training run")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_regret_curve(curve, path: Path, label: str = "mean regret") -> Path:
    """Log-log mean instantaneous regret with a standard-error band."""
    t = np.arange(1, curve.horizon + 1)
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(t, curve.mean_regret, lw=1.0, label=label)
    lo = np.maximum(curve.mean_regret - curve.stderr, 1e-12)
    hi = curve.mean_regret + curve.stderr
    ax.fill_between(t, lo, hi, alpha=0.3)
    positive = curve.mean_regret > 0
    if positive.any():
        ax.set_yscale("log")
    ax.set_xscale("log")
    ax.set_xlabel("step t")
    ax.set_ylabel("mean instantaneous regret")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_bench_timings(rows: list, path: Path) -> Path:
    """Wall-clock of lazy vs naive greedy per (kind, n)."""
    kinds = sorted({r["kind"] for r in rows})
    fig, ax = plt.subplots(figsize=(7, 5))
    for kind in kinds:
        for algo, style in (("lazy", "-o"), ("naive", "--s")):
            pts = sorted((r["n"], r["wall_clock_s"]) for r in rows
                         if r["kind"] == kind and r["algo"] == algo
                         and r["wall_clock_s"] is not None)
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts], style,
                        label=f"{kind} ({algo})")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("ground-set size n")
    ax.set_ylabel("median wall-clock (s)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_bound_slack(report: dict, path: Path) -> Path:
    """Minimum integral-bound slack per regime as a bar chart."""
    names = ["constant", "growing"]
    slacks = [report[n]["min_slack"] for n in names]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, slacks, color=["tab:blue", "tab:orange"])
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_ylabel("minimum slack (LHS - RHS)")
    ax.set_title("integral lower-bound slack")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
