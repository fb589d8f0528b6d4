"""Figure rendering for training runs and evaluations.

Figures are written next to the delimited outputs they illustrate. Uses
matplotlib's object API directly (no pyplot, no global backend state);
matplotlib is imported lazily so headless code paths never pay for it.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np


def roc_points(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, tpr) swept over every distinct threshold, endpoints included."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    n_pos = max(int(y.sum()), 1)
    n_neg = max(int(y.size - y.sum()), 1)
    tp = np.cumsum(y == 1)
    fp = np.cumsum(y == 0)
    # collapse runs of equal scores to one operating point
    keep = np.append(s[1:] != s[:-1], True)
    fpr = np.concatenate([[0.0], fp[keep] / n_neg])
    tpr = np.concatenate([[0.0], tp[keep] / n_pos])
    return fpr, tpr


def save_training_curves(history: Sequence, path: str | Path) -> None:
    """Loss plus validation metrics per epoch, stacked in one figure."""
    from matplotlib.figure import Figure

    epochs = [h.epoch for h in history]
    fig = Figure(figsize=(7.0, 5.0), dpi=110)
    ax_loss, ax_val = fig.subplots(2, 1, sharex=True)
    ax_loss.plot(epochs, [h.train_loss for h in history], color="tab:red")
    ax_loss.set_ylabel("train loss")
    ax_loss.grid(True, alpha=0.3)
    ax_val.plot(epochs, [h.val_auc for h in history], color="tab:blue", label="val AUC")
    ax_val.plot(epochs, [h.val_f1 for h in history], color="tab:green", label="val F1")
    ax_val.set_xlabel("epoch")
    ax_val.set_ylabel("validation")
    ax_val.set_ylim(0.0, 1.05)
    ax_val.legend(loc="lower right")
    ax_val.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)


def save_roc_curve(scores, labels, path: str | Path, auc_value: float | None = None) -> None:
    from matplotlib.figure import Figure

    fpr, tpr = roc_points(scores, labels)
    fig = Figure(figsize=(5.0, 5.0), dpi=110)
    ax = fig.subplots()
    ax.plot(fpr, tpr, color="tab:blue", drawstyle="steps-post")
    ax.plot([0, 1], [0, 1], color="gray", linestyle="--", linewidth=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    if auc_value is not None:
        ax.set_title(f"AUC = {auc_value:.4f}")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
