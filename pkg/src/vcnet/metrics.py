"""Exact ranking metrics, deterministic splits, and class rebalancing.

AUC is computed from the rank statistic with midranks for ties, which makes
it the exact probability that a random positive outscores a random negative
(ties count half). No trapezoids, no binning, no tolerance.
"""

from __future__ import annotations

import json
import math
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError


def _as_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or y.shape != s.shape:
        raise DataError("scores and labels must be equal-length vectors")
    if s.size == 0:
        raise DataError("empty score set")
    if not math.isfinite(float(np.sum(s))):
        raise DataError("non-finite scores")
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def _midranks(s: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values all receive the mean of their rank span."""
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size, dtype=np.float64)
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and s[order[j + 1]] == s[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """Exact area under the ROC curve via the rank-sum statistic.

    Equals mean over all positive/negative pairs of
    [score_pos > score_neg] + 0.5 [score_pos == score_neg].
    Needs at least one example of each class.
    """
    s, y = _as_scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    ranks = _midranks(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def confusion(scores, labels, threshold: float = 0.5) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) with scores >= threshold predicted positive."""
    s, y = _as_scores_labels(scores, labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return tp, fp, tn, fn


def f1(scores, labels, threshold: float = 0.5) -> float:
    """Harmonic mean of precision and recall at the threshold; 0 when undefined."""
    tp, fp, _, fn = confusion(scores, labels, threshold)
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2.0 * tp / denom


def metrics_report(scores, labels, threshold: float = 0.5) -> dict:
    """The flat report object every evaluation emits."""
    s, y = _as_scores_labels(scores, labels)
    return {
        "auc": auc(s, y),
        "f1": f1(s, y, threshold),
        "n_pos": int(y.sum()),
        "n_neg": int(y.size - y.sum()),
        "threshold": threshold,
    }


def dumps_report(report: dict) -> str:
    """Canonical JSON text (sorted keys, newline-terminated, repr floats)."""
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


def split(items: Sequence, fractions: Sequence[float], seed: int,
          labels: Sequence[int] | None = None) -> tuple[list, ...]:
    """Deterministic stratified partition of a labeled dataset.

    Split sizes follow the fractions by largest remainder on the whole set;
    within that, each class is spread across the splits as proportionally
    as integer counts allow. Items supply their own ``label`` attribute
    unless ``labels`` is given explicitly.
    """
    fr = [float(f) for f in fractions]
    if not fr:
        raise ConfigError("need at least one fraction")
    if any(f < 0 for f in fr):
        raise ConfigError("fractions must be non-negative")
    if abs(sum(fr) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {sum(fr)!r}")
    if labels is None:
        labels = [getattr(it, "label") for it in items]
    labels = list(labels)
    if len(labels) != len(items):
        raise DataError("labels and items disagree in length")
    if any(lb not in (0, 1) for lb in labels):
        raise DataError("split needs 0/1 labels on every item")

    n = len(items)
    k = len(fr)
    # global split sizes: floors, then remainders largest-first (ties: lower index)
    raw = [n * f for f in fr]
    sizes = [int(math.floor(x)) for x in raw]
    leftover = n - sum(sizes)
    by_rem = sorted(range(k), key=lambda j: (-(raw[j] - sizes[j]), j))
    for j in by_rem[:leftover]:
        sizes[j] += 1

    rng = np.random.default_rng(seed)
    out: list[list] = [[] for _ in range(k)]
    assigned = [0] * k
    classes = sorted(set(labels))
    plan: list[tuple[int, list[int]]] = []  # (class items shuffled, per-split counts) pairs
    leftovers: list[tuple[int, list[float]]] = []
    counts_per_class: dict[int, list[int]] = {}
    members_per_class: dict[int, list[int]] = {}
    for c in classes:
        members = [i for i, lb in enumerate(labels) if lb == c]
        perm = rng.permutation(len(members))
        members_per_class[c] = [members[int(p)] for p in perm]
        raw_c = [len(members) * f for f in fr]
        floors = [int(math.floor(x)) for x in raw_c]
        counts_per_class[c] = floors
        for j in range(k):
            assigned[j] += floors[j]
        leftovers.append((c, [raw_c[j] - floors[j] for j in range(k)]))
    # hand out per-class leftovers into splits that still have room,
    # preferring the split the class is most short on
    for c, rems in leftovers:
        short = len(members_per_class[c]) - sum(counts_per_class[c])
        for _ in range(short):
            avail = [j for j in range(k) if assigned[j] < sizes[j]]
            j = max(avail, key=lambda j: (rems[j], -j))
            counts_per_class[c][j] += 1
            assigned[j] += 1
    for c in classes:
        pos = 0
        for j in range(k):
            take = counts_per_class[c][j]
            out[j].extend(items[i] for i in members_per_class[c][pos:pos + take])
            pos += take
    return tuple(out)


def rebalance(items: Sequence, target_total: int, seed: int,
              labels: Sequence[int] | None = None) -> list:
    """Keep every positive, subsample negatives down to target_total items.

    Output preserves the input order of the survivors. Requires
    n_pos <= target_total <= len(items).
    """
    if labels is None:
        labels = [getattr(it, "label") for it in items]
    labels = list(labels)
    n = len(items)
    n_pos = sum(1 for lb in labels if lb == 1)
    if not n_pos <= target_total <= n:
        raise ConfigError(
            f"target_total must lie in [{n_pos}, {n}] (positives through dataset size), got {target_total}"
        )
    neg_idx = [i for i, lb in enumerate(labels) if lb == 0]
    keep_neg = target_total - n_pos
    rng = np.random.default_rng(seed)
    chosen = set(int(neg_idx[j]) for j in rng.permutation(len(neg_idx))[:keep_neg])
    return [it for i, it in enumerate(items) if labels[i] == 1 or i in chosen]
