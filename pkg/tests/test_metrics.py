"""Ranking metrics against brute-force pair counting, split/rebalance rules."""

import numpy as np
import pytest

from vcnet.errors import ConfigError, DataError
from vcnet.metrics import auc, confusion, dumps_report, f1, metrics_report, rebalance, split


def pair_auc(scores, labels):
    """Definition-level oracle: average pairwise win rate, ties worth half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def loop_f1(scores, labels, threshold=0.5):
    tp = sum(1 for s, y in zip(scores, labels) if s >= threshold and y == 1)
    fp = sum(1 for s, y in zip(scores, labels) if s >= threshold and y == 0)
    fn = sum(1 for s, y in zip(scores, labels) if s < threshold and y == 1)
    return 0.0 if 2 * tp + fp + fn == 0 else 2.0 * tp / (2 * tp + fp + fn)


# -- auc -----------------------------------------------------------------------


def test_auc_hand_examples():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5
    assert auc([0.7, 0.7], [0, 1]) == 0.5


def test_auc_requires_both_classes():
    with pytest.raises(DataError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(DataError):
        auc([], [])
    with pytest.raises(DataError):
        auc([0.1, np.nan], [0, 1])


def test_auc_matches_pair_counting_with_ties():
    rng = np.random.default_rng(42)
    for trial in range(60):
        n = int(rng.integers(2, 30))
        # coarse grid forces plenty of exact ties
        scores = rng.integers(0, 6, size=n) / 5.0
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        assert auc(scores, labels) == pytest.approx(pair_auc(scores, labels), abs=1e-12)


def test_auc_symmetries():
    rng = np.random.default_rng(17)
    scores = rng.random(50)
    labels = rng.integers(0, 2, size=50)
    labels[:2] = [0, 1]
    a = auc(scores, labels)
    assert auc(-scores, labels) == pytest.approx(1.0 - a, abs=1e-12)
    assert auc(scores, 1 - labels) == pytest.approx(1.0 - a, abs=1e-12)


# -- threshold metrics -----------------------------------------------------------


def test_confusion_counts_threshold_as_positive():
    tp, fp, tn, fn = confusion([0.5, 0.49, 0.51, 0.5], [1, 1, 0, 0])
    assert (tp, fp, tn, fn) == (1, 2, 0, 1)


def test_f1_hand_examples():
    assert f1([0.9, 0.4, 0.3], [1, 1, 0]) == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert f1([0.1, 0.2], [0, 0]) == 0.0  # nothing predicted, nothing positive
    assert f1([0.9, 0.8], [1, 1]) == 1.0


def test_f1_matches_loop_oracle():
    rng = np.random.default_rng(5)
    for _ in range(60):
        n = int(rng.integers(1, 40))
        scores = rng.integers(0, 4, size=n) / 4.0
        labels = rng.integers(0, 2, size=n)
        assert f1(scores, labels) == pytest.approx(loop_f1(scores, labels), abs=1e-12)


def test_report_shape_and_serialization():
    rep = metrics_report([0.9, 0.1], [1, 0])
    assert rep == {"auc": 1.0, "f1": 1.0, "n_pos": 1, "n_neg": 1, "threshold": 0.5}
    text = dumps_report(rep)
    assert text.endswith("\n")
    assert text.index('"auc"') < text.index('"f1"') < text.index('"n_pos"')
    assert dumps_report(rep) == dumps_report(dict(reversed(list(rep.items()))))


# -- splitting -------------------------------------------------------------------


def test_split_sizes_and_partition():
    items = list(range(10))
    labels = [1, 1, 1, 1, 1, 1, 0, 0, 0, 0]
    tr, va, te = split(items, (0.8, 0.1, 0.1), seed=0, labels=labels)
    assert (len(tr), len(va), len(te)) == (8, 1, 1)
    assert sorted(tr + va + te) == items


def test_split_is_stratified():
    items = list(range(100))
    labels = [i % 2 for i in items]
    tr, va, te = split(items, (0.8, 0.1, 0.1), seed=3, labels=labels)
    for part, want in ((tr, 40), (va, 5), (te, 5)):
        assert sum(labels[i] for i in part) == want


def test_split_deterministic_and_seed_sensitive():
    items = list(range(40))
    labels = [i % 2 for i in items]
    a = split(items, (0.5, 0.5), seed=9, labels=labels)
    b = split(items, (0.5, 0.5), seed=9, labels=labels)
    c = split(items, (0.5, 0.5), seed=10, labels=labels)
    assert a == b
    assert a != c


def test_split_reads_label_attribute():
    class Item:
        def __init__(self, i):
            self.label = i % 2

    items = [Item(i) for i in range(20)]
    tr, te = split(items, (0.75, 0.25), seed=0)
    assert len(tr) == 15 and len(te) == 5
    assert sum(it.label for it in te) in (2, 3)


def test_split_rejects_bad_fractions_and_labels():
    with pytest.raises(ConfigError):
        split([1, 2], (0.5, 0.4), seed=0, labels=[0, 1])
    with pytest.raises(ConfigError):
        split([1, 2], (-0.5, 1.5), seed=0, labels=[0, 1])
    with pytest.raises(ConfigError):
        split([1, 2], (), seed=0, labels=[0, 1])
    with pytest.raises(DataError):
        split([1, 2], (0.5, 0.5), seed=0, labels=[0, 2])
    with pytest.raises(DataError):
        split([1, 2], (0.5, 0.5), seed=0, labels=[0])


def test_split_handles_empty_parts():
    items = list(range(6))
    labels = [0, 1, 0, 1, 0, 1]
    tr, va, te = split(items, (1.0, 0.0, 0.0), seed=0, labels=labels)
    assert sorted(tr) == items and va == [] and te == []


# -- rebalancing -----------------------------------------------------------------


def test_rebalance_keeps_positives_and_subsamples_negatives():
    labels = [1] * 30 + [0] * 70
    items = list(range(100))
    out = rebalance(items, target_total=50, seed=1, labels=labels)
    assert len(out) == 50
    kept_labels = [labels[i] for i in out]
    assert sum(kept_labels) == 30
    assert out == sorted(out)  # input order preserved


def test_rebalance_deterministic_and_bounded():
    labels = [1] * 5 + [0] * 15
    items = list(range(20))
    a = rebalance(items, 12, seed=7, labels=labels)
    assert a == rebalance(items, 12, seed=7, labels=labels)
    assert a != rebalance(items, 12, seed=8, labels=labels)
    assert rebalance(items, 20, seed=0, labels=labels) == items
    with pytest.raises(ConfigError):
        rebalance(items, 4, seed=0, labels=labels)  # below positive count
    with pytest.raises(ConfigError):
        rebalance(items, 21, seed=0, labels=labels)
