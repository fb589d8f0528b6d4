"""Mini-batch training with adaptive-moment optimizers and lr halving.

The protocol: shuffle each epoch with a seeded generator, batches of
``batch_size`` (the short tail batch is kept), per-graph tapes whose
gradients merge in index order, then one optimizer step per batch. After
every epoch the validation AUC drives the schedule: a strict improvement
checkpoints the parameters; ``patience`` consecutive non-improvements halve
the learning rate and roll the parameters back to the best checkpoint; the
run stops after ``max_halvings`` halvings or ``max_epochs`` epochs,
whichever comes first, and the best checkpoint wins either way.

Everything downstream of one seed is deterministic; two identical calls
produce identical histories float for float.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, NumericError
from .graphs import Graph
from .metrics import auc, f1
from .model import ModelConfig, VirtualColumnNet

OPTIMIZERS = ("adam", "rmsprop")

DEFAULT_LR_GRID = (0.001, 0.002, 0.003, 0.004, 0.005)


@dataclass(frozen=True)
class TrainConfig:
    """Everything one training run depends on, model shape included."""

    # model hyperparameters
    d_h: int = 8
    d_v: int = 8
    steps: int = 11
    readout: str = "virtual"
    virtual: bool = True
    virtual_gate: bool = True
    reset_gate: bool = False
    activation: str = "relu"
    head_hidden: int = 0
    dropout: float = 0.0
    # optimization protocol
    lr: float = 0.001
    lr_grid: tuple[float, ...] = DEFAULT_LR_GRID
    optimizer: str = "adam"
    batch_size: int = 100
    max_epochs: int = 500
    max_halvings: int = 4
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.max_halvings < 0:
            raise ConfigError("max_halvings must be >= 0")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        object.__setattr__(self, "lr_grid", tuple(float(x) for x in self.lr_grid))

    def model_config(self, d_x: int, n_edge_types: int, d_g: int | None = None) -> ModelConfig:
        return ModelConfig(
            d_x=d_x,
            n_edge_types=n_edge_types,
            d_h=self.d_h,
            d_v=self.d_v,
            d_g=d_g,
            steps=self.steps,
            readout=self.readout,
            virtual=self.virtual,
            virtual_gate=self.virtual_gate,
            reset_gate=self.reset_gate,
            activation=self.activation,
            head_hidden=self.head_hidden,
            dropout=self.dropout,
        )


def build_model(cfg: TrainConfig, graphs: Sequence[Graph], rng: np.random.Generator) -> VirtualColumnNet:
    """Instantiate a model sized to the dataset at hand."""
    if not graphs:
        raise ConfigError("cannot size a model from an empty dataset")
    g0 = graphs[0]
    d_g = None
    for g in graphs:
        if g.graph_attrs is not None:
            d_g = g.graph_attrs.shape[0]
            break
    return VirtualColumnNet(cfg.model_config(g0.attr_dim, g0.n_edge_types, d_g), rng=rng)


# ---------------------------------------------------------------------------
# optimizers


def adam_step(theta: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray,
              lr: float, t: int, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One bias-corrected moment update, in place; t counts steps from 1."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    theta -= lr * m_hat / (np.sqrt(v_hat) + eps)


def rmsprop_step(theta: np.ndarray, grad: np.ndarray, cache: np.ndarray,
                 lr: float, decay: float = 0.9, eps: float = 1e-8) -> None:
    """Leaky squared-gradient normalization, in place."""
    cache *= decay
    cache += (1.0 - decay) * grad * grad
    theta -= lr * grad / (np.sqrt(cache) + eps)


class Optimizer:
    """Per-parameter state for either update rule, keyed by parameter name."""

    def __init__(self, kind: str):
        if kind not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {kind!r}")
        self.kind = kind
        self.reset()

    def reset(self) -> None:
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, named_params: list[tuple[str, ad.Tensor]],
             grads: dict[str, np.ndarray], lr: float) -> None:
        for name, _ in named_params:
            g = grads[name]
            if not math.isfinite(float(np.sum(g))):
                raise NumericError(f"non-finite gradient for {name}")
        self.t += 1
        for name, p in named_params:
            if name not in self._m:
                self._m[name] = np.zeros_like(p.data)
                if self.kind == "adam":
                    self._v[name] = np.zeros_like(p.data)
            if self.kind == "adam":
                adam_step(p.data, grads[name], self._m[name], self._v[name], lr, self.t)
            else:
                rmsprop_step(p.data, grads[name], self._m[name], lr)


# ---------------------------------------------------------------------------
# schedule


@dataclass
class ScheduleState:
    """Progress of the halving schedule for one run."""

    lr: float
    patience: int
    max_halvings: int
    best_metric: float = -math.inf
    best_epoch: int = 0
    halvings: int = 0
    bad_epochs: int = 0


def schedule_update(state: ScheduleState, epoch: int, metric: float) -> str:
    """Feed one epoch's validation metric; returns the action taken.

    "improved": new strict best, caller should checkpoint.
    "continue": within patience, keep going.
    "halve":    patience exhausted, lr was halved, caller must roll back.
    "stop":     patience exhausted with no halvings left.
    """
    if metric > state.best_metric:
        state.best_metric = metric
        state.best_epoch = epoch
        state.bad_epochs = 0
        return "improved"
    state.bad_epochs += 1
    if state.bad_epochs < state.patience:
        return "continue"
    if state.halvings >= state.max_halvings:
        return "stop"
    state.halvings += 1
    state.lr = state.lr / 2.0  # exact in binary floating point
    state.bad_epochs = 0
    return "halve"


# ---------------------------------------------------------------------------
# the loop


@dataclass
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    val_auc: float
    val_f1: float


@dataclass
class TrainResult:
    history: list[EpochStats]
    best_epoch: int
    best_metric: float
    halvings: int
    stopped: str  # "halvings" | "max_epochs"


def _default_metrics(model: VirtualColumnNet, val_graphs: Sequence[Graph], epoch: int) -> tuple[float, float]:
    scores = model.score_many(val_graphs)
    labels = [g.label for g in val_graphs]
    return auc(scores, labels), f1(scores, labels)


def train(
    model: VirtualColumnNet,
    train_graphs: Sequence[Graph],
    val_graphs: Sequence[Graph],
    cfg: TrainConfig,
    log: Callable[[str], None] | None = None,
    metric_fn: Callable[[VirtualColumnNet, Sequence[Graph], int], tuple[float, float]] | None = None,
) -> TrainResult:
    """Fit in place; the model ends at the best-validation parameters.

    ``metric_fn`` exists so tests can drive the schedule with a stubbed
    metric stream; the default computes AUC and F1 on ``val_graphs``.
    """
    if not train_graphs or not val_graphs:
        raise ConfigError("need non-empty train and validation sets")
    for g in itertools.chain(train_graphs, val_graphs):
        if g.label is None:
            raise ConfigError("every graph in train/val must be labeled")
    if metric_fn is None:
        metric_fn = _default_metrics

    shuffle_ss, dropout_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    dropout_rng = np.random.default_rng(dropout_ss)
    opt = Optimizer(cfg.optimizer)
    sched = ScheduleState(lr=cfg.lr, patience=cfg.patience, max_halvings=cfg.max_halvings)
    named = model.named_parameters()
    best = model.params.snapshot()
    history: list[EpochStats] = []
    stopped = "max_epochs"

    n = len(train_graphs)
    for epoch in range(1, cfg.max_epochs + 1):
        lr_used = sched.lr
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            acc = {name: np.zeros_like(p.data) for name, p in named}
            for idx in batch:
                loss, tape = model.loss(train_graphs[int(idx)], training=True, rng=dropout_rng)
                loss_sum += float(loss.data)
                grads = ad.backward(tape, loss, seed=1.0 / len(batch))
                for name, p in named:
                    acc[name] += grads.of(p)
            opt.step(named, acc, lr_used)
        train_loss = loss_sum / n

        val_auc, val_f1 = metric_fn(model, val_graphs, epoch)
        history.append(EpochStats(epoch, lr_used, train_loss, val_auc, val_f1))
        action = schedule_update(sched, epoch, val_auc)
        if log:
            log(f"epoch {epoch}: lr={lr_used:g} loss={train_loss:.4f} "
                f"val_auc={val_auc:.4f} val_f1={val_f1:.4f} [{action}]")
        if action == "improved":
            best = model.params.snapshot()
        elif action == "halve":
            model.params.restore(best)
            opt.reset()
        elif action == "stop":
            stopped = "halvings"
            break

    model.params.restore(best)
    return TrainResult(
        history=history,
        best_epoch=sched.best_epoch,
        best_metric=sched.best_metric,
        halvings=sched.halvings,
        stopped=stopped,
    )


def write_history_csv(history: Sequence[EpochStats], path: str | Path) -> None:
    """epoch,lr,train_loss,val_auc,val_f1 with repr-exact floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "lr", "train_loss", "val_auc", "val_f1"])
        for row in history:
            w.writerow([row.epoch, repr(row.lr), repr(row.train_loss),
                        repr(row.val_auc), repr(row.val_f1)])


# ---------------------------------------------------------------------------
# grid search


@dataclass
class Trial:
    cfg: TrainConfig
    result: TrainResult | None
    skipped: str | None = None


def grid_search(
    train_graphs: Sequence[Graph],
    val_graphs: Sequence[Graph],
    base: TrainConfig,
    grid: dict[str, Sequence] | None = None,
    log: Callable[[str], None] | None = None,
) -> tuple[TrainConfig, list[Trial]]:
    """Exhaustive search over config overrides, best validation AUC wins.

    Ties break toward smaller d_h, then smaller lr. Combinations that fail
    config validation (for example lr = 0) are skipped, not fatal. Default
    grid: the config's lr_grid.
    """
    if grid is None:
        grid = {"lr": base.lr_grid}
    keys = sorted(grid)
    trials: list[Trial] = []
    best_key = None
    best_cfg = None
    for values in itertools.product(*(grid[k] for k in keys)):
        override = dict(zip(keys, values))
        try:
            cfg = replace(base, **override)
        except ConfigError as e:
            trials.append(Trial(cfg=base, result=None, skipped=f"{override}: {e}"))
            if log:
                log(f"skipping {override}: {e}")
            continue
        model = build_model(cfg, train_graphs, rng=np.random.default_rng(cfg.seed))
        result = train(model, train_graphs, val_graphs, cfg, log=log)
        trials.append(Trial(cfg=cfg, result=result))
        key = (-result.best_metric, cfg.d_h, cfg.lr)
        if best_key is None or key < best_key:
            best_key, best_cfg = key, cfg
        if log:
            log(f"trial {override}: best val_auc={result.best_metric:.4f}")
    if best_cfg is None:
        raise ConfigError("every grid combination was invalid")
    return best_cfg, trials
