"""Whole-graph binary classifier built on the column recurrence.

The model augments each input graph with one *virtual column*: an extra
recurrent state h0 that averages all node states each step and broadcasts
its previous value back into every node update. Two consequences follow
directly from that wiring and are what the tests lean on:

* Information travels between any two nodes in two steps (node -> virtual
  -> node), no matter how far apart the graph puts them. Without the
  virtual column a node's state after k steps is a function of its
  distance-k in-neighborhood only.
* Zeroing the coupling matrices (node-side ``cand_v``/``gate_v`` and
  virtual-side aggregation) and reading the graph out by mean-pooling
  reproduces a plain column network exactly; the virtual state still
  evolves but influences nothing.

The graph label is read either from the virtual column's final state
(``readout="virtual"``) or from the mean of the final node states
(``readout="mean"``), followed by a sigmoid head. Inverted dropout is
applied in exactly two places: the projected input states and the readout
vector; never between recurrence steps, and never at inference.

Checkpoints are flat JSON: one entry per named parameter with its shape and
flattened values. Floats are serialized through ``repr`` (the json module's
default), which round-trips IEEE doubles bit-exactly.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import column as col
from .autodiff import Tape, Tensor
from .column import ColumnParams, ColumnState
from .errors import CheckpointError, ConfigError, DataError
from .graphs import AugmentedGraph, Graph, augment, build_neighbor_index

CHECKPOINT_FORMAT = "vcnet-checkpoint"
CHECKPOINT_VERSION = 1

READOUTS = ("virtual", "mean")


@dataclass(frozen=True)
class ModelConfig:
    """Structural hyperparameters; everything a checkpoint must remember.

    d_x: node attribute width the model expects.
    d_g: graph-level input width for the virtual column (defaults to d_x).
    d_h/d_v: node / virtual state widths.
    steps: total depth T counted like layer states, so steps - 1 updates run.
    """

    d_x: int
    n_edge_types: int
    d_h: int = 8
    d_v: int = 8
    d_g: int | None = None
    steps: int = 11
    readout: str = "virtual"
    virtual: bool = True
    virtual_gate: bool = True
    reset_gate: bool = False
    activation: str = "relu"
    head_hidden: int = 0
    dropout: float = 0.0

    def __post_init__(self):
        if self.d_x < 1 or self.d_h < 1 or self.d_v < 1:
            raise ConfigError("state and input widths must be >= 1")
        if self.n_edge_types < 0:
            raise ConfigError("n_edge_types must be >= 0")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.readout not in READOUTS:
            raise ConfigError(f"readout must be one of {READOUTS}, got {self.readout!r}")
        if self.readout == "virtual" and not self.virtual:
            raise ConfigError("virtual readout requires the virtual column")
        if self.activation not in col.ACTIVATIONS:
            raise ConfigError(f"activation must be one of {tuple(col.ACTIVATIONS)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.head_hidden < 0:
            raise ConfigError("head_hidden must be >= 0")
        if self.d_g is None:
            object.__setattr__(self, "d_g", self.d_x)
        elif self.d_g < 1:
            raise ConfigError("d_g must be >= 1")

    @property
    def readout_dim(self) -> int:
        return self.d_v if self.readout == "virtual" else self.d_h


@dataclass
class VirtualParams:
    """Weights of the virtual column itself (projection, candidate, gate)."""

    proj_w: Tensor
    proj_b: Tensor
    cand_w: Tensor  # (d_v, d_v) self-recurrence
    cand_u: Tensor  # (d_v, d_h) applied to the mean node state
    cand_b: Tensor
    gate_w: Tensor | None = None
    gate_u: Tensor | None = None
    gate_b: Tensor | None = None

    @property
    def gated(self) -> bool:
        return self.gate_w is not None

    def named(self):
        for fname in ("proj_w", "proj_b", "cand_w", "cand_u", "cand_b", "gate_w", "gate_u", "gate_b"):
            t = getattr(self, fname)
            if t is not None:
                yield t.name, t


@dataclass
class HeadParams:
    """Sigmoid classifier head over the readout vector."""

    out_w: Tensor
    out_b: Tensor
    hidden_w: Tensor | None = None
    hidden_b: Tensor | None = None

    def named(self):
        for fname in ("hidden_w", "hidden_b", "out_w", "out_b"):
            t = getattr(self, fname)
            if t is not None:
                yield t.name, t


@dataclass
class VcnParams:
    column: ColumnParams
    virtual: VirtualParams | None
    head: HeadParams

    def named(self) -> list[tuple[str, Tensor]]:
        out = list(self.column.named())
        if self.virtual is not None:
            out.extend(self.virtual.named())
        out.extend(self.head.named())
        return out

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        named = dict(self.named())
        if set(values) != set(named):
            missing = set(named) - set(values)
            extra = set(values) - set(named)
            raise CheckpointError(f"parameter name mismatch (missing {sorted(missing)}, extra {sorted(extra)})")
        for name, t in named.items():
            arr = np.asarray(values[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise CheckpointError(f"shape mismatch for {name}: {arr.shape} vs {t.data.shape}")
            if not math.isfinite(float(np.sum(arr))):
                raise CheckpointError(f"non-finite values for {name}")
            t.data = arr.copy()


def init_params(config: ModelConfig, rng: np.random.Generator) -> VcnParams:
    """Draw all weights (fixed order, so one seed pins every value)."""
    column = col.init_column_params(
        rng,
        d_x=config.d_x,
        d_h=config.d_h,
        n_edge_types=config.n_edge_types,
        d_v=config.d_v if config.virtual else None,
        reset_gate=config.reset_gate,
    )
    virtual = None
    if config.virtual:
        virtual = VirtualParams(
            proj_w=col.glorot(rng, config.d_v, config.d_g, "virtual.proj.w"),
            proj_b=col.zeros_param(config.d_v, "virtual.proj.b"),
            cand_w=col.glorot(rng, config.d_v, config.d_v, "virtual.cand.w"),
            cand_u=col.glorot(rng, config.d_v, config.d_h, "virtual.cand.u"),
            cand_b=col.zeros_param(config.d_v, "virtual.cand.b"),
        )
        if config.virtual_gate:
            virtual.gate_w = col.glorot(rng, config.d_v, config.d_v, "virtual.gate.w")
            virtual.gate_u = col.glorot(rng, config.d_v, config.d_h, "virtual.gate.u")
            virtual.gate_b = col.zeros_param(config.d_v, "virtual.gate.b")
    head_in = config.readout_dim
    hidden_w = hidden_b = None
    if config.head_hidden > 0:
        hidden_w = col.glorot(rng, config.head_hidden, head_in, "head.hidden.w")
        hidden_b = col.zeros_param(config.head_hidden, "head.hidden.b")
        head_in = config.head_hidden
    head = HeadParams(
        out_w=ad.parameter(col.glorot(rng, 1, head_in, "head.out.w").data[0], "head.out.w"),
        out_b=ad.parameter(np.zeros(()), "head.out.b"),
        hidden_w=hidden_w,
        hidden_b=hidden_b,
    )
    return VcnParams(column=column, virtual=virtual, head=head)


def virtual_step(
    h0_prev: Tensor,
    state: ColumnState,
    vparams: VirtualParams,
    tape: Tape | None = None,
    activation=ad.relu,
) -> Tensor:
    """One update of the virtual column from the previous node states.

    The aggregation averages the n real node states only (the virtual state
    enters through its own recurrence matrix, not the mean), so graphs of
    different sizes feed the same parameters a same-scale signal.
    """
    m = ad.mean_rows(state.h, tape)
    pre = ad.affine(vparams.cand_w, h0_prev, None, tape)
    pre = ad.add(pre, ad.matvec(vparams.cand_u, m, tape), tape)
    pre = ad.add(pre, vparams.cand_b, tape)
    cand = activation(pre, tape)
    if not vparams.gated:
        return cand
    gpre = ad.affine(vparams.gate_w, h0_prev, None, tape)
    gpre = ad.add(gpre, ad.matvec(vparams.gate_u, m, tape), tape)
    gpre = ad.add(gpre, vparams.gate_b, tape)
    alpha = ad.sigmoid(gpre, tape)
    return ad.lerp(h0_prev, cand, alpha, tape)


@dataclass
class ForwardResult:
    score: Tensor            # scalar in (0, 1)
    readout: Tensor          # vector the head consumed (pre-dropout)
    states: Tensor           # (n, d_h) final node states
    virtual_state: Tensor | None
    tape: Tape | None

    @property
    def score_value(self) -> float:
        return float(self.score.data)


class VirtualColumnNet:
    """Config plus parameters, with the forward pass and persistence.

    Construct fresh with a seeded ``rng`` or from loaded parameters. The
    forward pass never mutates the model; training mutates parameter data
    in place through the optimizer.
    """

    def __init__(self, config: ModelConfig, params: VcnParams | None = None,
                 rng: np.random.Generator | None = None):
        if params is None:
            if rng is None:
                raise ConfigError("need an rng to initialize parameters")
            params = init_params(config, rng)
        self.config = config
        self.params = params

    # -- forward ---------------------------------------------------------

    def _check_graph(self, g: Graph) -> None:
        if g.attr_dim != self.config.d_x:
            raise DataError(f"graph attr width {g.attr_dim} != model d_x {self.config.d_x}")
        if g.n_edge_types != self.config.n_edge_types:
            raise DataError(
                f"graph declares {g.n_edge_types} edge types, model has {self.config.n_edge_types}"
            )

    def forward(self, g: Graph | AugmentedGraph, training: bool = False,
                rng: np.random.Generator | None = None,
                with_tape: bool | None = None) -> ForwardResult:
        """Score one graph; returns the tape when recording.

        ``training=True`` activates dropout (an rng is then required if the
        configured rate is positive). By default a tape is recorded only
        when training.
        """
        cfg = self.config
        if isinstance(g, AugmentedGraph):
            ag, g = g, g.base
        else:
            ag = augment(g, cfg.d_g) if cfg.virtual else None
        self._check_graph(g)
        if with_tape is None:
            with_tape = training
        tape = Tape() if with_tape else None
        act = col.ACTIVATIONS[cfg.activation]
        drop = cfg.dropout if training else 0.0
        if drop > 0.0 and rng is None:
            raise ConfigError("dropout needs an rng during training")

        index = build_neighbor_index(g)
        state = col.init_states(g, self.params.column, tape)
        h0 = None
        if cfg.virtual:
            assert ag is not None
            if ag.virtual_input.shape[0] != cfg.d_g:
                raise DataError(
                    f"virtual input width {ag.virtual_input.shape[0]} != model d_g {cfg.d_g}"
                )
            x0 = ad.constant(ag.virtual_input)
            h0 = ad.affine(self.params.virtual.proj_w, x0, self.params.virtual.proj_b, tape)
        if drop > 0.0:
            state = ColumnState(h=_dropout(state.h, drop, rng, tape), t=state.t)
            if h0 is not None:
                h0 = _dropout(h0, drop, rng, tape)

        for _ in range(cfg.steps - 1):
            h0_next = virtual_step(h0, state, self.params.virtual, tape, act) if cfg.virtual else None
            state = col.cln_step(state, index, self.params.column, tape, act,
                                 h0_prev=h0 if cfg.virtual else None)
            h0 = h0_next

        r = h0 if cfg.readout == "virtual" else ad.mean_rows(state.h, tape)
        r_in = _dropout(r, drop, rng, tape) if drop > 0.0 else r
        head = self.params.head
        if head.hidden_w is not None:
            r_in = ad.relu(ad.affine(head.hidden_w, r_in, head.hidden_b, tape), tape)
        z = ad.add(ad.dot(head.out_w, r_in, tape), head.out_b, tape)
        score = ad.sigmoid(z, tape)
        return ForwardResult(score=score, readout=r, states=state.h, virtual_state=h0, tape=tape)

    def loss(self, g: Graph, training: bool = False,
             rng: np.random.Generator | None = None) -> tuple[Tensor, Tape | None]:
        if g.label is None:
            raise DataError("graph has no label, cannot compute a loss")
        res = self.forward(g, training=training, rng=rng, with_tape=True)
        return ad.bce_loss(res.score, g.label, res.tape), res.tape

    def score(self, g: Graph | AugmentedGraph) -> float:
        return self.forward(g).score_value

    def score_many(self, graphs, threads: int = 1) -> np.ndarray:
        """Scores in input order; thread count never changes the values."""
        if threads <= 1:
            return np.array([self.score(g) for g in graphs])
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(self.score, graphs)))

    # -- parameter access --------------------------------------------------

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return self.params.named()

    def n_parameters(self) -> int:
        return sum(t.data.size for _, t in self.named_parameters())


def _dropout(t: Tensor, rate: float, rng: np.random.Generator, tape: Tape | None) -> Tensor:
    # Inverted scaling keeps expectations unchanged, so inference is identity.
    mask = (rng.random(t.data.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return ad.mul_const(t, mask, tape)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str | Path, model: VirtualColumnNet) -> None:
    """Write config + every named tensor to a flat JSON file (bit-exact)."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "tensors": {
            name: {"shape": list(t.data.shape), "values": t.data.ravel().tolist()}
            for name, t in model.named_parameters()
        },
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> VirtualColumnNet:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')!r}")
    try:
        config = ModelConfig(**payload["config"])
    except (KeyError, TypeError, ConfigError) as e:
        raise CheckpointError(f"bad checkpoint config: {e}") from e
    tensors = payload.get("tensors")
    if not isinstance(tensors, dict):
        raise CheckpointError("checkpoint has no tensor table")
    model = VirtualColumnNet(config, rng=np.random.default_rng(0))
    values: dict[str, np.ndarray] = {}
    for name, entry in tensors.items():
        try:
            arr = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointError(f"bad tensor entry {name!r}: {e}") from e
        values[name] = arr
    model.params.restore(values)
    return model
