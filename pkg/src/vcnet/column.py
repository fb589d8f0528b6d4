"""Gated column recurrence over the nodes of one graph.

Every node owns a column of states h_i^1..h_i^T, all columns share one
parameter set, and step t reads only step t-1 (synchronous update). A step
mixes three signals per node: its own previous state, one averaged context
vector per edge type (empty neighborhoods contribute an exact zero), and a
bias; a sigmoid highway gate with its own identically-shaped parameters
decides how much of the candidate replaces the previous state. An optional
reset gate rescales the self-recurrence inside the candidate.

``cln_step`` is the batched engine (states live in one (n, d_h) tensor);
``candidate``/``highway_step``/``node_step_with_virtual`` are the per-node
forms, bitwise interchangeable with the batched rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .errors import ConfigError
from .graphs import Graph, NeighborIndex

ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh}


def glorot(rng: np.random.Generator, out_dim: int, in_dim: int, name: str) -> Tensor:
    limit = math.sqrt(6.0 / (in_dim + out_dim))
    return ad.parameter(rng.uniform(-limit, limit, size=(out_dim, in_dim)), name)


def zeros_param(dim: int, name: str) -> Tensor:
    return ad.parameter(np.zeros(dim), name)


@dataclass
class ColumnParams:
    """Shared weights of the node columns.

    ``cand_u``/``gate_u``/``reset_u`` hold one matrix per edge type. The
    ``*_v`` matrices couple each node to the virtual column's state and are
    None for a plain column network. Reset-gate fields are None unless the
    variant is enabled.
    """

    proj_w: Tensor
    proj_b: Tensor
    cand_w: Tensor
    cand_u: tuple[Tensor, ...]
    cand_b: Tensor
    gate_w: Tensor
    gate_u: tuple[Tensor, ...]
    gate_b: Tensor
    cand_v: Tensor | None = None
    gate_v: Tensor | None = None
    reset_w: Tensor | None = None
    reset_u: tuple[Tensor, ...] | None = None
    reset_b: Tensor | None = None
    reset_v: Tensor | None = None

    @property
    def d_h(self) -> int:
        return self.cand_w.shape[0]

    @property
    def n_edge_types(self) -> int:
        return len(self.cand_u)

    @property
    def has_reset(self) -> bool:
        return self.reset_w is not None

    def named(self):
        for field_name in ("proj_w", "proj_b", "cand_w", "cand_b", "gate_w", "gate_b",
                           "cand_v", "gate_v", "reset_w", "reset_b", "reset_v"):
            t = getattr(self, field_name)
            if t is not None:
                yield t.name, t
        for group in ("cand_u", "gate_u", "reset_u"):
            mats = getattr(self, group)
            if mats is not None:
                for t in mats:
                    yield t.name, t


def init_column_params(
    rng: np.random.Generator,
    d_x: int,
    d_h: int,
    n_edge_types: int,
    d_v: int | None = None,
    reset_gate: bool = False,
    prefix: str = "node",
) -> ColumnParams:
    """Fresh parameters: uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.

    d_v, when given, sizes the virtual-coupling matrices; the parameter
    count depends only on the dimensions here, never on any graph.
    """

    def mats(tag: str) -> tuple[Tensor, ...]:
        return tuple(glorot(rng, d_h, d_h, f"{prefix}.{tag}.u{p}") for p in range(n_edge_types))

    def vmat(tag: str) -> Tensor | None:
        return None if d_v is None else glorot(rng, d_h, d_v, f"{prefix}.{tag}.v")

    params = ColumnParams(
        proj_w=glorot(rng, d_h, d_x, f"{prefix}.proj.w"),
        proj_b=zeros_param(d_h, f"{prefix}.proj.b"),
        cand_w=glorot(rng, d_h, d_h, f"{prefix}.cand.w"),
        cand_u=mats("cand"),
        cand_b=zeros_param(d_h, f"{prefix}.cand.b"),
        gate_w=glorot(rng, d_h, d_h, f"{prefix}.gate.w"),
        gate_u=mats("gate"),
        gate_b=zeros_param(d_h, f"{prefix}.gate.b"),
        cand_v=vmat("cand"),
        gate_v=vmat("gate"),
    )
    if reset_gate:
        params.reset_w = glorot(rng, d_h, d_h, f"{prefix}.reset.w")
        params.reset_u = mats("reset")
        params.reset_b = zeros_param(d_h, f"{prefix}.reset.b")
        params.reset_v = vmat("reset")
    return params


@dataclass
class ColumnState:
    """States of all node columns at one step: row i of h is node i."""

    h: Tensor  # (n, d_h)
    t: int


def init_states(g: Graph, params: ColumnParams, tape: Tape | None = None) -> ColumnState:
    """Step-1 states: each node's attributes through the shared input projection."""
    x = ad.constant(g.nodes)
    return ColumnState(h=ad.linear(x, params.proj_w, params.proj_b, tape), t=1)


def context(i: int, p: int, state: ColumnState, index: NeighborIndex, tape: Tape | None = None) -> Tensor:
    """Mean previous-step state over node i's in-neighbors of type p.

    The empty neighborhood yields an exact zero vector; a single neighbor
    yields that neighbor's state bit-for-bit.
    """
    idx = index.neighbors(i, p)
    if idx.size == 0:
        return ad.constant(np.zeros(state.h.shape[1]))
    return ad.mean_rows_subset(state.h, idx, tape)


def context_rows(p: int, state: ColumnState, index: NeighborIndex, tape: Tape | None = None) -> Tensor:
    """All nodes' type-p context vectors stacked into an (n, d_h) matrix."""
    return ad.stack_rows([context(i, p, state, index, tape) for i in range(index.n_nodes)], tape)


def _preact_rows(
    h: Tensor,
    ctx: list[Tensor],
    w: Tensor,
    u: tuple[Tensor, ...],
    b: Tensor,
    tape: Tape | None,
    v: Tensor | None = None,
    h0: Tensor | None = None,
) -> Tensor:
    pre = ad.linear(h, w, None, tape)
    for p, c in enumerate(ctx):
        pre = ad.add(pre, ad.linear(c, u[p], None, tape), tape)
    row = b
    if h0 is not None:
        if v is None:
            raise ConfigError("virtual state supplied but no coupling matrix in params")
        row = ad.add(b, ad.matvec(v, h0, tape), tape)
    return ad.add_row(pre, row, tape)


def _preact_node(
    h_i: Tensor,
    ctx_i: list[Tensor],
    w: Tensor,
    u: tuple[Tensor, ...],
    b: Tensor,
    tape: Tape | None,
    v: Tensor | None = None,
    h0: Tensor | None = None,
) -> Tensor:
    pre = ad.matvec(w, h_i, tape)
    for p, c in enumerate(ctx_i):
        pre = ad.add(pre, ad.matvec(u[p], c, tape), tape)
    row = b
    if h0 is not None:
        row = ad.add(b, ad.matvec(v, h0, tape), tape)
    return ad.add(pre, row, tape)


def candidate(
    i: int,
    state: ColumnState,
    contexts: list[Tensor],
    params: ColumnParams,
    tape: Tape | None = None,
    activation=ad.relu,
    reset: Tensor | None = None,
) -> Tensor:
    """Candidate next state of node i from its previous state and contexts.

    ``reset``, if given, multiplies the previous state inside the
    self-recurrence term only; contexts and bias are never reset-scaled.
    """
    h_i = ad.take_row(state.h, i, tape)
    if reset is not None:
        h_i = ad.mul(reset, h_i, tape)
    pre = _preact_node(h_i, contexts, params.cand_w, params.cand_u, params.cand_b, tape)
    return activation(pre, tape)


def highway_step(h_prev: Tensor, h_cand: Tensor, alpha: Tensor, tape: Tape | None = None) -> Tensor:
    """(1 - alpha) * h_prev + alpha * h_cand, elementwise."""
    return ad.lerp(h_prev, h_cand, alpha, tape)


def node_step_with_virtual(
    i: int,
    state: ColumnState,
    h0_prev: Tensor,
    contexts: list[Tensor],
    params: ColumnParams,
    tape: Tape | None = None,
    activation=ad.relu,
) -> Tensor:
    """Full gated update of node i with the virtual state broadcast in.

    Candidate and gate both read the same inputs (previous state, shared
    contexts, h0_prev) through their own weights; with the coupling matrices
    zeroed this reduces exactly to the plain column update.
    """
    if params.cand_v is None or params.gate_v is None:
        raise ConfigError("node step with virtual state needs coupling matrices in params")
    h_i = ad.take_row(state.h, i, tape)
    cand_in = h_i
    if params.has_reset:
        r = ad.sigmoid(
            _preact_node(h_i, contexts, params.reset_w, params.reset_u, params.reset_b,
                         tape, params.reset_v, h0_prev),
            tape,
        )
        cand_in = ad.mul(r, h_i, tape)
    pre = ad.matvec(params.cand_w, cand_in, tape)
    for p, c in enumerate(contexts):
        pre = ad.add(pre, ad.matvec(params.cand_u[p], c, tape), tape)
    pre = ad.add(pre, ad.add(params.cand_b, ad.matvec(params.cand_v, h0_prev, tape), tape), tape)
    cand = activation(pre, tape)
    alpha = ad.sigmoid(
        _preact_node(h_i, contexts, params.gate_w, params.gate_u, params.gate_b,
                     tape, params.gate_v, h0_prev),
        tape,
    )
    return highway_step(h_i, cand, alpha, tape)


def cln_step(
    state: ColumnState,
    index: NeighborIndex,
    params: ColumnParams,
    tape: Tape | None = None,
    activation=ad.relu,
    h0_prev: Tensor | None = None,
) -> ColumnState:
    """One synchronous update of every node column.

    All reads are from ``state`` (step t-1); no node sees another node's
    step-t value. Candidate and highway gate share the context vectors.
    When ``h0_prev`` is given its broadcast term joins every node's
    candidate, gate, and (if present) reset preactivations.
    """
    if h0_prev is not None and (params.cand_v is None or params.gate_v is None):
        raise ConfigError("virtual state supplied but no coupling matrices in params")
    h = state.h
    ctx = [context_rows(p, state, index, tape) for p in range(params.n_edge_types)]
    cand_in = h
    if params.has_reset:
        r = ad.sigmoid(
            _preact_rows(h, ctx, params.reset_w, params.reset_u, params.reset_b,
                         tape, params.reset_v, h0_prev),
            tape,
        )
        cand_in = ad.mul(r, h, tape)
    pre = ad.linear(cand_in, params.cand_w, None, tape)
    for p, c in enumerate(ctx):
        pre = ad.add(pre, ad.linear(c, params.cand_u[p], None, tape), tape)
    row = params.cand_b
    if h0_prev is not None:
        row = ad.add(params.cand_b, ad.matvec(params.cand_v, h0_prev, tape), tape)
    cand = activation(ad.add_row(pre, row, tape), tape)
    alpha = ad.sigmoid(
        _preact_rows(h, ctx, params.gate_w, params.gate_u, params.gate_b,
                     tape, params.gate_v, h0_prev),
        tape,
    )
    return ColumnState(h=ad.lerp(h, cand, alpha, tape), t=state.t + 1)
