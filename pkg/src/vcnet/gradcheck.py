"""End-to-end gradient verification against central finite differences.

Builds small random graphs, cycles through model variants (both readouts,
reset gate on and off, gated and ungated virtual column, hidden head,
graph-level inputs, both activations), and compares every parameter's
analytic gradient of the BCE loss with a two-sided difference quotient.
The difference oracle only ever calls tape-free forwards, so it shares no
code path with the reverse pass it is judging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graphs import Graph
from .model import ModelConfig, VirtualColumnNet

DEFAULT_TOL = 1e-4
# elements below this magnitude are compared absolutely, via the denominator floor
_REL_FLOOR = 1e-6


def random_graph(rng: np.random.Generator, min_nodes: int = 3, max_nodes: int = 10,
                 max_edge_types: int = 3, d_x: int = 3, with_graph_attrs: bool = False,
                 d_g: int = 2) -> Graph:
    """Random directed multigraph with normal attributes, possibly edgeless nodes."""
    n = int(rng.integers(min_nodes, max_nodes + 1))
    n_types = int(rng.integers(1, max_edge_types + 1))
    edges = []
    for p in range(n_types):
        for i in range(n):
            for j in range(n):
                if i != j and rng.random() < 0.25:
                    edges.append((i, j, p))
    return Graph(
        nodes=rng.normal(size=(n, d_x)),
        edges=tuple(edges),
        n_edge_types=n_types,
        graph_attrs=rng.normal(size=d_g) if with_graph_attrs else None,
        label=int(rng.integers(2)),
    )


def _variants() -> list[dict]:
    return [
        {"readout": "virtual", "d_h": 4, "d_v": 4},
        {"readout": "mean", "d_h": 8, "d_v": 4},
        {"readout": "virtual", "d_h": 8, "d_v": 8, "reset_gate": True},
        {"readout": "virtual", "d_h": 4, "d_v": 8, "virtual_gate": False},
        {"readout": "mean", "d_h": 4, "d_v": 4, "virtual": False, "reset_gate": True},
        {"readout": "virtual", "d_h": 8, "d_v": 4, "head_hidden": 5},
        {"readout": "virtual", "d_h": 4, "d_v": 4, "activation": "tanh"},
        {"readout": "mean", "d_h": 8, "d_v": 8, "head_hidden": 3, "reset_gate": True},
    ]


@dataclass
class GradCheckReport:
    max_rel_err: float
    worst: str
    n_graphs: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def gradient_check(seed: int = 0, n_graphs: int = 20, tol: float = DEFAULT_TOL,
                   h: float = 1e-5, steps: int = 3) -> GradCheckReport:
    """Compare reverse-mode gradients with central differences (step h).

    Relative error uses max(|analytic|, |numeric|, 1e-6) as denominator so
    near-zero pairs are judged on absolute agreement.
    """
    rng = np.random.default_rng(seed)
    variants = _variants()
    worst_err = 0.0
    worst_name = "none"
    for gi in range(n_graphs):
        cfg_kw = variants[gi % len(variants)]
        with_ga = gi % 3 == 0 and cfg_kw.get("virtual", True)
        g = random_graph(rng, with_graph_attrs=with_ga)
        config = ModelConfig(d_x=g.attr_dim, n_edge_types=g.n_edge_types,
                             d_g=2 if with_ga else None, steps=steps, **cfg_kw)
        model = VirtualColumnNet(config, rng=np.random.default_rng(seed + 1000 + gi))
        y = g.label

        loss, tape = model.loss(g)
        grads = ad.backward(tape, loss)

        def loss_value() -> float:
            res = model.forward(g, with_tape=False)
            return float(ad.bce_loss(res.score, y).data)

        named = model.named_parameters()
        numeric = ad.finite_difference(loss_value, [p for _, p in named], h=h)
        for (name, p), fd in zip(named, numeric):
            an = grads.of(p)
            denom = np.maximum(np.maximum(np.abs(an), np.abs(fd)), _REL_FLOOR)
            rel = np.abs(an - fd) / denom
            k = int(np.argmax(rel))
            if rel.flat[k] > worst_err:
                worst_err = float(rel.flat[k])
                worst_name = f"graph {gi}, {name}[{np.unravel_index(k, p.data.shape)}]"
    return GradCheckReport(max_rel_err=worst_err, worst=worst_name, n_graphs=n_graphs, tol=tol)
