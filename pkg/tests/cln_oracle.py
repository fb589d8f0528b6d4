"""Straight-line reimplementation of a plain gated column network.

Kept deliberately naive (python loops, numpy matmul, np.mean) and separate
from the package internals, so tests can hold the real code against it.
Mean-pool readout with an affine sigmoid head, no virtual column, no reset.
"""

import numpy as np


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def plain_cln_states(nodes, edges, n_edge_types, w, steps, activation="relu"):
    """Final (n, d_h) node states after steps - 1 synchronous updates."""
    act = (lambda z: np.maximum(z, 0.0)) if activation == "relu" else np.tanh
    n = nodes.shape[0]
    h = nodes @ w["proj_w"].T + w["proj_b"]
    for _ in range(steps - 1):
        new_h = np.empty_like(h)
        for i in range(n):
            pre_c = w["cand_w"] @ h[i] + w["cand_b"]
            pre_g = w["gate_w"] @ h[i] + w["gate_b"]
            for p in range(n_edge_types):
                nbrs = [s for (s, d, q) in edges if d == i and q == p]
                if nbrs:
                    c = np.mean([h[s] for s in nbrs], axis=0)
                    pre_c = pre_c + w["cand_u"][p] @ c
                    pre_g = pre_g + w["gate_u"][p] @ c
            cand = act(pre_c)
            alpha = sigmoid(pre_g)
            new_h[i] = (1.0 - alpha) * h[i] + alpha * cand
        h = new_h
    return h


def plain_cln_score(nodes, edges, n_edge_types, w, steps, activation="relu"):
    h = plain_cln_states(nodes, edges, n_edge_types, w, steps, activation)
    pooled = h.mean(axis=0)
    return float(sigmoid(w["out_w"] @ pooled + float(w["out_b"])))


def column_weights(model):
    """Plain arrays for the oracle, lifted out of a trained or fresh model."""
    c = model.params.column
    return {
        "proj_w": c.proj_w.data,
        "proj_b": c.proj_b.data,
        "cand_w": c.cand_w.data,
        "cand_u": [u.data for u in c.cand_u],
        "cand_b": c.cand_b.data,
        "gate_w": c.gate_w.data,
        "gate_u": [u.data for u in c.gate_u],
        "gate_b": c.gate_b.data,
        "out_w": model.params.head.out_w.data,
        "out_b": model.params.head.out_b.data,
    }
