"""Reverse-mode automatic differentiation on a flat float64 tape.

Ops are free functions over :class:`Tensor`. Each op computes its value
eagerly with numpy and, when handed a :class:`Tape`, appends one record that
knows how to push adjoints back to the op's inputs. ``backward`` replays the
records once in exact reverse order; a tensor used several times (tied
parameters, shared states) accumulates the sum of all its adjoints.

Two choices here exist purely for reproducibility:

* Matrix contractions use ``np.einsum`` with its default non-optimized path,
  whose inner loop sums the contracted axis in ascending index order. Row i
  of a batched product therefore depends bit-for-bit only on row i of the
  input, never on how many other rows there are or where they sit.
* Reductions over interchangeable rows (``mean_of``, ``mean_rows``,
  ``mean_rows_subset``) sort their addends per component before summing, so
  the result is bitwise identical for any ordering of the same multiset.

Any NaN or Inf in a value or an adjoint raises :class:`NumericError`
immediately rather than propagating silently.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericError

__all__ = [
    "Tensor",
    "Tape",
    "Gradients",
    "constant",
    "parameter",
    "add",
    "sub",
    "mul",
    "mul_const",
    "scale",
    "add_row",
    "matvec",
    "affine",
    "linear",
    "relu",
    "sigmoid",
    "tanh",
    "mean_of",
    "mean_rows",
    "mean_rows_subset",
    "stack_rows",
    "take_row",
    "lerp",
    "dot",
    "bce_loss",
    "backward",
    "finite_difference",
]


def _ensure_finite(arr: np.ndarray, what: str) -> None:
    # Single-pass screen: any NaN poisons the sum, any Inf survives it.
    total = float(np.sum(arr))
    if not math.isfinite(total):
        raise NumericError(f"non-finite values in {what}")


class Tensor:
    """Dumb value holder: a float64 array, an optional name, a const flag.

    ``const`` marks tensors that never need gradients (inputs, dropout
    masks); ops skip recording when every input is const. ``grad`` is a
    plain accumulator written by the training loop, not by ``backward``.
    """

    __slots__ = ("data", "grad", "const", "name")

    def __init__(self, data, *, const: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        _ensure_finite(arr, name or "tensor")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.const = const
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        tag = self.name or ("const" if self.const else "tensor")
        return f"Tensor({tag}, shape={self.data.shape})"


def constant(data) -> Tensor:
    return Tensor(data, const=True)


def parameter(data, name: str) -> Tensor:
    return Tensor(data, name=name)


class Tape:
    """Ordered record of ops; reverse replay yields all adjoints."""

    __slots__ = ("_records",)

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __len__(self) -> int:
        return len(self._records)


def _emit(tape: Tape | None, out_data: np.ndarray, ins: tuple[Tensor, ...], vjp, what: str) -> Tensor:
    _ensure_finite(out_data, what)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out.name = None
    out.const = tape is None or all(t.const for t in ins)
    if not out.const:
        tape._records.append((out, ins, vjp))
    return out


# ---------------------------------------------------------------------------
# elementwise and affine ops


def add(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add: shape mismatch {a.data.shape} vs {b.data.shape}")
    return _emit(tape, a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"sub: shape mismatch {a.data.shape} vs {b.data.shape}")
    return _emit(tape, a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul: shape mismatch {a.data.shape} vs {b.data.shape}")
    da, db = a.data, b.data
    return _emit(tape, da * db, (a, b), lambda g: (g * db, g * da), "mul")


def mul_const(x: Tensor, arr: np.ndarray, tape: Tape | None = None) -> Tensor:
    """Elementwise product with a fixed array (dropout masks and the like)."""
    arr = np.asarray(arr, dtype=np.float64)
    return _emit(tape, x.data * arr, (x,), lambda g: (g * arr,), "mul_const")


def scale(x: Tensor, c: float, tape: Tape | None = None) -> Tensor:
    c = float(c)
    return _emit(tape, x.data * c, (x,), lambda g: (g * c,), "scale")


def add_row(x: Tensor, v: Tensor, tape: Tape | None = None) -> Tensor:
    """Add a length-m vector to every row of an (n, m) matrix."""
    if x.data.ndim != 2 or v.data.ndim != 1 or x.data.shape[1] != v.data.shape[0]:
        raise ValueError(f"add_row: incompatible shapes {x.data.shape} and {v.data.shape}")
    return _emit(tape, x.data + v.data[None, :], (x, v), lambda g: (g, g.sum(axis=0)), "add_row")


def affine(w: Tensor, x: Tensor, b: Tensor | None = None, tape: Tape | None = None) -> Tensor:
    """w @ x (+ b) for a (m, k) matrix and a length-k vector."""
    if w.data.ndim != 2 or x.data.ndim != 1 or w.data.shape[1] != x.data.shape[0]:
        raise ValueError(f"affine: incompatible shapes {w.data.shape} and {x.data.shape}")
    wd, xd = w.data, x.data
    out = np.einsum("ij,j->i", wd, xd)
    if b is None:
        return _emit(tape, out, (w, x), lambda g: (np.outer(g, xd), np.einsum("ij,i->j", wd, g)), "affine")
    if b.data.shape != out.shape:
        raise ValueError(f"affine: bias shape {b.data.shape} does not match output {out.shape}")
    return _emit(
        tape,
        out + b.data,
        (w, x, b),
        lambda g: (np.outer(g, xd), np.einsum("ij,i->j", wd, g), g),
        "affine",
    )


def matvec(w: Tensor, x: Tensor, tape: Tape | None = None) -> Tensor:
    """Matrix-vector product without bias."""
    return affine(w, x, None, tape)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None, tape: Tape | None = None) -> Tensor:
    """Row-batched affine map: (n, k) @ (m, k)^T (+ b) -> (n, m).

    Row i of the output is bitwise identical to ``affine(w, row_i, b)``; the
    batch dimension never enters any summation.
    """
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ValueError(f"linear: incompatible shapes {x.data.shape} and {w.data.shape}")
    xd, wd = x.data, w.data
    out = np.einsum("ij,kj->ik", xd, wd)
    if b is None:
        return _emit(
            tape,
            out,
            (x, w),
            lambda g: (np.einsum("ik,kj->ij", g, wd), np.einsum("ik,ij->kj", g, xd)),
            "linear",
        )
    if b.data.ndim != 1 or b.data.shape[0] != wd.shape[0]:
        raise ValueError(f"linear: bias shape {b.data.shape} does not match output dim {wd.shape[0]}")
    return _emit(
        tape,
        out + b.data[None, :],
        (x, w, b),
        lambda g: (np.einsum("ik,kj->ij", g, wd), np.einsum("ik,ij->kj", g, xd), g.sum(axis=0)),
        "linear",
    )


# ---------------------------------------------------------------------------
# nonlinearities


def relu(x: Tensor, tape: Tape | None = None) -> Tensor:
    xd = x.data
    return _emit(tape, np.maximum(xd, 0.0), (x,), lambda g: (np.where(xd > 0.0, g, 0.0),), "relu")


def sigmoid(x: Tensor, tape: Tape | None = None) -> Tensor:
    # Clipping at +-709 keeps exp() finite; the output saturates to exact
    # 0.0/1.0 long before the clip can bias anything.
    out = 1.0 / (1.0 + np.exp(-np.clip(x.data, -709.0, 709.0)))
    return _emit(tape, out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(x: Tensor, tape: Tape | None = None) -> Tensor:
    out = np.tanh(x.data)
    return _emit(tape, out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


# ---------------------------------------------------------------------------
# order-canonical reductions and row plumbing


def _sorted_colsum(rows: np.ndarray) -> np.ndarray:
    # Sorting each column first makes the sum a function of the multiset of
    # rows, not of their order.
    return np.sort(rows, axis=0).sum(axis=0)


def mean_of(vectors: list[Tensor], tape: Tape | None = None) -> Tensor:
    """Componentwise mean of equal-length vectors; order of the list is irrelevant down to the last bit."""
    if not vectors:
        raise ValueError("mean_of: empty list")
    k = len(vectors)
    rows = np.stack([v.data for v in vectors])
    if rows.ndim != 2:
        raise ValueError("mean_of: expects 1-d tensors of equal length")
    out = _sorted_colsum(rows) / k

    def vjp(g):
        share = g / k
        return tuple(share for _ in range(k))

    return _emit(tape, out, tuple(vectors), vjp, "mean_of")


def mean_rows(x: Tensor, tape: Tape | None = None) -> Tensor:
    """Mean over the rows of an (n, m) matrix, order-canonical."""
    if x.data.ndim != 2:
        raise ValueError("mean_rows: expects a matrix")
    n = x.data.shape[0]
    out = _sorted_colsum(x.data) / n
    return _emit(tape, out, (x,), lambda g: (np.broadcast_to(g / n, x.data.shape),), "mean_rows")


def mean_rows_subset(x: Tensor, idx: np.ndarray, tape: Tape | None = None) -> Tensor:
    """Mean over a non-empty multiset of rows of x; duplicate indices count twice."""
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("mean_rows_subset: empty index set")
    m = idx.size
    out = _sorted_colsum(x.data[idx]) / m

    def vjp(g):
        dx = np.zeros_like(x.data)
        np.add.at(dx, idx, g / m)
        return (dx,)

    return _emit(tape, out, (x,), vjp, "mean_rows_subset")


def stack_rows(vectors: list[Tensor], tape: Tape | None = None) -> Tensor:
    """Stack n equal-length vectors into an (n, m) matrix."""
    if not vectors:
        raise ValueError("stack_rows: empty list")
    out = np.stack([v.data for v in vectors])

    def vjp(g):
        return tuple(g[i] for i in range(len(vectors)))

    return _emit(tape, out, tuple(vectors), vjp, "stack_rows")


def take_row(x: Tensor, i: int, tape: Tape | None = None) -> Tensor:
    """Extract row i of a matrix as a vector."""
    if x.data.ndim != 2:
        raise ValueError("take_row: expects a matrix")
    n = x.data.shape[0]
    if not 0 <= i < n:
        raise ValueError(f"take_row: row {i} out of range for {n} rows")
    out = x.data[i].copy()

    def vjp(g):
        dx = np.zeros_like(x.data)
        dx[i] = g
        return (dx,)

    return _emit(tape, out, (x,), vjp, "take_row")


def lerp(a: Tensor, b: Tensor, w: Tensor, tape: Tape | None = None) -> Tensor:
    """Elementwise gated blend (1 - w) * a + w * b."""
    if not (a.data.shape == b.data.shape == w.data.shape):
        raise ValueError("lerp: operands must share a shape")
    ad, bd, wd = a.data, b.data, w.data
    out = ad + wd * (bd - ad)
    return _emit(tape, out, (a, b, w), lambda g: (g * (1.0 - wd), g * wd, g * (bd - ad)), "lerp")


def dot(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Inner product of two vectors, returned as a scalar tensor."""
    if a.data.ndim != 1 or a.data.shape != b.data.shape:
        raise ValueError("dot: expects two vectors of equal length")
    ad, bd = a.data, b.data
    out = np.asarray(np.einsum("i,i->", ad, bd))
    return _emit(tape, out, (a, b), lambda g: (g * bd, g * ad), "dot")


# ---------------------------------------------------------------------------
# loss


_BCE_EPS = 1e-12


def bce_loss(score: Tensor, y: int, tape: Tape | None = None) -> Tensor:
    """Binary cross-entropy of a probability score against a 0/1 label.

    The score is clamped into [1e-12, 1 - 1e-12] before the logs; inside the
    clamped region the loss is constant, so its derivative there is zero.
    """
    if score.data.shape != ():
        raise ValueError("bce_loss: score must be a scalar tensor")
    if y not in (0, 1):
        raise ValueError(f"bce_loss: label must be 0 or 1, got {y!r}")
    s = float(score.data)
    sc = min(max(s, _BCE_EPS), 1.0 - _BCE_EPS)
    clamped = sc != s
    out = np.asarray(-math.log(sc) if y == 1 else -math.log(1.0 - sc))

    def vjp(g):
        if clamped:
            return (np.zeros(()),)
        d = (1.0 - y) / (1.0 - sc) - y / sc
        return (g * d,)

    return _emit(tape, out, (score,), vjp, "bce_loss")


# ---------------------------------------------------------------------------
# reverse pass


class Gradients:
    """Adjoints of the leaf tensors reached by one backward pass."""

    __slots__ = ("_adj", "_refs")

    def __init__(self, adj: dict[int, np.ndarray], refs: dict[int, Tensor]):
        self._adj = adj
        self._refs = refs  # pins tensors alive so ids stay unambiguous

    def of(self, t: Tensor) -> np.ndarray:
        """Gradient w.r.t. t; zeros if no path from the loss reached it."""
        g = self._adj.get(id(t))
        return np.zeros_like(t.data) if g is None else g


def backward(tape: Tape, loss: Tensor, seed: float = 1.0) -> Gradients:
    """Replay the tape in reverse from a scalar loss.

    Gradients for every non-const leaf accumulate additively across all the
    places the leaf was used, which is exactly what shared (tied) parameters
    require. ``seed`` scales the whole pass; batching uses seed = 1/B to get
    mean-loss gradients without a second traversal.
    """
    if loss.data.shape != ():
        raise ValueError("backward: loss must be a scalar tensor")
    adj: dict[int, np.ndarray] = {id(loss): np.asarray(float(seed))}
    refs: dict[int, Tensor] = {id(loss): loss}
    for out, ins, vjp in reversed(tape._records):
        g = adj.pop(id(out), None)
        refs.pop(id(out), None)
        if g is None:
            continue
        _ensure_finite(g, "adjoint")
        for t, gt in zip(ins, vjp(g)):
            if t.const or gt is None:
                continue
            prev = adj.get(id(t))
            adj[id(t)] = gt if prev is None else prev + gt
            refs[id(t)] = t
    for key, g in adj.items():
        _ensure_finite(g, f"gradient of {refs[key].name or 'leaf'}")
    return Gradients(adj, refs)


# ---------------------------------------------------------------------------
# independent numerical oracle


def finite_difference(loss_fn, tensors: list[Tensor], h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradients of a tape-free scalar function.

    ``loss_fn`` is called with no arguments and must return a float computed
    from the current contents of ``tensors``; entries are perturbed in place
    and restored. This never touches the tape machinery, so it can vouch
    for it.
    """
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.ravel()
        gflat = g.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = loss_fn()
            flat[k] = orig - h
            fm = loss_fn()
            flat[k] = orig
            gflat[k] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads
