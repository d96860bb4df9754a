"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tensor` wraps a numpy array plus the closure that routes its
upstream gradient to its parents. Graphs are built per forward pass and
freed afterwards; ``backward`` walks the graph in reverse topological
order. Only the operations the ranking model needs are provided.

Conventions fixed here (they matter for gradient checking):
  * ReLU gradient at exactly 0 is 0.
  * Max pooling breaks ties by lowest index.
  * Cosine of a zero-norm vector is 0 with zero gradient; such cells are
    reported invalid so pooling can exclude them.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class Tensor:
    """Node in the computation graph: a value, a gradient slot, parents."""

    __slots__ = ("value", "grad", "parents", "_backward")

    def __init__(
        self,
        value: Array,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[Array], None] | None = None,
        grad_buffer: Array | None = None,
    ):
        self.value = value
        self.grad = grad_buffer  # lazily allocated unless a buffer is shared in
        self.parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def backward(self) -> None:
        """Backpropagate from this (scalar) tensor through the graph."""
        if self.value.ndim != 0:
            raise ValueError("backward() requires a scalar tensor")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.value))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def constant(value) -> Tensor:
    """Leaf with no gradient flow."""
    return Tensor(np.asarray(value, dtype=np.float64))


def leaf(value: Array, grad_buffer: Array | None = None) -> Tensor:
    """Trainable leaf; gradients accumulate into ``grad_buffer`` if given."""
    return Tensor(value, grad_buffer=grad_buffer)


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise a + b; b may broadcast as a row vector or scalar."""
    val = a.value + b.value

    def bw(g: Array) -> None:
        a._accumulate(g if g.shape == a.value.shape else np.broadcast_to(g, a.value.shape).copy())
        if b.value.shape == g.shape:
            b._accumulate(g)
        elif b.value.ndim == 0:
            b._accumulate(g.sum())
        else:  # row-vector bias under a 2-D output
            b._accumulate(g.sum(axis=0))

    return Tensor(val, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    val = a.value - b.value

    def bw(g: Array) -> None:
        a._accumulate(g)
        if b.value.ndim == 0 and g.ndim > 0:
            b._accumulate(-g.sum())
        else:
            b._accumulate(-g)

    return Tensor(val, (a, b), bw)


def add_scalar(a: Tensor, c: float) -> Tensor:
    def bw(g: Array) -> None:
        a._accumulate(g)

    return Tensor(a.value + c, (a,), bw)


def scale(a: Tensor, c: float) -> Tensor:
    def bw(g: Array) -> None:
        a._accumulate(g * c)

    return Tensor(a.value * c, (a,), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    val = a.value * b.value

    def bw(g: Array) -> None:
        a._accumulate(g * b.value)
        b._accumulate(g * a.value)

    return Tensor(val, (a, b), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D @ 2-D."""
    val = a.value @ b.value

    def bw(g: Array) -> None:
        a._accumulate(g @ b.value.T)
        b._accumulate(a.value.T @ g)

    return Tensor(val, (a, b), bw)


def matvec(a: Tensor, x: Tensor) -> Tensor:
    """(n, m) @ (m,) -> (n,)."""
    val = a.value @ x.value

    def bw(g: Array) -> None:
        a._accumulate(np.outer(g, x.value))
        x._accumulate(a.value.T @ g)

    return Tensor(val, (a, x), bw)


def vecmat(x: Tensor, a: Tensor) -> Tensor:
    """(n,) @ (n, m) -> (m,)."""
    val = x.value @ a.value

    def bw(g: Array) -> None:
        x._accumulate(a.value @ g)
        a._accumulate(np.outer(x.value, g))

    return Tensor(val, (x, a), bw)


def dot(x: Tensor, y: Tensor) -> Tensor:
    val = np.asarray(x.value @ y.value)

    def bw(g: Array) -> None:
        x._accumulate(g * y.value)
        y._accumulate(g * x.value)

    return Tensor(val, (x, y), bw)


def transpose(a: Tensor) -> Tensor:
    def bw(g: Array) -> None:
        a._accumulate(g.T)

    return Tensor(a.value.T, (a,), bw)


# ---------------------------------------------------------------------------
# elementwise nonlinearities


def relu(a: Tensor) -> Tensor:
    keep = a.value > 0.0

    def bw(g: Array) -> None:
        a._accumulate(np.where(keep, g, 0.0))

    return Tensor(np.where(keep, a.value, 0.0), (a,), bw)


def tanh(a: Tensor) -> Tensor:
    val = np.tanh(a.value)

    def bw(g: Array) -> None:
        a._accumulate(g * (1.0 - val * val))

    return Tensor(val, (a,), bw)


def exp(a: Tensor) -> Tensor:
    val = np.exp(a.value)

    def bw(g: Array) -> None:
        a._accumulate(g * val)

    return Tensor(val, (a,), bw)


def log(a: Tensor) -> Tensor:
    def bw(g: Array) -> None:
        a._accumulate(g / a.value)

    return Tensor(np.log(a.value), (a,), bw)


def softmax1d(a: Tensor) -> Tensor:
    shifted = a.value - a.value.max()
    e = np.exp(shifted)
    val = e / e.sum()

    def bw(g: Array) -> None:
        a._accumulate(val * (g - (g * val).sum()))

    return Tensor(val, (a,), bw)


# ---------------------------------------------------------------------------
# reductions and reshaping


def sum_all(a: Tensor) -> Tensor:
    def bw(g: Array) -> None:
        a._accumulate(np.full_like(a.value, float(g)))

    return Tensor(np.asarray(a.value.sum()), (a,), bw)


def sum_rows(a: Tensor) -> Tensor:
    """Sum a 2-D tensor over axis 0."""

    def bw(g: Array) -> None:
        a._accumulate(np.broadcast_to(g, a.value.shape).copy())

    return Tensor(a.value.sum(axis=0), (a,), bw)


def max_rows(a: Tensor) -> Tensor:
    """Column-wise max of a 2-D tensor; ties go to the lowest row index."""
    idx = np.argmax(a.value, axis=0)
    cols = np.arange(a.value.shape[1])

    def bw(g: Array) -> None:
        out = np.zeros_like(a.value)
        out[idx, cols] = g
        a._accumulate(out)

    return Tensor(a.value[idx, cols], (a,), bw)


def gather(table: Tensor, ids: Array) -> Tensor:
    """Row lookup (len(ids), L); gradients scatter-add back into the table."""
    ids = np.asarray(ids, dtype=np.intp)
    val = table.value[ids]

    def bw(g: Array) -> None:
        if table.grad is None:
            table.grad = np.zeros_like(table.value)
        np.add.at(table.grad, ids, g)

    return Tensor(val, (table,), bw)


def windows(a: Tensor, h: int) -> Tensor:
    """Stack sliding windows of ``h`` consecutive rows, flattened per window.

    (n, L) -> (n - h + 1, h * L); caller guarantees n >= h.
    """
    n, width = a.value.shape
    nw = n - h + 1
    val = np.empty((nw, h * width))
    for r in range(h):
        val[:, r * width : (r + 1) * width] = a.value[r : r + nw]

    def bw(g: Array) -> None:
        out = np.zeros_like(a.value)
        for r in range(h):
            out[r : r + nw] += g[:, r * width : (r + 1) * width]
        a._accumulate(out)

    return Tensor(val, (a,), bw)


def pad_rows(a: Tensor, total: int) -> Tensor:
    """Append zero rows until the tensor has ``total`` rows."""
    n, width = a.value.shape
    val = np.zeros((total, width))
    val[:n] = a.value

    def bw(g: Array) -> None:
        a._accumulate(g[:n])

    return Tensor(val, (a,), bw)


def vstack(parts: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a 2-D tensor."""
    val = np.stack([p.value for p in parts])

    def bw(g: Array) -> None:
        for i, p in enumerate(parts):
            p._accumulate(g[i])

    return Tensor(val, tuple(parts), bw)


def concat1d(parts: Sequence[Tensor]) -> Tensor:
    val = np.concatenate([p.value for p in parts])
    offsets = np.cumsum([0] + [p.value.shape[0] for p in parts])

    def bw(g: Array) -> None:
        for i, p in enumerate(parts):
            p._accumulate(g[offsets[i] : offsets[i + 1]])

    return Tensor(val, tuple(parts), bw)


def stack_scalars(parts: Sequence[Tensor]) -> Tensor:
    val = np.array([float(p.value) for p in parts])

    def bw(g: Array) -> None:
        for i, p in enumerate(parts):
            p._accumulate(np.asarray(g[i]))

    return Tensor(val, tuple(parts), bw)


# ---------------------------------------------------------------------------
# fused ranking primitives


def cosine_matrix(q: Tensor, d: Tensor) -> tuple[Tensor, Array]:
    """All-pairs cosine similarities between rows of ``q`` and ``d``.

    Returns the (nq, nd) score tensor and a boolean validity mask; cells
    touching a zero-norm row score 0, carry no gradient, and are invalid.
    """
    qn = np.linalg.norm(q.value, axis=1)
    dn = np.linalg.norm(d.value, axis=1)
    qok = qn > 0.0
    dok = dn > 0.0
    qsafe = np.where(qok, qn, 1.0)
    dsafe = np.where(dok, dn, 1.0)
    qhat = q.value / qsafe[:, None]
    dhat = d.value / dsafe[:, None]
    val = qhat @ dhat.T
    valid = np.logical_and.outer(qok, dok)
    val[~valid] = 0.0

    def bw(g: Array) -> None:
        g = np.where(valid, g, 0.0)
        gm = g * val
        q._accumulate((g @ dhat - gm.sum(axis=1)[:, None] * qhat) / qsafe[:, None])
        d._accumulate((g.T @ qhat - gm.sum(axis=0)[:, None] * dhat) / dsafe[:, None])

    return Tensor(val, (q, d), bw), valid


def kernel_pool_op(
    m: Tensor,
    valid: Array,
    mus: Array,
    deltas: Array,
    eps_log: float,
) -> Tensor:
    """Gaussian soft-term-frequency pooling of a similarity matrix.

    Per query row i and kernel k: softtf_k(i) = sum over valid j of
    exp(-(M_ij - mu_k)^2 / (2 delta_k^2)); the pooled feature is
    sum over rows with at least one valid cell of log(softtf + eps_log).
    A matrix with no valid cells yields the zero vector.
    """
    n_kernels = mus.shape[0]
    if m.value.size == 0 or not valid.any():
        def bw_empty(g: Array) -> None:
            if m.value.size:
                m._accumulate(np.zeros_like(m.value))

        return Tensor(np.zeros(n_kernels), (m,), bw_empty)

    diff = m.value[None, :, :] - mus[:, None, None]
    e = np.exp(-(diff * diff) / (2.0 * (deltas * deltas))[:, None, None])
    e *= valid[None, :, :]
    softtf = e.sum(axis=2)  # (K, nq)
    row_ok = valid.any(axis=1)
    logterm = np.where(row_ok[None, :], np.log(softtf + eps_log), 0.0)
    val = logterm.sum(axis=1)

    def bw(g: Array) -> None:
        inv = np.where(row_ok[None, :], 1.0 / (softtf + eps_log), 0.0)
        coeff = (g[:, None] * inv)[:, :, None] * e * (-diff / (deltas * deltas)[:, None, None])
        m._accumulate(coeff.sum(axis=0))

    return Tensor(val, (m,), bw)
