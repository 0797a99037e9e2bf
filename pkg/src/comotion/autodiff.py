"""Reverse-mode automatic differentiation over dense float64 matrices.

Every value is a 2-D numpy array wrapped in a Node and recorded on a Tape
in evaluation order, so the record is topologically sorted by construction.
``Tape.backward`` walks the record once in reverse and accumulates adjoints
in a fixed order, which keeps gradients bitwise deterministic for a fixed
computation.

Vectors are column matrices (n, 1); scalars are (1, 1). Adjoints are
propagated only into subgraphs that contain at least one ``variable`` leaf;
everything else reads back as a zero gradient.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

Array = np.ndarray


def as_matrix(value) -> Array:
    """Coerce to a 2-D float64 array; 1-D input becomes a column vector."""
    a = np.asarray(value, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise ShapeError(f"expected scalar, vector or matrix, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"matrix must be at least 1x1, got shape {a.shape}")
    return np.ascontiguousarray(a)


def sigmoid_values(x: Array) -> Array:
    """Numerically stable logistic function, elementwise."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_temperature(scores, tau: float) -> Array:
    """Temperature softmax of a score vector: exp(s_i/tau) / sum_j exp(s_j/tau).

    The maximum score is subtracted before exponentiation; the result is
    unchanged mathematically and safe against overflow.
    """
    if tau <= 0:
        raise ConfigError(f"softmax temperature must be positive, got {tau}")
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise ShapeError("softmax needs at least one score")
    if not np.isfinite(s).all():
        raise NumericError("softmax scores must be finite")
    e = np.exp((s - s.max()) / tau)
    return e / e.sum()


class Node:
    """A single value recorded on a tape."""

    __slots__ = ("tape", "index", "value", "parents", "needs_grad", "vjp")

    def __init__(self, tape, index, value, parents, needs_grad, vjp):
        self.tape = tape
        self.index = index
        self.value = value
        self.parents = parents
        self.needs_grad = needs_grad
        self.vjp = vjp

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    def __add__(self, other: "Node") -> "Node":
        return self.tape.add(self, other)

    def __sub__(self, other: "Node") -> "Node":
        return self.tape.sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Node):
            return self.tape.mul(self, other)
        return self.tape.scale(self, float(other))

    def __rmul__(self, other) -> "Node":
        return self.tape.scale(self, float(other))

    def __matmul__(self, other: "Node") -> "Node":
        return self.tape.matmul(self, other)

    def __neg__(self) -> "Node":
        return self.tape.scale(self, -1.0)

    def __repr__(self) -> str:
        return f"Node#{self.index}{self.value.shape}"


class Gradients:
    """Adjoints produced by one backward pass, queryable per node."""

    def __init__(self, adjoints: list):
        self._adjoints = adjoints

    def __getitem__(self, node: Node) -> Array:
        g = self._adjoints[node.index]
        if g is None:
            return np.zeros(node.value.shape)
        return g


class Tape:
    """Ordered record of primitive matrix operations."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._ones_cache: dict[tuple[int, int], Node] = {}

    # -- leaves ---------------------------------------------------------

    def _record(self, value, parents=(), vjp=None, needs_grad=None) -> Node:
        if needs_grad is None:
            needs_grad = any(p.needs_grad for p in parents)
        node = Node(self, len(self.nodes), value, tuple(parents), needs_grad, vjp)
        self.nodes.append(node)
        return node

    def constant(self, value) -> Node:
        """A leaf that never receives a gradient."""
        a = as_matrix(value)
        if not np.isfinite(a).all():
            raise NumericError("constant contains non-finite entries")
        return self._record(a, needs_grad=False)

    def variable(self, value) -> Node:
        """A leaf that participates in differentiation."""
        a = as_matrix(value)
        if not np.isfinite(a).all():
            raise NumericError("variable contains non-finite entries")
        return self._record(a, needs_grad=True)

    def ones(self, rows: int, cols: int) -> Node:
        """Cached all-ones constant, reused within this tape."""
        key = (rows, cols)
        node = self._ones_cache.get(key)
        if node is None:
            node = self.constant(np.ones(key))
            self._ones_cache[key] = node
        return node

    # -- primitive operations -------------------------------------------

    def matmul(self, a: Node, b: Node) -> Node:
        av, bv = a.value, b.value
        if av.shape[1] != bv.shape[0]:
            raise ShapeError(f"matmul: {av.shape} @ {bv.shape}: inner dimensions differ")

        def vjp(g):
            return (
                g @ bv.T if a.needs_grad else None,
                av.T @ g if b.needs_grad else None,
            )

        return self._record(av @ bv, (a, b), vjp)

    def add(self, a: Node, b: Node) -> Node:
        self._same_shape("add", a, b)

        def vjp(g):
            return (g if a.needs_grad else None, g if b.needs_grad else None)

        return self._record(a.value + b.value, (a, b), vjp)

    def sub(self, a: Node, b: Node) -> Node:
        self._same_shape("sub", a, b)

        def vjp(g):
            return (g if a.needs_grad else None, -g if b.needs_grad else None)

        return self._record(a.value - b.value, (a, b), vjp)

    def mul(self, a: Node, b: Node) -> Node:
        """Elementwise (Hadamard) product."""
        self._same_shape("mul", a, b)
        av, bv = a.value, b.value

        def vjp(g):
            return (g * bv if a.needs_grad else None, g * av if b.needs_grad else None)

        return self._record(av * bv, (a, b), vjp)

    def scale(self, a: Node, c: float) -> Node:
        """Multiply by a plain python scalar (not a tape value)."""

        def vjp(g):
            return (c * g if a.needs_grad else None,)

        return self._record(c * a.value, (a,), vjp)

    def smul(self, s: Node, a: Node) -> Node:
        """Multiply matrix ``a`` by the scalar node ``s`` (shape 1x1)."""
        if s.value.shape != (1, 1):
            raise ShapeError(f"smul scalar operand must be 1x1, got {s.value.shape}")
        sv = s.value[0, 0]
        av = a.value

        def vjp(g):
            return (
                np.array([[np.sum(g * av)]]) if s.needs_grad else None,
                sv * g if a.needs_grad else None,
            )

        return self._record(sv * av, (s, a), vjp)

    def sdiv(self, a: Node, s: Node) -> Node:
        """Divide matrix ``a`` by the scalar node ``s`` (shape 1x1)."""
        if s.value.shape != (1, 1):
            raise ShapeError(f"sdiv scalar operand must be 1x1, got {s.value.shape}")
        sv = s.value[0, 0]
        av = a.value

        def vjp(g):
            return (
                g / sv if a.needs_grad else None,
                np.array([[-np.sum(g * av) / (sv * sv)]]) if s.needs_grad else None,
            )

        return self._record(av / sv, (a, s), vjp)

    def tanh(self, a: Node) -> Node:
        y = np.tanh(a.value)

        def vjp(g):
            return (g * (1.0 - y * y) if a.needs_grad else None,)

        return self._record(y, (a,), vjp)

    def sigmoid(self, a: Node) -> Node:
        y = sigmoid_values(a.value)

        def vjp(g):
            return (g * y * (1.0 - y) if a.needs_grad else None,)

        return self._record(y, (a,), vjp)

    def exp(self, a: Node) -> Node:
        y = np.exp(a.value)

        def vjp(g):
            return (g * y if a.needs_grad else None,)

        return self._record(y, (a,), vjp)

    def square(self, a: Node) -> Node:
        av = a.value

        def vjp(g):
            return (2.0 * av * g if a.needs_grad else None,)

        return self._record(av * av, (a,), vjp)

    def sum(self, a: Node) -> Node:
        """Sum of all entries, as a 1x1 node."""
        shape = a.value.shape

        def vjp(g):
            return (np.full(shape, g[0, 0]) if a.needs_grad else None,)

        return self._record(np.array([[a.value.sum()]]), (a,), vjp)

    def transpose(self, a: Node) -> Node:
        def vjp(g):
            return (g.T if a.needs_grad else None,)

        return self._record(np.ascontiguousarray(a.value.T), (a,), vjp)

    def hstack(self, parts: Sequence[Node]) -> Node:
        parts = tuple(parts)
        if not parts:
            raise ShapeError("hstack needs at least one operand")
        r = parts[0].value.shape[0]
        for p in parts:
            if p.value.shape[0] != r:
                raise ShapeError(
                    f"hstack: row counts differ ({parts[0].value.shape} vs {p.value.shape})"
                )
        widths = [p.value.shape[1] for p in parts]
        offsets = np.cumsum([0] + widths)

        def vjp(g):
            return tuple(
                g[:, offsets[i]: offsets[i + 1]] if p.needs_grad else None
                for i, p in enumerate(parts)
            )

        return self._record(np.hstack([p.value for p in parts]), parts, vjp)

    def vstack(self, parts: Sequence[Node]) -> Node:
        parts = tuple(parts)
        if not parts:
            raise ShapeError("vstack needs at least one operand")
        c = parts[0].value.shape[1]
        for p in parts:
            if p.value.shape[1] != c:
                raise ShapeError(
                    f"vstack: column counts differ ({parts[0].value.shape} vs {p.value.shape})"
                )
        heights = [p.value.shape[0] for p in parts]
        offsets = np.cumsum([0] + heights)

        def vjp(g):
            return tuple(
                g[offsets[i]: offsets[i + 1], :] if p.needs_grad else None
                for i, p in enumerate(parts)
            )

        return self._record(np.vstack([p.value for p in parts]), parts, vjp)

    def row_block(self, a: Node, r0: int, r1: int) -> Node:
        """Rows r0:r1 (0-based, half-open) of ``a``."""
        shape = a.value.shape
        if not (0 <= r0 < r1 <= shape[0]):
            raise ShapeError(f"row_block [{r0}:{r1}] out of range for shape {shape}")

        def vjp(g):
            if not a.needs_grad:
                return (None,)
            z = np.zeros(shape)
            z[r0:r1, :] = g
            return (z,)

        return self._record(a.value[r0:r1, :].copy(), (a,), vjp)

    def col_block(self, a: Node, c0: int, c1: int) -> Node:
        """Columns c0:c1 (0-based, half-open) of ``a``."""
        shape = a.value.shape
        if not (0 <= c0 < c1 <= shape[1]):
            raise ShapeError(f"col_block [{c0}:{c1}] out of range for shape {shape}")

        def vjp(g):
            if not a.needs_grad:
                return (None,)
            z = np.zeros(shape)
            z[:, c0:c1] = g
            return (z,)

        return self._record(a.value[:, c0:c1].copy(), (a,), vjp)

    # -- composed helpers -------------------------------------------------

    def softmax_temp(self, scores: Node, tau: float) -> Node:
        """Temperature softmax of a 1 x n row of scores, on the tape.

        Max-subtraction uses a detached constant, which leaves both the
        value and the gradient unchanged.
        """
        if tau <= 0:
            raise ConfigError(f"softmax temperature must be positive, got {tau}")
        if scores.value.shape[0] != 1:
            raise ShapeError(f"softmax expects a 1 x n score row, got {scores.value.shape}")
        n = scores.value.shape[1]
        shift = self.constant(np.full((1, n), scores.value.max()))
        e = self.exp(self.scale(self.sub(scores, shift), 1.0 / tau))
        return self.sdiv(e, self.sum(e))

    def mean_columns(self, a: Node) -> Node:
        """Column mean: (1/cols) * a @ 1, as a column vector."""
        r, c = a.value.shape
        return self.scale(self.matmul(a, self.ones(c, 1)), 1.0 / c)

    # -- reverse pass ------------------------------------------------------

    def backward(self, loss: Node) -> Gradients:
        """Adjoints of ``loss`` with respect to every node on the tape.

        Requires a scalar (1x1) loss. Accumulation runs in reverse record
        order, so results are deterministic for a fixed forward pass.
        """
        if loss.tape is not self:
            raise ValueError("loss node belongs to a different tape")
        if loss.value.shape != (1, 1):
            raise ShapeError(f"backward needs a scalar (1x1) loss, got {loss.value.shape}")
        if not np.isfinite(loss.value).all():
            raise NumericError("loss is not finite")
        adjoints: list = [None] * len(self.nodes)
        adjoints[loss.index] = np.ones((1, 1))
        for node in reversed(self.nodes[: loss.index + 1]):
            g = adjoints[node.index]
            if g is None or node.vjp is None:
                continue
            for parent, contrib in zip(node.parents, node.vjp(g)):
                if contrib is None:
                    continue
                slot = adjoints[parent.index]
                if slot is None:
                    # Copy: vjps may hand out views into a child's adjoint.
                    adjoints[parent.index] = np.array(contrib)
                else:
                    slot += contrib
        return Gradients(adjoints)

    # -- internals ---------------------------------------------------------

    @staticmethod
    def _same_shape(op: str, a: Node, b: Node) -> None:
        if a.value.shape != b.value.shape:
            raise ShapeError(f"{op}: shapes {a.value.shape} and {b.value.shape} differ")


def backward(tape: Tape, loss: Node) -> Gradients:
    """Functional alias for ``tape.backward(loss)``."""
    return tape.backward(loss)
