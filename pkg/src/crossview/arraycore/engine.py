"""Tape-based reverse-mode autodiff over dense numpy arrays.

Arrays are immutable once created: every operation returns a fresh Array,
and optimizers rebind ``.data`` instead of writing into buffers. That rule
is what makes tape replay bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

FLOAT_DTYPES = (np.float32, np.float64)

ArrayLike = Union["Array", np.ndarray, float, int]


class Array:
    """Dense float32/float64 array with an optional gradient slot."""

    __slots__ = ("data", "grad", "tape", "nid", "requires_grad")

    def __init__(self, data, dtype=None, requires_grad: bool = False):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        # ascontiguousarray would promote 0-d scalars to 1-d
        self.data = arr if arr.flags.c_contiguous else np.ascontiguousarray(arr)
        self.grad: Optional[np.ndarray] = None
        self.tape: Optional["Tape"] = None
        self.nid: Optional[int] = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Array":
        return Array(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Array(shape={self.shape}, dtype={self.data.dtype.name})"

    def __neg__(self):
        return apply("neg", self)

    def __add__(self, other):
        return apply("add", self, as_array_like(other, self.dtype))

    def __radd__(self, other):
        return apply("add", as_array_like(other, self.dtype), self)

    def __sub__(self, other):
        return apply("sub", self, as_array_like(other, self.dtype))

    def __rsub__(self, other):
        return apply("sub", as_array_like(other, self.dtype), self)

    def __mul__(self, other):
        return apply("mul", self, as_array_like(other, self.dtype))

    def __rmul__(self, other):
        return apply("mul", as_array_like(other, self.dtype), self)

    def __truediv__(self, other):
        return apply("div", self, as_array_like(other, self.dtype))

    def __rtruediv__(self, other):
        return apply("div", as_array_like(other, self.dtype), self)

    def __matmul__(self, other):
        return apply("matmul", self, as_array_like(other, self.dtype))

    def backward(self, seed=None):
        """Run reverse-mode accumulation from this array's tape node."""
        if self.tape is None:
            raise ValueError("array is not attached to a tape")
        self.tape.root = self.nid
        return backward(self.tape, seed)


def as_array_like(x: ArrayLike, dtype=None) -> "Array":
    if isinstance(x, Array):
        return x
    return Array(np.asarray(x, dtype=dtype))


@dataclass
class OpDef:
    """Forward rule plus vector-Jacobian product for one primitive."""

    name: str
    forward: Callable[..., np.ndarray]
    vjp: Optional[Callable[..., Sequence[Optional[np.ndarray]]]]


OP_TABLE: dict[str, OpDef] = {}


def defop(name: str, forward, vjp):
    if name in OP_TABLE:
        raise ValueError(f"op {name!r} registered twice")
    OP_TABLE[name] = OpDef(name, forward, vjp)


@dataclass
class Node:
    """One recorded step: a leaf array or a primitive application."""

    op: str  # "leaf" or an OP_TABLE key
    inputs: tuple[int, ...]
    attrs: dict[str, Any]
    value: np.ndarray
    leaf_ref: Optional[Array] = None


_ACTIVE_TAPES: list["Tape"] = []


class Tape:
    """Append-only record of a computation, inputs before consumers."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.root: Optional[int] = None

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, *exc):
        popped = _ACTIVE_TAPES.pop()
        assert popped is self

    def __len__(self):
        return len(self.nodes)

    def watch(self, array: Array) -> Array:
        """Register a leaf so it receives a gradient even if unused."""
        self._ensure_leaf(array)
        return array

    def _ensure_leaf(self, array: Array) -> int:
        # An array recorded on an older, finished tape re-enters as a fresh
        # leaf here; gradients never flow across tapes.
        if array.tape is self and array.nid is not None:
            return array.nid
        nid = len(self.nodes)
        self.nodes.append(Node("leaf", (), {}, array.data, leaf_ref=array))
        array.tape = self
        array.nid = nid
        return nid

    def record(self, op: str, inputs: Sequence[Array], attrs: dict, value: np.ndarray) -> Array:
        ids = tuple(self._ensure_leaf(a) for a in inputs)
        nid = len(self.nodes)
        self.nodes.append(Node(op, ids, attrs, value))
        out = Array.__new__(Array)
        out.data = value
        out.grad = None
        out.tape = self
        out.nid = nid
        out.requires_grad = False
        self.root = nid
        return out

    def replay(self) -> np.ndarray:
        """Recompute every node from the recorded leaves; return the root value."""
        if self.root is None:
            raise ValueError("tape has no root")
        values: list[np.ndarray] = []
        for node in self.nodes:
            if node.op == "leaf":
                values.append(node.value)
            else:
                fwd = OP_TABLE[node.op].forward
                values.append(fwd(*(values[i] for i in node.inputs), **node.attrs))
        return values[self.root]


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


def apply(op: str, *inputs: ArrayLike, **attrs) -> Array:
    """Evaluate a registered primitive, recording it on the active tape."""
    arrays = [as_array_like(x) for x in inputs]
    opdef = OP_TABLE[op]
    value = opdef.forward(*(a.data for a in arrays), **attrs)
    tape = active_tape()
    if tape is None:
        return Array(value)
    return tape.record(op, arrays, attrs, value)


def backward(tape: Tape, seed=None) -> dict[Array, np.ndarray]:
    """Accumulate gradients from the tape root back to its leaves.

    Returns a map from each leaf Array to its gradient (zeros for leaves
    off the root's path). Leaves with ``requires_grad`` also get ``.grad``
    set, adding to any prior value.
    """
    if tape.root is None:
        raise ValueError("tape has no root to differentiate")
    root = tape.nodes[tape.root]
    if seed is None:
        seed_val = np.ones_like(root.value)
    else:
        seed_val = seed.data if isinstance(seed, Array) else np.asarray(seed, dtype=root.value.dtype)
    if seed_val.shape != root.value.shape:
        raise ValueError(f"seed shape {seed_val.shape} does not match root shape {root.value.shape}")

    grads: list[Optional[np.ndarray]] = [None] * len(tape.nodes)
    grads[tape.root] = seed_val
    for nid in range(tape.root, -1, -1):
        g = grads[nid]
        node = tape.nodes[nid]
        if g is None or node.op == "leaf":
            continue
        vjp = OP_TABLE[node.op].vjp
        if vjp is None:
            raise ValueError(f"op {node.op!r} is not differentiable")
        in_vals = tuple(tape.nodes[i].value for i in node.inputs)
        in_grads = vjp(g, node.value, in_vals, node.attrs)
        for i, ig in zip(node.inputs, in_grads):
            if ig is None:
                continue
            grads[i] = ig if grads[i] is None else grads[i] + ig
        grads[nid] = None  # free as we go

    result: dict[Array, np.ndarray] = {}
    for nid, node in enumerate(tape.nodes):
        if node.op != "leaf":
            continue
        leaf = node.leaf_ref
        g = grads[nid]
        if g is None:
            g = np.zeros_like(node.value)
        result[leaf] = g
        if leaf.requires_grad:
            leaf.grad = g if leaf.grad is None else leaf.grad + g
    return result
