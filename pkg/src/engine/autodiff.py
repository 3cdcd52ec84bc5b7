"""Reverse-mode automatic differentiation over dense float64 tensors of rank <= 3.

Every op builds a :class:`Node` holding its value, its parents and a rule tag.
Backward rules live in ``BACKWARD_RULES`` keyed by that tag, so the engine can
be audited (and deliberately broken in tests) one rule at a time.

Broadcasting is limited to scalar-vs-tensor; row-vector broadcasts go through
the explicit ``add_row`` and ``mul_row`` ops.
"""

import itertools
import threading
from collections.abc import Callable, Iterable, Sequence
from contextlib import contextmanager
from typing import Any

import numpy as np

from src.errors.core import UsageError
from src.errors.numerical import DomainError, GraphError, NonFiniteError, ShapeError

MAX_RANK = 3
NORM_FLOOR = 1e-12

_grad_mode = threading.local()
_finalize_counter = itertools.count()


def is_grad_enabled() -> bool:
    """Whether new ops record their parents for backward."""
    return getattr(_grad_mode, "enabled", True)


@contextmanager
def no_grad():
    """Evaluate ops without recording the graph (inference, finite differences)."""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


class Node:
    """A value in the computation graph."""

    __slots__ = ("value", "_grad", "parents", "op", "ctx", "requires_grad", "name",
                 "finalized_at", "_backward_done")

    def __init__(
        self,
        value: np.ndarray,
        parents: tuple["Node", ...] = (),
        op: str = "leaf",
        ctx: dict[str, Any] | None = None,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        """Wrap ``value``; callers go through the op functions or ``parameter``."""
        self.value = value
        self._grad: np.ndarray | None = None
        self.parents = parents
        self.op = op
        self.ctx = ctx or {}
        self.requires_grad = requires_grad
        self.name = name
        self.finalized_at: int | None = None
        self._backward_done = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def grad(self) -> np.ndarray:
        """Accumulated gradient, zero until a backward pass reaches this node."""
        if self._grad is None:
            self._grad = np.zeros_like(self.value)
        return self._grad

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def zero_grad(self) -> None:
        self._grad = None
        self.finalized_at = None

    def item(self) -> float:
        """Scalar value as a Python float."""
        if self.value.size != 1:
            raise ShapeError("item", f"expected one element, got shape {self.shape}")
        return float(self.value.reshape(()))

    def __repr__(self) -> str:
        label = self.name or self.op
        return f"Node({label}, shape={self.shape})"


def _as_array(data: Any) -> np.ndarray:  # noqa: ANN401
    array = np.array(data, dtype=np.float64)
    if array.ndim > MAX_RANK:
        raise ShapeError("tensor", f"rank {array.ndim} exceeds {MAX_RANK}")
    return array


def constant(data: Any) -> Node:  # noqa: ANN401
    """A node that never receives gradient."""
    array = _as_array(data)
    _check_finite("constant", array)
    return Node(array)


def parameter(data: Any, name: str | None = None) -> Node:  # noqa: ANN401
    """A trainable leaf."""
    array = _as_array(data)
    _check_finite("parameter", array)
    return Node(array, requires_grad=True, name=name)


def _check_finite(op: str, value: np.ndarray) -> None:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(op)


def _make(op: str, value: np.ndarray, parents: tuple[Node, ...], **ctx: Any) -> Node:  # noqa: ANN401
    if value.ndim > MAX_RANK:
        raise ShapeError(op, f"result rank {value.ndim} exceeds {MAX_RANK}")
    _check_finite(op, value)
    requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
    if not requires_grad:
        return Node(value, op=op)
    return Node(value, parents=parents, op=op, ctx=ctx, requires_grad=True)


def _lift(x: "Node | float | int") -> Node:
    return x if isinstance(x, Node) else constant(x)


def _check_binary(op: str, a: Node, b: Node) -> None:
    if a.shape != b.shape and a.value.ndim != 0 and b.value.ndim != 0:
        raise ShapeError(op, f"{a.shape} vs {b.shape}")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # only scalar-vs-tensor broadcasting exists
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum(), dtype=np.float64).reshape(shape)


# ---------------------------------------------------------------------------
# ops


def matmul(a: Node, b: Node) -> Node:
    """Matrix product of two rank-2 nodes, or batched product of two rank-3 nodes."""
    if a.value.ndim != b.value.ndim or a.value.ndim not in (2, 3):
        raise ShapeError("matmul", f"unsupported ranks {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2] or (a.value.ndim == 3 and a.shape[0] != b.shape[0]):
        raise ShapeError("matmul", f"{a.shape} x {b.shape}")
    return _make("matmul", np.matmul(a.value, b.value), (a, b))


def add(a: "Node | float", b: "Node | float") -> Node:
    a, b = _lift(a), _lift(b)
    _check_binary("add", a, b)
    return _make("add", a.value + b.value, (a, b))


def sub(a: "Node | float", b: "Node | float") -> Node:
    a, b = _lift(a), _lift(b)
    _check_binary("sub", a, b)
    return _make("sub", a.value - b.value, (a, b))


def mul(a: "Node | float", b: "Node | float") -> Node:
    a, b = _lift(a), _lift(b)
    _check_binary("mul", a, b)
    return _make("mul", a.value * b.value, (a, b))


def scale(a: Node, factor: float) -> Node:
    return _make("scale", a.value * float(factor), (a,), factor=float(factor))


def tanh(a: Node) -> Node:
    return _make("tanh", np.tanh(a.value), (a,))


def exp(a: Node) -> Node:
    with np.errstate(over="ignore"):
        value = np.exp(a.value)
    return _make("exp", value, (a,))


def log(a: Node) -> Node:
    if np.any(a.value <= 0.0):
        raise DomainError("log", "input has non-positive entries")
    return _make("log", np.log(a.value), (a,))


def _stable_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def row_softmax(a: Node) -> Node:
    """Softmax over the last axis with max-subtraction."""
    if a.value.ndim < 1:
        raise ShapeError("row_softmax", "scalar input")
    return _make("row_softmax", _stable_softmax(a.value), (a,))


def row_log_softmax(a: Node) -> Node:
    """Log-softmax over the last axis."""
    if a.value.ndim < 1:
        raise ShapeError("row_log_softmax", "scalar input")
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    value = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return _make("row_log_softmax", value, (a,))


def l2_normalize(a: Node) -> Node:
    """Unit-normalize a vector, or each row of a matrix."""
    if a.value.ndim not in (1, 2):
        raise ShapeError("l2_normalize", f"expected rank 1 or 2, got {a.shape}")
    norm = np.sqrt(np.sum(a.value * a.value, axis=-1, keepdims=True))
    if np.any(norm <= NORM_FLOOR):
        raise DomainError("l2_normalize", "norm below 1e-12")
    return _make("l2_normalize", a.value / norm, (a,), norm=norm)


def sum_all(a: Node) -> Node:
    return _make("sum", np.asarray(a.value.sum(), dtype=np.float64), (a,))


def mean_all(a: Node) -> Node:
    return _make("mean", np.asarray(a.value.mean(), dtype=np.float64), (a,))


def reshape(a: Node, shape: Sequence[int]) -> Node:
    shape = tuple(shape)
    if int(np.prod(shape, dtype=np.int64)) != a.value.size:
        raise ShapeError("reshape", f"{a.shape} -> {shape}")
    return _make("reshape", a.value.reshape(shape), (a,))


def transpose(a: Node, axes: Sequence[int] | None = None) -> Node:
    axes = tuple(axes) if axes is not None else tuple(reversed(range(a.value.ndim)))
    return _make("transpose", np.transpose(a.value, axes), (a,), axes=axes)


def take_rows(table: Node, index: Sequence[int]) -> Node:
    """Gather rows of a rank-2 node (embedding lookup)."""
    if table.value.ndim != 2:
        raise ShapeError("take_rows", f"expected rank 2, got {table.shape}")
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1 or (idx.size and (idx.min() < 0 or idx.max() >= table.shape[0])):
        raise ShapeError("take_rows", f"index out of range for {table.shape}")
    return _make("take_rows", table.value[idx], (table,), index=idx)


def pick(a: Node, rows: Sequence[int], cols: Sequence[int]) -> Node:
    """Gather ``a[rows[i], cols[i]]`` into a vector."""
    if a.value.ndim != 2:
        raise ShapeError("pick", f"expected rank 2, got {a.shape}")
    r = np.asarray(rows, dtype=np.int64)
    c = np.asarray(cols, dtype=np.int64)
    if r.shape != c.shape or r.ndim != 1:
        raise ShapeError("pick", "rows and cols must be equal-length vectors")
    return _make("pick", a.value[r, c], (a,), rows=r, cols=c)


def stack(nodes: Sequence[Node]) -> Node:
    """Stack same-shaped nodes along a new leading axis."""
    if not nodes:
        raise ShapeError("stack", "nothing to stack")
    shape = nodes[0].shape
    if any(n.shape != shape for n in nodes):
        raise ShapeError("stack", "operands differ in shape")
    return _make("stack", np.stack([n.value for n in nodes]), tuple(nodes))


def add_row(a: Node, row: Node) -> Node:
    """Add a vector to every row of ``a`` (last axis)."""
    if row.value.ndim != 1 or a.shape[-1] != row.shape[0]:
        raise ShapeError("add_row", f"{a.shape} + row {row.shape}")
    return _make("add_row", a.value + row.value, (a, row))


def mul_row(a: Node, row: Node) -> Node:
    """Multiply every row of ``a`` elementwise by a vector."""
    if row.value.ndim != 1 or a.shape[-1] != row.shape[0]:
        raise ShapeError("mul_row", f"{a.shape} * row {row.shape}")
    return _make("mul_row", a.value * row.value, (a, row))


def layer_norm(a: Node, eps: float = 1e-5) -> Node:
    """Normalize the last axis to zero mean and unit variance (no affine part)."""
    mu = a.value.mean(axis=-1, keepdims=True)
    centered = a.value - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    value = centered * inv_std
    return _make("layer_norm", value, (a,), inv_std=inv_std)


def clip(a: Node, low: float, high: float) -> Node:
    return _make("clip", np.clip(a.value, low, high), (a,), low=low, high=high)


def minimum(a: Node, b: Node) -> Node:
    """Elementwise minimum; ties route gradient to ``a``."""
    _check_binary("minimum", a, b)
    if a.shape != b.shape:
        raise ShapeError("minimum", f"{a.shape} vs {b.shape}")
    return _make("minimum", np.minimum(a.value, b.value), (a, b), take_a=a.value <= b.value)


def dot(a: Node, b: Node) -> Node:
    """Inner product of two same-shaped nodes."""
    return sum_all(mul(a, b))


# ---------------------------------------------------------------------------
# backward rules: (node, upstream grad) -> one grad (or None) per parent

BackwardRule = Callable[[Node, np.ndarray], tuple[np.ndarray | None, ...]]


def _swap_last(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def _matmul_backward(node: Node, g: np.ndarray) -> tuple:
    a, b = node.parents
    return np.matmul(g, _swap_last(b.value)), np.matmul(_swap_last(a.value), g)


def _add_backward(node: Node, g: np.ndarray) -> tuple:
    a, b = node.parents
    return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


def _sub_backward(node: Node, g: np.ndarray) -> tuple:
    a, b = node.parents
    return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)


def _mul_backward(node: Node, g: np.ndarray) -> tuple:
    a, b = node.parents
    return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)


def _scale_backward(node: Node, g: np.ndarray) -> tuple:
    return (g * node.ctx["factor"],)


def _tanh_backward(node: Node, g: np.ndarray) -> tuple:
    return (g * (1.0 - node.value * node.value),)


def _exp_backward(node: Node, g: np.ndarray) -> tuple:
    return (g * node.value,)


def _log_backward(node: Node, g: np.ndarray) -> tuple:
    return (g / node.parents[0].value,)


def _softmax_backward(node: Node, g: np.ndarray) -> tuple:
    y = node.value
    return (y * (g - np.sum(g * y, axis=-1, keepdims=True)),)


def _log_softmax_backward(node: Node, g: np.ndarray) -> tuple:
    probs = np.exp(node.value)
    return (g - probs * np.sum(g, axis=-1, keepdims=True),)


def _l2_normalize_backward(node: Node, g: np.ndarray) -> tuple:
    y = node.value
    return ((g - y * np.sum(g * y, axis=-1, keepdims=True)) / node.ctx["norm"],)


def _sum_backward(node: Node, g: np.ndarray) -> tuple:
    return (np.full(node.parents[0].shape, float(g)),)


def _mean_backward(node: Node, g: np.ndarray) -> tuple:
    parent = node.parents[0]
    return (np.full(parent.shape, float(g) / parent.value.size),)


def _reshape_backward(node: Node, g: np.ndarray) -> tuple:
    return (g.reshape(node.parents[0].shape),)


def _transpose_backward(node: Node, g: np.ndarray) -> tuple:
    return (np.transpose(g, np.argsort(node.ctx["axes"])),)


def _take_rows_backward(node: Node, g: np.ndarray) -> tuple:
    out = np.zeros_like(node.parents[0].value)
    np.add.at(out, node.ctx["index"], g)
    return (out,)


def _pick_backward(node: Node, g: np.ndarray) -> tuple:
    out = np.zeros_like(node.parents[0].value)
    np.add.at(out, (node.ctx["rows"], node.ctx["cols"]), g)
    return (out,)


def _stack_backward(node: Node, g: np.ndarray) -> tuple:
    return tuple(g[i] for i in range(len(node.parents)))


def _add_row_backward(node: Node, g: np.ndarray) -> tuple:
    return g, g.reshape(-1, g.shape[-1]).sum(axis=0)


def _mul_row_backward(node: Node, g: np.ndarray) -> tuple:
    a, row = node.parents
    return g * row.value, (g * a.value).reshape(-1, g.shape[-1]).sum(axis=0)


def _layer_norm_backward(node: Node, g: np.ndarray) -> tuple:
    y = node.value
    mean_g = g.mean(axis=-1, keepdims=True)
    mean_gy = (g * y).mean(axis=-1, keepdims=True)
    return (node.ctx["inv_std"] * (g - mean_g - y * mean_gy),)


def _clip_backward(node: Node, g: np.ndarray) -> tuple:
    x = node.parents[0].value
    inside = (x >= node.ctx["low"]) & (x <= node.ctx["high"])
    return (g * inside,)


def _minimum_backward(node: Node, g: np.ndarray) -> tuple:
    take_a = node.ctx["take_a"]
    return g * take_a, g * ~take_a


BACKWARD_RULES: dict[str, BackwardRule] = {
    "matmul": _matmul_backward,
    "add": _add_backward,
    "sub": _sub_backward,
    "mul": _mul_backward,
    "scale": _scale_backward,
    "tanh": _tanh_backward,
    "exp": _exp_backward,
    "log": _log_backward,
    "row_softmax": _softmax_backward,
    "row_log_softmax": _log_softmax_backward,
    "l2_normalize": _l2_normalize_backward,
    "sum": _sum_backward,
    "mean": _mean_backward,
    "reshape": _reshape_backward,
    "transpose": _transpose_backward,
    "take_rows": _take_rows_backward,
    "pick": _pick_backward,
    "stack": _stack_backward,
    "add_row": _add_row_backward,
    "mul_row": _mul_row_backward,
    "layer_norm": _layer_norm_backward,
    "clip": _clip_backward,
    "minimum": _minimum_backward,
}


def _topological_order(root: Node) -> list[Node]:
    """Parents before children; raises on a cycle."""
    order: list[Node] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[Node, int]] = [(root, 0)]
    while stack:
        node, child_idx = stack.pop()
        key = id(node)
        if child_idx == 0:
            if state.get(key) == 2:
                continue
            state[key] = 1
        if child_idx < len(node.parents):
            stack.append((node, child_idx + 1))
            parent = node.parents[child_idx]
            if not parent.requires_grad:
                continue
            parent_state = state.get(id(parent))
            if parent_state == 1:
                raise GraphError("cycle detected")
            if parent_state is None:
                stack.append((parent, 0))
        else:
            state[key] = 2
            order.append(node)
    return order


def backward(loss: Node) -> dict[Node, np.ndarray]:
    """Accumulate d(loss)/d(leaf) into every reachable trainable leaf.

    Returns the leaf-to-gradient map. Calling twice on the same root is an
    error; rebuild the graph instead.
    """
    if loss.value.ndim != 0:
        raise GraphError(f"backward root must be scalar, got shape {loss.shape}")
    if loss._backward_done:
        raise GraphError("backward already ran on this graph")
    loss._backward_done = True
    if not loss.requires_grad:
        return {}

    order = _topological_order(loss)
    for node in order:
        if node.parents:
            node._grad = None
        node.finalized_at = None
    loss._grad = np.ones_like(loss.value)

    leaves: dict[Node, np.ndarray] = {}
    for node in reversed(order):
        node.finalized_at = next(_finalize_counter)
        if node.is_leaf:
            leaves[node] = node.grad
            continue
        rule = BACKWARD_RULES.get(node.op)
        if rule is None:
            raise GraphError(f"no backward rule for op {node.op!r}")
        grads = rule(node, node.grad)
        for parent, grad in zip(node.parents, grads, strict=True):
            if grad is None or not parent.requires_grad:
                continue
            if parent.finalized_at is not None and not parent.is_leaf:
                raise GraphError(f"gradient of {parent!r} consumed before it was final")
            if grad.shape != parent.shape:
                raise ShapeError(f"{node.op} backward", f"{grad.shape} vs {parent.shape}")
            parent._grad = parent.grad + grad
        if not np.all(np.isfinite(node.grad)):
            raise NonFiniteError(f"{node.op} backward")
    return leaves


def zero_grad(params: Iterable[Node]) -> None:
    for p in params:
        p.zero_grad()


def grad_norm(params: Iterable[Node]) -> float:
    """Global L2 norm of the accumulated gradients."""
    total = 0.0
    for p in params:
        total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> float:
    """max|a - n| / max(max|a|, max|n|, floor) for one tensor.

    The error is relative to the tensor's largest gradient entry. A tensor whose
    gradients all fall below ``floor`` is held to an absolute bound of
    ``floor`` times the tolerance.
    """
    diff = float(np.max(np.abs(analytic - numeric))) if analytic.size else 0.0
    scale_ = max(float(np.max(np.abs(analytic), initial=0.0)),
                 float(np.max(np.abs(numeric), initial=0.0)), floor)
    return diff / scale_


def numerical_gradient(
    fn: Callable[[], Node],
    param: Node,
    h: float = 1e-5,
    entries: Sequence[int] | None = None,
) -> np.ndarray:
    """Central differences of scalar ``fn()`` with respect to ``param``.

    Only the flat ``entries`` are perturbed when given; the rest stay zero.
    """
    if h <= 0:
        raise UsageError("finite-difference step must be positive")
    out = np.zeros_like(param.value)
    flat_value = param.value.reshape(-1)
    flat_out = out.reshape(-1)
    indices = range(flat_value.size) if entries is None else entries
    with no_grad():
        for i in indices:
            original = flat_value[i]
            flat_value[i] = original + h
            plus = fn().item()
            flat_value[i] = original - h
            minus = fn().item()
            flat_value[i] = original
            flat_out[i] = (plus - minus) / (2.0 * h)
    return out
