"""Reverse-mode automatic differentiation over dense float64 arrays.

The primitive set is deliberately small: exactly what the encoder and the
three episode losses need. No general broadcasting -- row/column broadcasts
are expressed as matmuls with constant ones-matrices by the callers.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteError, ShapeMismatchError, TapeError

# l2_normalize treats anything shorter than this as the zero vector.
DEGENERATE_NORM = 1e-9


class Tape:
    """Ordered record of primitive applications.

    Nodes are appended in creation order, which is already a topological
    order, so the backward pass just walks the list in reverse. A tape can
    be replayed backward any number of times; adjoints are reset each call.
    """

    def __init__(self):
        self.nodes = []
        self.degenerate_normalize = False

    def _record(self, tensor):
        tensor.index = len(self.nodes)
        self.nodes.append(tensor)
        return tensor


class Tensor:
    __slots__ = ("data", "tape", "grad", "parents", "vjp", "index", "primitive")

    def __init__(self, tape, data, parents=(), vjp=None, primitive="leaf"):
        self.tape = tape
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.vjp = vjp
        self.primitive = primitive
        tape._record(self)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor({self.primitive}, shape={self.data.shape}, node={self.index})"


def leaf(tape, data):
    """A differentiable input."""
    t = Tensor(tape, data)
    _check_finite(t)
    return t


def constant(tape, data):
    """A non-differentiable input. Structurally a leaf; its gradient is ignored."""
    t = Tensor(tape, data, primitive="constant")
    _check_finite(t)
    return t


def _check_finite(t):
    if not np.all(np.isfinite(t.data)):
        raise NonFiniteError(t.primitive, node_index=t.index)


def _op(tape, data, parents, vjp, primitive):
    t = Tensor(tape, data, parents=parents, vjp=vjp, primitive=primitive)
    _check_finite(t)
    return t


def _same_tape(*tensors):
    tape = tensors[0].tape
    for t in tensors[1:]:
        if t.tape is not tape:
            raise TapeError("operands recorded on different tapes")
    return tape


def add(a, b):
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ShapeMismatchError("add", a.shape, b.shape)
    return _op(tape, a.data + b.data, (a, b), lambda g: (g, g), "add")


def neg(a):
    return _op(a.tape, -a.data, (a,), lambda g: (-g,), "neg")


def sub(a, b):
    return add(a, neg(b))


def mul(a, b):
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ShapeMismatchError("mul", a.shape, b.shape)
    return _op(tape, a.data * b.data, (a, b),
               lambda g: (g * b.data, g * a.data), "mul")


def scale(a, c):
    c = float(c)
    return _op(a.tape, a.data * c, (a,), lambda g: (g * c,), "scale")


def matmul(a, b):
    tape = _same_tape(a, b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError("matmul", a.shape, b.shape)
    return _op(tape, a.data @ b.data, (a, b),
               lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def transpose(a):
    if a.data.ndim != 2:
        raise ShapeMismatchError("transpose", a.shape)
    return _op(a.tape, a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def exp(a):
    # overflow surfaces as a structured NonFiniteError inside _op, so the
    # numpy warning is redundant noise
    with np.errstate(over="ignore"):
        out_data = np.exp(a.data)
    return _op(a.tape, out_data, (a,), lambda g: (g * out_data,), "exp")


def log(a):
    if np.any(a.data <= 0):
        raise NonFiniteError("log", detail="non-positive argument")
    return _op(a.tape, np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def relu(a):
    mask = a.data > 0
    return _op(a.tape, np.where(mask, a.data, 0.0), (a,),
               lambda g: (g * mask,), "relu")


def asum(a):
    """Sum of all elements -> scalar."""
    shp = a.shape
    return _op(a.tape, np.sum(a.data), (a,),
               lambda g: (np.full(shp, g),), "sum")


def dot(a, b):
    tape = _same_tape(a, b)
    if a.data.ndim != 1 or b.data.ndim != 1 or a.shape != b.shape:
        raise ShapeMismatchError("dot", a.shape, b.shape)
    return _op(tape, np.dot(a.data, b.data), (a, b),
               lambda g: (g * b.data, g * a.data), "dot")


def l2_normalize(a):
    """Unit-normalize a vector, or each row of a matrix.

    Rows with norm < DEGENERATE_NORM map to the zero vector (gradient zero)
    and set the tape's degenerate flag.
    """
    vec = a.data.ndim == 1
    x = a.data.reshape(1, -1) if vec else a.data
    if x.ndim != 2:
        raise ShapeMismatchError("l2_normalize", a.shape)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    ok = norms >= DEGENERATE_NORM
    if not np.all(ok):
        a.tape.degenerate_normalize = True
    safe = np.where(ok, norms, 1.0)
    y = np.where(ok, x / safe, 0.0)

    def vjp(g):
        g2 = g.reshape(1, -1) if vec else g
        # d(x/||x||) vjp: (g - (g.y) y) / ||x||, zero on degenerate rows
        gy = np.sum(g2 * y, axis=1, keepdims=True)
        out = np.where(ok, (g2 - gy * y) / safe, 0.0)
        return (out.reshape(a.shape),)

    return _op(a.tape, y.reshape(a.shape), (a,), vjp, "l2_normalize")


def pairwise_sqdist(a, b):
    """Squared euclidean distances between rows of a (q x d) and b (c x d)."""
    tape = _same_tape(a, b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeMismatchError("pairwise_sqdist", a.shape, b.shape)
    diff = a.data[:, None, :] - b.data[None, :, :]  # q x c x d
    out = np.sum(diff * diff, axis=2)

    def vjp(g):
        w = 2.0 * g[:, :, None] * diff
        return (np.sum(w, axis=1), -np.sum(w, axis=0))

    return _op(tape, out, (a, b), vjp, "pairwise_sqdist")


def backward(root):
    """Accumulate gradients of the scalar `root` into every node's .grad.

    Resets all adjoints first, so repeated calls on the same tape are
    bitwise-identical. Leaves not on a path to the root get exact zeros.
    """
    if root.data.ndim != 0:
        raise TapeError(f"backward root must be scalar, got shape {root.shape}")
    tape = root.tape
    for node in tape.nodes:
        node.grad = np.zeros_like(node.data)
    root.grad = np.ones_like(root.data)
    for node in reversed(tape.nodes[: root.index + 1]):
        if node.vjp is None or not np.any(node.grad):
            continue
        for parent, pgrad in zip(node.parents, node.vjp(node.grad)):
            parent.grad = parent.grad + pgrad


def grad_check(fn, point, step=1e-5):
    """Compare an analytic gradient against central finite differences.

    `fn(x)` must return `(value, grad)` for a 1-D float64 point. Returns the
    max over coordinates of |analytic - central| / max(1, |central|).
    """
    x0 = np.asarray(point, dtype=np.float64)
    value, grad = fn(x0)
    grad = np.asarray(grad, dtype=np.float64)
    if not np.isfinite(value):
        raise NonFiniteError("grad_check", detail="non-finite at base point")
    worst = 0.0
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp.flat[i] += step
        xm.flat[i] -= step
        fp, _ = fn(xp)
        fm, _ = fn(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError("grad_check",
                                 detail=f"non-finite when perturbing coordinate {i}")
        central = (fp - fm) / (2.0 * step)
        err = abs(grad.flat[i] - central) / max(1.0, abs(central))
        worst = max(worst, err)
    return worst
