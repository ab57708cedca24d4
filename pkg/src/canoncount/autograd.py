"""Small reverse-mode autodiff over 2-D float64 arrays.

Only the operators the two learned stages need are provided.  Each op
records its parents and a backward closure; ``Tensor.backward`` replays the
recorded tape in reverse topological order.
"""
from __future__ import annotations

import json
from collections import OrderedDict
from pathlib import Path

import numpy as np
import scipy.sparse as sp

LEAKY_SLOPE = 0.01
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values produced by {what}")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, op=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op})"

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -_as_tensor(other))

    def __rsub__(self, other):
        return add(_as_tensor(other), -self)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _result(data, parents, backward, op):
    _check_finite(data, op)
    return Tensor(data, _parents=tuple(parents), _backward=backward, op=op)


def _broadcastable(a, b):
    for x, y in zip(a, b):
        if x != y and x != 1 and y != 1:
            return False
    return True


# ---------------------------------------------------------------------------
# primitives


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} @ {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _result(a.data @ b.data, (a, b), backward, "matmul")


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if not _broadcastable(a.shape, b.shape):
        raise ShapeError(f"add shapes {a.shape} + {b.shape}")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), backward, "add")


def mul(a, b):
    """Elementwise product with row/column broadcasting."""
    a, b = _as_tensor(a), _as_tensor(b)
    if not _broadcastable(a.shape, b.shape):
        raise ShapeError(f"mul shapes {a.shape} * {b.shape}")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), backward, "mul")


def leaky_relu(x, slope=LEAKY_SLOPE):
    x = _as_tensor(x)
    scale = np.where(x.data > 0, 1.0, slope)

    def backward(g):
        return (g * scale,)

    return _result(x.data * scale, (x,), backward, "leaky_relu")


def sigmoid(x):
    x = _as_tensor(x)
    # split form avoids exp overflow for large |x|
    z = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))

    def backward(g):
        return (g * out * (1.0 - out),)

    return _result(out, (x,), backward, "sigmoid")


def concat(tensors, axis=1):
    tensors = [_as_tensor(t) for t in tensors]
    other = 1 - axis
    if len({t.shape[other] for t in tensors}) != 1:
        raise ShapeError(f"concat along axis {axis}: mismatched shapes {[t.shape for t in tensors]}")
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")


def gather_rows(x, index):
    """``out[i] = x[index[i]]``."""
    x = _as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.shape[0]):
        raise ShapeError("gather index out of range")
    n = x.shape[0]

    def backward(g):
        return (scatter_matrix(index, n) @ g,)

    return _result(x.data[index], (x,), backward, "gather_rows")


def scatter_matrix(index, num_groups):
    """Sparse (num_groups, len(index)) matrix summing rows into their group."""
    index = np.asarray(index, dtype=np.int64)
    cols = np.arange(index.size)
    return sp.csr_matrix((np.ones(index.size), (index, cols)), shape=(num_groups, index.size))


def sparse_matmul(matrix, x):
    """Constant sparse matrix times a tensor (no gradient w.r.t. the matrix)."""
    x = _as_tensor(x)
    if matrix.shape[1] != x.shape[0]:
        raise ShapeError(f"sparse_matmul shapes {matrix.shape} @ {x.shape}")
    mt = matrix.T.tocsr()

    def backward(g):
        return (np.asarray(mt @ g),)

    return _result(np.asarray(matrix @ x.data), (x,), backward, "sparse_matmul")


def scatter_add(x, index, num_groups):
    """Sum rows of ``x`` by group id: ``out[k] = sum_{i: index[i]==k} x[i]``."""
    x = _as_tensor(x)
    if len(index) != x.shape[0]:
        raise ShapeError("scatter_add index length must equal the number of rows")
    return sparse_matmul(scatter_matrix(index, num_groups), x)


def sum_all(x):
    x = _as_tensor(x)

    def backward(g):
        return (np.full(x.shape, float(g.reshape(-1)[0])),)

    return _result(np.array([[x.data.sum()]]), (x,), backward, "sum_all")


def mean_all(x):
    x = _as_tensor(x)
    return mul(sum_all(x), 1.0 / x.data.size)


# ---------------------------------------------------------------------------
# loss


def smooth_l1(pred: float, target: float, beta: float = 1.0):
    """Scalar SmoothL1: returns ``(loss, d loss / d pred)``."""
    diff = pred - target
    if abs(diff) < beta:
        return 0.5 * diff * diff / beta, diff / beta
    return abs(diff) - 0.5 * beta, float(np.sign(diff))


def smooth_l1_loss(pred, target, beta: float = 1.0):
    """Mean SmoothL1 over all entries of ``pred`` against a constant ``target`` array."""
    pred = _as_tensor(pred)
    target = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    diff = pred.data - target
    small = np.abs(diff) < beta
    vals = np.where(small, 0.5 * diff * diff / beta, np.abs(diff) - 0.5 * beta)
    dvals = np.where(small, diff / beta, np.sign(diff)) / diff.size

    def backward(g):
        return (g.reshape(-1)[0] * dvals,)

    return _result(np.array([[vals.mean()]]), (pred,), backward, "smooth_l1_loss")


# ---------------------------------------------------------------------------
# parameters, optimiser, checkpoints


def glorot(rng, fan_in, fan_out, gain=1.0):
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class ParamStore:
    """Named parameter tensors plus Adam moment buffers."""

    def __init__(self):
        self.params = OrderedDict()
        self.m = {}
        self.v = {}
        self.t = 0

    def add(self, name, value) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        value = np.asarray(value, dtype=np.float64)
        if value.ndim == 1:
            value = value.reshape(1, -1)
        t = Tensor(value, requires_grad=True)
        self.params[name] = t
        return t

    def __getitem__(self, name) -> Tensor:
        return self.params[name]

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def grads(self) -> dict:
        return {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in self.params.items()}

    def num_scalars(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def state(self) -> OrderedDict:
        return OrderedDict((k, t.data.copy()) for k, t in self.params.items())

    def load_state(self, state) -> None:
        for k, arr in state.items():
            arr = np.asarray(arr, dtype=np.float64)
            if k not in self.params:
                raise KeyError(f"unknown parameter {k!r}")
            if arr.shape != self.params[k].shape:
                raise ShapeError(f"{k}: checkpoint shape {arr.shape} != {self.params[k].shape}")
            self.params[k].data = arr.copy()


def adam_step(params: ParamStore, grads: dict, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, t=None) -> ParamStore:
    """One Adam update with bias correction, in place."""
    b1, b2 = betas
    if t is None:
        params.t += 1
        t = params.t
    else:
        params.t = t
    if t < 1:
        raise ValueError("Adam step counter must be >= 1")
    for name, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        p = params.params[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {name}")
        m = params.m.get(name, np.zeros_like(g))
        v = params.v.get(name, np.zeros_like(g))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        params.m[name], params.v[name] = m, v
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


class Adam:
    def __init__(self, params: ParamStore, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr, self.betas, self.eps = lr, betas, eps

    def step(self):
        adam_step(self.params, self.params.grads(), self.lr, self.betas, self.eps)


def save_checkpoint(path, kind: str, hyperparameters: dict, params: ParamStore, extra=None) -> None:
    doc = {
        "format": "canoncount-checkpoint",
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "hyperparameters": hyperparameters,
        "tensors": {
            name: {"shape": list(t.shape), "values": t.data.reshape(-1).tolist()} for name, t in params
        },
    }
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "canoncount-checkpoint":
        raise ValueError(f"{path}: not a checkpoint file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    doc["state"] = OrderedDict(
        (k, np.asarray(t["values"], dtype=np.float64).reshape(t["shape"])) for k, t in doc["tensors"].items()
    )
    return doc
