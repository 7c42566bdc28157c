"""Reverse-mode differentiation over dense 2-D float64 arrays.

Only the operations the completion models need are provided. Every op
returns a new :class:`Tensor` that remembers its parents and a closure
propagating the upstream gradient to them; :func:`backward` walks the
recorded graph in reverse topological order and accumulates into the
``grad`` buffers of parameter tensors.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn", "op", "name")

    def __init__(self, data, parents=(), backward_fn=None, op="const", name=None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 0:
            data = data.reshape(1, 1)
        elif data.ndim == 1:
            data = data.reshape(1, -1)
        elif data.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {data.shape}")
        self.data = data
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.name = name
        self.grad = np.zeros_like(data) if name is not None else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def requires_grad(self):
        return self.name is not None or bool(self.parents)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        label = self.name or self.op
        return f"Tensor({label}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    if shape[0] == 1 and grad.shape[0] != 1:
        grad = grad.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        grad = grad.sum(axis=1, keepdims=True)
    return grad


def _broadcast_ok(a, b):
    for x, y in zip(a, b):
        if x != y and x != 1 and y != 1:
            return False
    return True


def _elementwise(a, b, name):
    a, b = as_tensor(a), as_tensor(b)
    if not _broadcast_ok(a.shape, b.shape):
        raise ShapeError(f"{name}: incompatible shapes {a.shape} and {b.shape}")
    return a, b


def add(a, b) -> Tensor:
    a, b = _elementwise(a, b, "add")

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor(a.data + b.data, (a, b), back, "add")


def add_bias(x, b) -> Tensor:
    x, b = as_tensor(x), as_tensor(b)
    if b.shape != (1, x.shape[1]):
        raise ShapeError(f"add_bias: bias {b.shape} does not fit input {x.shape}")
    return add(x, b)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a, b) -> Tensor:
    a, b = _elementwise(a, b, "mul")

    def back(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor(a.data * b.data, (a, b), back, "mul")


def div(a, b) -> Tensor:
    a, b = _elementwise(a, b, "div")
    out = a.data / b.data

    def back(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * out / b.data, b.shape),
        )

    return Tensor(out, (a, b), back, "div")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")

    def back(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor(a.data @ b.data, (a, b), back, "matmul")


def weighted_sum(rows, weights) -> Tensor:
    """``weights @ rows``: each output row mixes the input rows."""
    return matmul(weights, rows)


def dot(a, b) -> Tensor:
    """Row-wise inner product, shape ``(n, 1)``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"dot: shapes {a.shape} and {b.shape} differ")
    return row_sum(mul(a, b))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data.T, (a,), lambda g: (g.T,), "transpose")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return Tensor(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def log_sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = -np.logaddexp(0.0, -a.data)
    return Tensor(out, (a,), lambda g: (g * _sigmoid(-a.data),), "log_sigmoid")


def logaddexp(a, b) -> Tensor:
    a, b = _elementwise(a, b, "logaddexp")
    out = np.logaddexp(a.data, b.data)

    def back(g):
        return (
            _unbroadcast(g * np.exp(a.data - out), a.shape),
            _unbroadcast(g * np.exp(b.data - out), b.shape),
        )

    return Tensor(out, (a, b), back, "logaddexp")


def concat(tensors, axis=1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    other = 1 - axis
    if len({t.shape[other] for t in tensors}) != 1:
        raise ShapeError(f"concat: mismatched shapes {[t.shape for t in tensors]}")
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g):
        return tuple(np.split(g, sizes, axis=axis))

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), back, "concat")


def row_sum(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(
        a.data.sum(axis=1, keepdims=True),
        (a,),
        lambda g: (np.broadcast_to(g, a.shape).copy(),),
        "row_sum",
    )


def total(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data.sum(), (a,), lambda g: (np.full(a.shape, g[0, 0]),), "sum")


def mean(a) -> Tensor:
    a = as_tensor(a)
    n = a.data.size
    return Tensor(a.data.mean(), (a,), lambda g: (np.full(a.shape, g[0, 0] / n),), "mean")


def _topo_order(root):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor) -> None:
    """Accumulate d root / d param into every named tensor reachable from ``root``."""
    if root.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape}")
    grads = {id(root): np.ones((1, 1))}
    for node in reversed(_topo_order(root)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.name is not None:
            node.grad += g
        if node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg


def relu_pattern(root: Tensor) -> np.ndarray:
    """Sign pattern of every relu input reachable from ``root`` (for kink detection)."""
    # relu outputs are fresh arrays, so they keep the pattern even after a
    # parameter that fed them is restored in place
    parts = [n.data.ravel() > 0 for n in _topo_order(root) if n.op == "relu"]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=bool)


class ParamStore:
    """Named parameters with gradient buffers and Adam moment estimates."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def __getitem__(self, name) -> Tensor:
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def add(self, name, value) -> Tensor:
        if name in self.params:
            raise KeyError(f"parameter {name!r} already exists")
        t = Tensor(np.array(value, dtype=np.float64), name=name)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def glorot(self, name, fan_in, fan_out, rng) -> Tensor:
        limit = np.sqrt(6.0 / (fan_in + fan_out)) if fan_in + fan_out else 0.0
        return self.add(name, rng.uniform(-limit, limit, size=(fan_in, fan_out)))

    def zeros(self, name, rows, cols) -> Tensor:
        return self.add(name, np.zeros((rows, cols)))

    def zero_grad(self):
        for t in self.params.values():
            t.grad[...] = 0.0

    def adam_step(self, lr=0.005, beta1=0.9, beta2=0.999, eps=1e-8):
        for name, t in self.params.items():
            if not np.all(np.isfinite(t.grad)):
                raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        self.step += 1
        c1 = 1.0 - beta1**self.step
        c2 = 1.0 - beta2**self.step
        for name, t in self.params.items():
            g = t.grad
            self.m[name] = beta1 * self.m[name] + (1.0 - beta1) * g
            self.v[name] = beta2 * self.v[name] + (1.0 - beta2) * g * g
            m_hat = self.m[name] / c1
            v_hat = self.v[name] / c2
            t.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        self.zero_grad()

    def copy(self) -> ParamStore:
        return copy.deepcopy(self)

    def values(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self.params.items()}

    def to_dict(self) -> dict:
        def enc(arr):
            return {"shape": list(arr.shape), "values": [float(x) for x in arr.ravel()]}

        return {
            "params": {k: enc(t.data) for k, t in self.params.items()},
            "optimizer": {
                "step": self.step,
                "m": {k: enc(a) for k, a in self.m.items()},
                "v": {k: enc(a) for k, a in self.v.items()},
            },
        }

    @classmethod
    def from_dict(cls, doc) -> ParamStore:
        def dec(entry):
            shape = tuple(entry["shape"])
            return np.array(entry["values"], dtype=np.float64).reshape(shape)

        store = cls()
        for name, entry in doc["params"].items():
            store.add(name, dec(entry))
        opt = doc["optimizer"]
        store.step = int(opt["step"])
        for name in store.params:
            store.m[name] = dec(opt["m"][name])
            store.v[name] = dec(opt["v"][name])
            if store.m[name].shape != store.params[name].shape:
                raise ShapeError(f"optimizer state for {name!r} has the wrong shape")
        return store


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    tolerance: float
    skipped: list = field(default_factory=list)
    worst: tuple | None = None

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} max_rel_error={self.max_rel_error:.3e} tolerance={self.tolerance:g} "
            f"checked={self.n_checked} skipped={len(self.skipped)}"
        )


def grad_check(closure, store: ParamStore, tolerance=1e-4, h=1e-5, floor=1e-6, names=None):
    """Compare backprop gradients with central differences, entry by entry.

    ``closure()`` must rebuild the forward pass and return a scalar tensor.
    The relative error is ``|a - n| / max(|a|, |n|, floor)``. Entries whose
    perturbation flips the sign of any relu input straddle a kink and are
    skipped rather than compared.
    """
    store.zero_grad()
    loss = closure()
    backward(loss)
    analytic = {k: t.grad.copy() for k, t in store.params.items()}
    store.zero_grad()
    worst, worst_at, checked, skipped = 0.0, None, 0, []
    for name in names or list(store.params):
        data = store[name].data
        for idx in np.ndindex(data.shape):
            orig = data[idx]
            data[idx] = orig + h
            up = closure()
            data[idx] = orig - h
            down = closure()
            data[idx] = orig
            if not np.array_equal(relu_pattern(up), relu_pattern(down)):
                skipped.append((name, idx))
                continue
            numeric = (up.item() - down.item()) / (2 * h)
            a = analytic[name][idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            checked += 1
            if err > worst:
                worst, worst_at = err, (name, idx, a, numeric)
    return GradCheckReport(worst, checked, tolerance, skipped, worst_at)
