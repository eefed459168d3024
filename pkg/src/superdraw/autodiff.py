"""Reverse-mode automatic differentiation on a small array-valued tape.

A `Tensor` wraps a float64 ndarray and records how it was produced; calling
`backward()` on a scalar result walks the recorded graph in reverse
topological order and accumulates gradients into every leaf. Nodes hold whole
arrays (a batch of simulation paths, a layer of activations), so the tape
stays short even when the computation spans a 40-year wealth recursion.

Kink handling is deliberate and uniform: ReLU, max, min and clamp all pass
the gradient to the strict winner only, and pass nothing on exact ties. The
training objective is piecewise smooth (pension tests, depletion floor) and
ties sit on measure-zero sets, so this is the standard subgradient choice.

The module-level `maximum`, `minimum`, `exp`, `log`, `sigmoid`, `relu` and
`stack_rows` helpers dispatch on their arguments: given plain ndarrays they
call numpy directly, given a Tensor they build tape nodes. Formula code
written against these helpers (the pension rules, the wealth transition)
therefore runs identically in plain-numpy evaluation and in differentiable
training, which is what keeps the two code paths from drifting apart.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "as_tensor",
    "maximum",
    "minimum",
    "exp",
    "log",
    "sigmoid",
    "relu",
    "stack_rows",
]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, (g, s) in enumerate(zip(grad.shape, shape)):
        if s == 1 and g != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """One node of the computation tape."""

    __slots__ = ("value", "grad", "_parents", "_backward")

    # Make numpy defer mixed ndarray-Tensor arithmetic to the reflected
    # operators below instead of looping elementwise into an object array.
    __array_ufunc__ = None

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = backward

    # ------------------------------------------------------------------ infra

    @property
    def shape(self):
        return self.value.shape

    def _accum(self, g: np.ndarray) -> None:
        g = _unbroadcast(np.asarray(g, dtype=np.float64), self.value.shape)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def backward(self, seed=None) -> None:
        """Accumulate gradients of `self` into every reachable node.

        `seed` is the gradient of the final objective w.r.t. this node;
        defaults to ones (i.e. differentiate `self.sum()` elementwise).
        """
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        if seed is None:
            seed = np.ones_like(self.value)
        self._accum(seed)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, leaf={self._backward is None})"

    # ------------------------------------------------------------- arithmetic

    def __add__(self, other):
        o = as_tensor(other)
        out = Tensor(self.value + o.value, (self, o))

        def back(g):
            self._accum(g)
            o._accum(g)

        out._backward = back
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.value, (self,))
        out._backward = lambda g: self._accum(-g)
        return out

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        o = as_tensor(other)
        out = Tensor(self.value * o.value, (self, o))

        def back(g):
            self._accum(g * o.value)
            o._accum(g * self.value)

        out._backward = back
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = as_tensor(other)
        out = Tensor(self.value / o.value, (self, o))

        def back(g):
            self._accum(g / o.value)
            o._accum(-g * self.value / (o.value * o.value))

        out._backward = back
        return out

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("only constant real exponents are supported")
        p = float(p)
        out = Tensor(self.value ** p, (self,))
        out._backward = lambda g: self._accum(g * p * self.value ** (p - 1.0))
        return out

    def __matmul__(self, other):
        o = as_tensor(other)
        out = Tensor(self.value @ o.value, (self, o))

        def back(g):
            self._accum(g @ o.value.T)
            o._accum(self.value.T @ g)

        out._backward = back
        return out

    # ------------------------------------------------------------ reductions

    def sum(self):
        out = Tensor(self.value.sum(), (self,))
        out._backward = lambda g: self._accum(np.broadcast_to(g, self.value.shape))
        return out

    def mean(self):
        n = self.value.size
        out = Tensor(self.value.mean(), (self,))
        out._backward = lambda g: self._accum(
            np.broadcast_to(g / n, self.value.shape)
        )
        return out

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        src = self.value.shape
        out = Tensor(self.value.reshape(shape), (self,))
        out._backward = lambda g: self._accum(g.reshape(src))
        return out


def as_tensor(x) -> Tensor:
    """Wrap a value as a (leaf) Tensor; pass Tensors through unchanged."""
    return x if isinstance(x, Tensor) else Tensor(x)


def _is_t(*xs) -> bool:
    return any(isinstance(x, Tensor) for x in xs)


# ------------------------------------------------------ dispatching helpers


def maximum(a, b):
    """Elementwise max; gradient flows to the strict winner only."""
    if not _is_t(a, b):
        return np.maximum(a, b)
    ta, tb = as_tensor(a), as_tensor(b)
    out = Tensor(np.maximum(ta.value, tb.value), (ta, tb))

    def back(g):
        ta._accum(g * (ta.value > tb.value))
        tb._accum(g * (tb.value > ta.value))

    out._backward = back
    return out


def minimum(a, b):
    """Elementwise min; gradient flows to the strict winner only."""
    if not _is_t(a, b):
        return np.minimum(a, b)
    ta, tb = as_tensor(a), as_tensor(b)
    out = Tensor(np.minimum(ta.value, tb.value), (ta, tb))

    def back(g):
        ta._accum(g * (ta.value < tb.value))
        tb._accum(g * (tb.value < ta.value))

    out._backward = back
    return out


def exp(x):
    if not _is_t(x):
        return np.exp(x)
    out = Tensor(np.exp(x.value), (x,))
    out._backward = lambda g: x._accum(g * out.value)
    return out


def log(x):
    if not _is_t(x):
        return np.log(x)
    out = Tensor(np.log(x.value), (x,))
    out._backward = lambda g: x._accum(g / x.value)
    return out


def _sigmoid_values(v: np.ndarray) -> np.ndarray:
    # Two-sided form avoids overflow in exp for large |v|.
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(x):
    if not _is_t(x):
        return _sigmoid_values(np.asarray(x, dtype=np.float64))
    s = _sigmoid_values(x.value)
    out = Tensor(s, (x,))
    out._backward = lambda g: x._accum(g * s * (1.0 - s))
    return out


def relu(x):
    return maximum(x, 0.0)


def stack_rows(rows):
    """Stack 1-d rows into a 2-d array; rows may mix Tensors and ndarrays."""
    if not _is_t(*rows):
        return np.stack([np.asarray(r, dtype=np.float64) for r in rows])
    ts = [as_tensor(r) for r in rows]
    out = Tensor(np.stack([t.value for t in ts]), tuple(ts))

    def back(g):
        for i, t in enumerate(ts):
            t._accum(g[i])

    out._backward = back
    return out
