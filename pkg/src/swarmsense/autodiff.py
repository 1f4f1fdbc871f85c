"""Minimal reverse-mode autodiff over float64 arrays.

Only the operations the policy network needs are provided. Every value is a
2-D array; single vectors are carried as one-row matrices. Gradients
accumulate on leaf tensors across backward calls until explicitly cleared,
which is what batched policy-gradient training wants.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "parents", "vjp")

    def __init__(self, data, parents=(), vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.vjp = vjp  # callable(out_grad) -> tuple of parent gradients

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def tensor(data) -> Tensor:
    """Wrap a constant or parameter leaf."""
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.data, (a,), lambda g: (-g,))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return Tensor(a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def transpose(a: Tensor) -> Tensor:
    return Tensor(a.data.T, (a,), lambda g: (g.T,))


def concat(parts: list[Tensor], axis: int) -> Tensor:
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), vjp)


def row(a: Tensor, i: int) -> Tensor:
    def vjp(g):
        out = np.zeros_like(a.data)
        out[i : i + 1] = g
        return (out,)

    return Tensor(a.data[i : i + 1], (a,), vjp)


def cols(a: Tensor, j0: int, j1: int) -> Tensor:
    def vjp(g):
        out = np.zeros_like(a.data)
        out[:, j0:j1] = g
        return (out,)

    return Tensor(a.data[:, j0:j1], (a,), vjp)


def pick(a: Tensor, i: int, j: int) -> Tensor:
    """Select one element as a (1, 1) tensor."""

    def vjp(g):
        out = np.zeros_like(a.data)
        out[i, j] = g[0, 0]
        return (out,)

    return Tensor(a.data[i, j].reshape(1, 1), (a,), vjp)


def sigmoid(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))
    return Tensor(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return Tensor(t, (a,), lambda g: (g * (1.0 - t * t),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    return Tensor(a.data * mask, (a,), lambda g: (g * mask,))


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.data)
    return Tensor(e, (a,), lambda g: (g * e,))


def log(a: Tensor) -> Tensor:
    return Tensor(np.log(a.data), (a,), lambda g: (g / a.data,))


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax, stabilized by max subtraction."""
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        inner = (g * p).sum(axis=1, keepdims=True)
        return (p * (g - inner),)

    return Tensor(p, (a,), vjp)


def sum_all(a: Tensor) -> Tensor:
    return Tensor(
        np.array([[a.data.sum()]]),
        (a,),
        lambda g: (np.full_like(a.data, g[0, 0]),),
    )


def sum_list(parts: list[Tensor]) -> Tensor:
    """Sum same-shaped tensors in one node; keeps loss graphs shallow."""
    if not parts:
        raise ValueError("sum_list needs at least one tensor")
    out = parts[0].data.copy()
    for p in parts[1:]:
        out += p.data

    def vjp(g):
        return tuple(g for _ in parts)

    return Tensor(out, tuple(parts), vjp)


def backward(root: Tensor, seed: np.ndarray | None = None) -> None:
    """Accumulate gradients of `root` into every reachable leaf.

    `seed` is the upstream gradient (defaults to ones). Iterative topological
    order, so episode-length chains do not hit the recursion limit.
    """
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, children_done = stack.pop()
        if children_done:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {
        id(root): np.ones_like(root.data) if seed is None else np.asarray(seed, dtype=np.float64)
    }
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.vjp is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
