"""Reverse-mode tape over float64 numpy arrays."""
from __future__ import annotations

import os

import numpy as np

from ..errors import NonFiniteGradient

# set TUNPD_CHECK_FINITE=1 to assert finiteness after every op and backward step
DEBUG_FINITE = os.environ.get("TUNPD_CHECK_FINITE", "") not in ("", "0")


class Tensor:
    """A node in the graph: value, gradient accumulator and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 parents: tuple = (), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = parents
        self._backward = backward
        if DEBUG_FINITE and not np.all(np.isfinite(self.data)):
            raise NonFiniteGradient(f"non-finite value produced in {name or 'op'}")

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        """Propagate from this node. A scalar output seeds with 1."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topo(self)
        self.accumulate(np.asarray(grad, dtype=np.float64).reshape(self.shape))
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            node._backward(node.grad)
            if DEBUG_FINITE:
                for p in node._parents:
                    if p.grad is not None and not np.all(np.isfinite(p.grad)):
                        raise NonFiniteGradient(f"non-finite gradient flowing into {p!r}")
            if node is not self:
                # intermediates free their buffers; leaves have no closure
                node.grad = None


def _topo(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
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
            if id(p) not in seen and (p.requires_grad or p._parents):
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make(data, parents, backward, name=None) -> Tensor:
    """Output node; it only records the closure if some parent needs a gradient."""
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data, name=name)
    return Tensor(data, requires_grad=True, name=name, parents=tuple(parents), backward=backward)
