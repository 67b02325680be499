"""Minimal reverse-mode autodiff over numpy arrays.

A ``Var`` wraps an ndarray (or scalar) and records elementwise arithmetic so
that ``backward()`` can accumulate exact cotangents into the leaves.  This is
deliberately tiny: it only has to differentiate loss expressions built from
network jet components, which are sums, products with constant arrays,
integer powers, and a final mean/sum reduction.
"""

from __future__ import annotations

import numpy as np


class Var:
    """Node in a reverse-mode tape holding an array value and its cotangent."""

    # keep numpy from consuming `ndarray op Var` so our __r*__ hooks fire
    __array_ufunc__ = None

    __slots__ = ("value", "grad", "_parents")

    def __init__(self, value, parents=()):
        self.value = value
        self.grad = None
        self._parents = parents  # tuple of (Var, local_backward)

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Var):
            return Var(self.value + other.value,
                       ((self, lambda g: g), (other, lambda g: g)))
        return Var(self.value + other, ((self, lambda g: g),))

    __radd__ = __add__

    def __neg__(self):
        return Var(-self.value, ((self, lambda g: -g),))

    def __sub__(self, other):
        if isinstance(other, Var):
            return Var(self.value - other.value,
                       ((self, lambda g: g), (other, lambda g: -g)))
        return Var(self.value - other, ((self, lambda g: g),))

    def __rsub__(self, other):
        return Var(other - self.value, ((self, lambda g: -g),))

    def __mul__(self, other):
        if isinstance(other, Var):
            return Var(self.value * other.value,
                       ((self, lambda g, o=other.value: g * o),
                        (other, lambda g, s=self.value: g * s)))
        return Var(self.value * other, ((self, lambda g, o=other: g * o),))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("Var/Var division is not supported on the tape")
        return self * (1.0 / other)

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only numeric exponents are supported")
        return Var(self.value ** exponent,
                   ((self, lambda g, n=exponent, v=self.value:
                     g * n * v ** (n - 1)),))

    # -- reductions ------------------------------------------------------

    def sum(self):
        return Var(np.sum(self.value),
                   ((self, lambda g, s=np.shape(self.value):
                     np.broadcast_to(g, s)),))

    def mean(self):
        size = np.size(self.value)
        return Var(np.mean(self.value),
                   ((self, lambda g, s=np.shape(self.value), n=size:
                     np.broadcast_to(g / n, s)),))

    # -- reverse pass ----------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable node's ``grad``."""
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
            for parent, _ in node._parents:
                stack.append((parent, False))

        for node in order:
            node.grad = np.zeros_like(np.asarray(node.value, dtype=float))
        self.grad = np.ones_like(np.asarray(self.value, dtype=float))

        for node in reversed(order):
            for parent, pull in node._parents:
                parent.grad = parent.grad + pull(node.grad)

    def __repr__(self):
        return f"Var({self.value!r})"
