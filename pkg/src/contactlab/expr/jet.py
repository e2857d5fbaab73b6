"""Batched second-order jets of scalar functions.

A :class:`Jet` stores, for N points in an ambient space of dimension D,
the value (N,), gradient (N, D) and Hessian (N, D, D) of a scalar function.
``order`` says how many of these are meaningful (0, 1 or 2); arithmetic
keeps the smallest order of its operands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DepthExceeded, DomainError

MAX_ORDER = 2


def check_order(order: int) -> None:
    if order > MAX_ORDER:
        raise DepthExceeded(f"derivative order {order} exceeds the supported maximum {MAX_ORDER}",
                            {"order": order})
    if order < 0:
        raise ValueError("negative jet order")


@dataclass(eq=False)
class Jet:
    val: np.ndarray
    grad: np.ndarray | None = None
    hess: np.ndarray | None = None

    @property
    def order(self) -> int:
        if self.grad is None:
            return 0
        if self.hess is None:
            return 1
        return 2

    @property
    def n(self) -> int:
        return self.val.shape[0]

    @property
    def dim(self) -> int:
        return 0 if self.grad is None else self.grad.shape[1]

    # constructors
    @staticmethod
    def const(value, n: int, dim: int, order: int) -> "Jet":
        val = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
        grad = np.zeros((n, dim)) if order >= 1 else None
        hess = np.zeros((n, dim, dim)) if order >= 2 else None
        return Jet(val, grad, hess)

    @staticmethod
    def zeros(n: int, dim: int, order: int) -> "Jet":
        return Jet.const(0.0, n, dim, order)

    @staticmethod
    def coordinate(values: np.ndarray, index: int, dim: int, order: int) -> "Jet":
        n = values.shape[0]
        grad = None
        hess = None
        if order >= 1:
            grad = np.zeros((n, dim))
            grad[:, index] = 1.0
        if order >= 2:
            hess = np.zeros((n, dim, dim))
        return Jet(np.asarray(values, dtype=float).copy(), grad, hess)

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        return Jet(self.val, self.grad if order >= 1 else None, None)

    def deriv(self, i: int) -> "Jet":
        """Jet of the partial derivative along coordinate ``i`` (one order lower)."""
        if self.order == 0:
            raise DepthExceeded("cannot differentiate an order-0 jet")
        g = self.grad[:, i]
        h = self.hess[:, i, :] if self.order >= 2 else None
        return Jet(g.copy(), h, None)

    def take(self, idx) -> "Jet":
        return Jet(self.val[idx], None if self.grad is None else self.grad[idx],
                   None if self.hess is None else self.hess[idx])

    # arithmetic
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.const(other, self.n, max(self.dim, 0), self.order)

    def __add__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return Jet(self.val + other, self.grad, self.hess)
        o = min(self.order, other.order)
        return Jet(self.val + other.val,
                   self.grad + other.grad if o >= 1 else None,
                   self.hess + other.hess if o >= 2 else None)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(-self.val, None if self.grad is None else -self.grad,
                   None if self.hess is None else -self.hess)

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def scale(self, c) -> "Jet":
        """Multiply by a per-point constant array or scalar (no derivative)."""
        c = np.asarray(c, dtype=float)
        cg = c[:, None] if c.ndim else c
        ch = c[:, None, None] if c.ndim else c
        return Jet(self.val * c,
                   None if self.grad is None else self.grad * cg,
                   None if self.hess is None else self.hess * ch)

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return self.scale(other)
        o = min(self.order, other.order)
        a, b = self, other
        val = a.val * b.val
        grad = hess = None
        if o >= 1:
            grad = a.grad * b.val[:, None] + b.grad * a.val[:, None]
        if o >= 2:
            cross = a.grad[:, :, None] * b.grad[:, None, :]
            hess = (a.hess * b.val[:, None, None] + b.hess * a.val[:, None, None]
                    + cross + np.swapaxes(cross, 1, 2))
        return Jet(val, grad, hess)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return self.scale(1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "Jet":
        return self.reciprocal() * other

    def reciprocal(self) -> "Jet":
        v = self.val
        bad = v == 0.0
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise DomainError("division by zero", {"index": i})
        inv = 1.0 / v
        return self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def chain(self, f0, f1, f2) -> "Jet":
        """Compose with a univariate function given its value and first two derivatives."""
        o = self.order
        grad = hess = None
        if o >= 1:
            grad = f1[:, None] * self.grad
        if o >= 2:
            hess = (f2[:, None, None] * self.grad[:, :, None] * self.grad[:, None, :]
                    + f1[:, None, None] * self.hess)
        return Jet(np.asarray(f0, dtype=float), grad, hess)

    def __pow__(self, p) -> "Jet":
        from .functions import power

        return power(self, p)


def chain2(a: Jet, b: Jet, f, fa, fb, faa, fab, fbb) -> Jet:
    """Compose with a bivariate function given its partial derivatives."""
    o = min(a.order, b.order)
    grad = hess = None
    if o >= 1:
        grad = fa[:, None] * a.grad + fb[:, None] * b.grad
    if o >= 2:
        ga, gb = a.grad, b.grad
        ab = ga[:, :, None] * gb[:, None, :]
        hess = (faa[:, None, None] * ga[:, :, None] * ga[:, None, :]
                + fab[:, None, None] * (ab + np.swapaxes(ab, 1, 2))
                + fbb[:, None, None] * gb[:, :, None] * gb[:, None, :]
                + fa[:, None, None] * a.hess + fb[:, None, None] * b.hess)
    return Jet(np.asarray(f, dtype=float), grad, hess)


def is_constant(j: Jet) -> bool:
    """True when the jet carries no first-order variation."""
    return j.grad is None or not np.any(j.grad)
