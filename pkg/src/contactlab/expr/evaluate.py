"""Vectorized jet evaluation of expression trees."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import UnknownIdentifier
from .ast import CONSTANTS, BinOp, Call, Const, Expr, Neg, Num, Var
from .functions import FUNCTIONS, power
from .jet import Jet, check_order


def evaluate(e: Expr, env: Mapping[str, Jet], n: int, dim: int, order: int) -> Jet:
    """Evaluate ``e`` with every name bound to a jet over the same ``n`` points.

    Plain numbers or (n,) arrays in ``env`` are treated as parameters with no
    derivative.
    """
    check_order(order)
    return _Evaluator(env, n, dim, order).run(e)


class _Evaluator:
    def __init__(self, env: Mapping[str, Jet], n: int, dim: int, order: int):
        self.env = env
        self.n = n
        self.dim = dim
        self.order = order
        self._memo: dict[int, Jet] = {}

    def const(self, v) -> Jet:
        return Jet.const(v, self.n, self.dim, self.order)

    def run(self, e: Expr) -> Jet:
        key = id(e)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = self._eval(e)
        self._memo[key] = out
        return out

    def _eval(self, e: Expr) -> Jet:
        if isinstance(e, Num):
            return self.const(e.value)
        if isinstance(e, Const):
            return self.const(CONSTANTS[e.name])
        if isinstance(e, Var):
            try:
                v = self.env[e.name]
            except KeyError:
                raise UnknownIdentifier(e.name) from None
            if isinstance(v, Jet):
                return v.truncate(self.order)
            return self.const(v)
        if isinstance(e, Neg):
            return -self.run(e.operand)
        if isinstance(e, BinOp):
            if e.op == "^":
                base = self.run(e.left)
                if isinstance(e.right, Num):
                    return power(base, e.right.value)
                return power(base, self.run(e.right))
            a = self.run(e.left)
            b = self.run(e.right)
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "/":
                return a / b
            raise ValueError(f"unknown operator {e.op}")
        if isinstance(e, Call):
            arity, fn = FUNCTIONS[e.func]
            args = [self.run(a) for a in e.args]
            return fn(*args)
        raise TypeError(f"not an expression: {e!r}")


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and Hessian of an expression at a single point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def eval_jet2(e: Expr, assignment: Mapping[str, float]) -> Jet2:
    """Second-order jet at one point, differentiated along the assignment's variables in order."""
    names = list(assignment)
    d = len(names)
    env = {name: Jet.coordinate(np.array([float(assignment[name])]), i, d, 2)
           for i, name in enumerate(names)}
    j = evaluate(e, env, 1, d, 2)
    return Jet2(float(j.val[0]), j.grad[0].copy(), j.hess[0].copy())


def eval_values(e: Expr, env: Mapping[str, np.ndarray | float], n: int) -> np.ndarray:
    """Values only, for (n,) arrays of variable values."""
    jenv = {k: Jet(np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()) for k, v in env.items()}
    return evaluate(e, jenv, n, 0, 0).val
