"""Rewrites for radial profiles.

Profiles near a binding are written in the radius ``r``; evaluating them
smoothly at ``r = 0`` requires expressing them in ``s = r^2``.
"""

from __future__ import annotations

from .ast import BinOp, Call, Expr, Neg, Num, Var


class NotEven(ValueError):
    pass


def to_square(e: Expr, r: str = "r", s: str = "s") -> Expr:
    """Replace even powers ``r^(2k)`` by ``s^k``; odd occurrences raise :class:`NotEven`."""
    if isinstance(e, Var):
        if e.name == r:
            raise NotEven(f"{r} appears with an odd power")
        return e
    if isinstance(e, BinOp):
        if e.op == "^" and isinstance(e.left, Var) and e.left.name == r:
            if isinstance(e.right, Num) and e.right.value == int(e.right.value) and int(e.right.value) % 2 == 0:
                k = int(e.right.value) // 2
                if k == 0:
                    return Num(1.0)
                return Var(s) if k == 1 else BinOp("^", Var(s), Num(float(k)))
            raise NotEven(f"{r} appears with a non-even power")
        return BinOp(e.op, to_square(e.left, r, s), to_square(e.right, r, s))
    if isinstance(e, Neg):
        return Neg(to_square(e.operand, r, s))
    if isinstance(e, Call):
        return Call(e.func, tuple(to_square(a, r, s) for a in e.args))
    return e


def divide_by(e: Expr, s: str = "s") -> Expr | None:
    """Symbolic ``e / s`` when ``s`` visibly divides ``e``, else ``None``."""
    if isinstance(e, Var):
        return Num(1.0) if e.name == s else None
    if isinstance(e, Num):
        return Num(0.0) if e.value == 0.0 else None
    if isinstance(e, Neg):
        q = divide_by(e.operand, s)
        return None if q is None else Neg(q)
    if isinstance(e, BinOp):
        if e.op == "^":
            if isinstance(e.left, Var) and e.left.name == s and isinstance(e.right, Num):
                k = e.right.value
                if k == int(k) and k >= 1:
                    if k == 1:
                        return Num(1.0)
                    return Var(s) if k == 2 else BinOp("^", Var(s), Num(k - 1))
            return None
        if e.op in "+-":
            a, b = divide_by(e.left, s), divide_by(e.right, s)
            if a is None or b is None:
                return None
            return BinOp(e.op, a, b)
        if e.op == "*":
            a = divide_by(e.left, s)
            if a is not None:
                return BinOp("*", a, e.right)
            b = divide_by(e.right, s)
            return None if b is None else BinOp("*", e.left, b)
        if e.op == "/":
            a = divide_by(e.left, s)
            return None if a is None else BinOp("/", a, e.right)
    return None
