"""Scalar expression language with batched second-order jets."""

from .ast import BinOp, Call, Const, Expr, Neg, Num, Var, as_expr, parse, pretty, substitute
from .evaluate import Jet2, eval_jet2, eval_values, evaluate
from .jet import MAX_ORDER, Jet

__all__ = [
    "BinOp", "Call", "Const", "Expr", "Neg", "Num", "Var", "as_expr", "parse", "pretty",
    "substitute", "Jet2", "eval_jet2", "eval_values", "evaluate", "MAX_ORDER", "Jet",
]
