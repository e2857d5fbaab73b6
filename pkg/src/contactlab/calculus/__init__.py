"""Exterior calculus on lazy nodes."""

from .algebra import FormJet, on_vectors
from .nodes import (
    D, Bracket, ExprField, ExprForm, ExprMap, Field, FieldComb, FieldFromJets, Form, Interior,
    LiftField, LiftForm, LinComb, Pullback, ScalarExpr, ScalarMul, Wedge, coordinate_1form, d,
    form, interior, lie_bracket, lie_derivative, lift, on_frames, pair, pullback, scalar,
    vector_field, wedge, wedge_power, zero_form,
)
from .solve import (
    ContactSolve, contact_hamiltonian_field, horizontal_correction, reeb_vector_field, solve_jets,
)

__all__ = [
    "FormJet", "on_vectors", "D", "Bracket", "ExprField", "ExprForm", "ExprMap", "Field",
    "FieldComb", "FieldFromJets", "Form", "Interior", "LiftField", "LiftForm", "LinComb",
    "Pullback", "ScalarExpr", "ScalarMul", "Wedge", "coordinate_1form", "d", "form", "interior",
    "lie_bracket", "lie_derivative", "lift", "on_frames", "pair", "pullback", "scalar",
    "vector_field", "wedge", "wedge_power", "zero_form", "ContactSolve",
    "contact_hamiltonian_field", "horizontal_correction", "reeb_vector_field", "solve_jets",
]
