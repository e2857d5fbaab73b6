"""Exception hierarchy.

Every error carries an optional ``witness`` mapping with the data needed to
reproduce the failure (sample index, coordinates, offending value).
"""

from __future__ import annotations

from typing import Any


class ContactLabError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str = "", witness: dict[str, Any] | None = None):
        super().__init__(message)
        self.message = message
        self.witness = dict(witness or {})

    @property
    def name(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "message": self.message, "witness": _plain(self.witness)}


def _plain(obj: Any) -> Any:
    """Convert numpy scalars and arrays to JSON-friendly structures."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# expression language
class ExprError(ContactLabError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, expected: set[str] | frozenset[str] = frozenset()):
        super().__init__(message, {"offset": offset, "expected": sorted(expected)})
        self.offset = offset
        self.expected = frozenset(expected)


class UnknownIdentifier(ExprError):
    def __init__(self, ident: str, offset: int | None = None):
        super().__init__(f"unknown identifier {ident!r}", {"identifier": ident, "offset": offset})
        self.identifier = ident
        self.offset = offset


class DomainError(ExprError):
    pass


class NonSmoothPoint(ExprError):
    pass


class DepthExceeded(ExprError):
    pass


# charts
class ChartError(ContactLabError):
    pass


class UnparametrizedLevelSet(ChartError):
    pass


class RankDeficient(ChartError):
    pass


class OffManifoldPoint(ChartError):
    pass


# calculus
class CalculusError(ContactLabError):
    pass


class DegreeOverflow(CalculusError):
    pass


class DegreeUnderflow(CalculusError):
    pass


class DimensionMismatch(CalculusError):
    pass


class NotContact(CalculusError):
    pass


# positivity
class PositivityError(ContactLabError):
    pass


class EvenDimension(PositivityError):
    pass


class ZeroPolynomial(PositivityError):
    pass


class NotClosed(PositivityError):
    pass


class NumericallyIndeterminate(PositivityError):
    pass


# open books
class OpenBookError(ContactLabError):
    pass


class EmptyBinding(OpenBookError):
    pass


class TransversalityFailure(OpenBookError):
    pass


class NotAdapted(OpenBookError):
    pass


class TransversalityNotNegative(OpenBookError):
    pass


class NotTransverse(OpenBookError):
    pass


class NotContactFields(OpenBookError):
    pass


class HypothesisFailure(OpenBookError):
    pass


class KSearchExhausted(OpenBookError):
    pass


# Bourgeois construction
class BourgeoisError(ContactLabError):
    pass


class DomainConditionFailure(BourgeoisError):
    pass


class NotContactResult(BourgeoisError):
    pass


class FiberMismatch(BourgeoisError):
    pass


class SingularSplitting(BourgeoisError):
    pass


class NotClosedPotential(BourgeoisError):
    pass


class BaseNotDominated(BourgeoisError):
    pass


class EpsilonExhausted(ContactLabError):
    pass


class ProfileViolation(BourgeoisError):
    pass


# branched covers
class CoverError(ContactLabError):
    pass


class BranchRestrictionNotContact(CoverError):
    pass


class DownstairsNotDominated(CoverError):
    pass


# Reeb dynamics
class DynamicsError(ContactLabError):
    pass


class PredictionMismatch(DynamicsError):
    pass


class StepCollapse(DynamicsError):
    pass


class LeftDomain(DynamicsError):
    pass


# command line
class CliError(ContactLabError):
    pass


class SceneParseError(CliError):
    pass


class UnknownCommand(CliError):
    pass


class SelectorNotFound(CliError):
    pass
