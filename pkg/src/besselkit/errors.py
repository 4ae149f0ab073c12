"""Exception hierarchy shared by all besselkit modules."""

from __future__ import annotations


class BesselKitError(Exception):
    """Base class for every error raised by the library."""

    #: machine-readable category used by the CLI for exit codes
    category = "numerical"


class PoleError(BesselKitError):
    pass


class NonConvergence(BesselKitError):
    pass


class BranchError(BesselKitError):
    pass


class OverflowError_(BesselKitError):
    """Result would leave the double-precision exponent range."""


class DomainError(BesselKitError):
    category = "config"


class WeightUndefined(BesselKitError):
    pass


class MixedDenominatorZero(BesselKitError):
    pass


class TailError(BesselKitError):
    pass


class NonContraction(BesselKitError):
    pass


class NoAdmissibleA(BesselKitError):
    pass


class ClassViolation(BesselKitError):
    category = "class"


class DegenerateBasis(BesselKitError):
    pass


class MethodUnavailable(BesselKitError):
    pass


class ContourThroughZero(BesselKitError):
    pass


class CountMismatch(BesselKitError):
    pass


class ResolventPole(BesselKitError):
    pass


class NoConvergence(BesselKitError):
    pass


class TrivialBoundarySpace(BesselKitError):
    category = "config"


class DegenerateDecomposition(BesselKitError):
    pass


class ConfigError(BesselKitError):
    category = "config"


# public alias; shadows the builtin only inside ``besselkit.errors``
OverflowError = OverflowError_  # noqa: A001

__all__ = [
    "BesselKitError", "PoleError", "NonConvergence", "BranchError", "OverflowError",
    "DomainError", "WeightUndefined", "MixedDenominatorZero", "TailError",
    "NonContraction", "NoAdmissibleA", "ClassViolation", "DegenerateBasis",
    "MethodUnavailable", "ContourThroughZero", "CountMismatch", "ResolventPole",
    "NoConvergence", "TrivialBoundarySpace", "DegenerateDecomposition", "ConfigError",
]
