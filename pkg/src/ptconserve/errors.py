"""Exception hierarchy.

Every error carries the name of the module it originated in so the command
line front end can report where a numerical failure came from.
"""

from __future__ import annotations


class PTConserveError(Exception):
    """Base class for all toolkit errors."""

    module = "ptconserve"


# linalg
class NonConvergence(PTConserveError):
    module = "linalg"


class OverflowRisk(PTConserveError):
    module = "linalg"


# model
class DimensionTooSmall(PTConserveError, ValueError):
    module = "model"


class DefectiveEigenbasis(PTConserveError):
    module = "model"


# conserved
class NotHermitian(PTConserveError):
    module = "conserved"


class WrongDimension(PTConserveError, ValueError):
    module = "conserved"


# analysis
class AmbiguousNearEP(PTConserveError):
    module = "analysis"


class NotPeriodic(PTConserveError, ValueError):
    module = "analysis"


class TooFewOscillations(PTConserveError):
    module = "analysis"


class NonPositiveData(PTConserveError, ValueError):
    module = "analysis"


class NotSettled(PTConserveError):
    module = "analysis"


# cli
class ConfigError(PTConserveError, ValueError):
    module = "cli"
