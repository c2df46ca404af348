"""Exception hierarchy shared by every module."""

from __future__ import annotations


class StratlitError(Exception):
    """Base class for all package errors."""


class InvalidInputError(StratlitError, ValueError):
    """An argument violates a documented precondition."""


class InconsistentPrecedentError(StratlitError):
    """No hypothesis in the learner's class is consistent with the precedent."""


class ModelViolationError(StratlitError):
    """The court cannot restore consistency by removing only disagreeing cases."""


class NotAchievableError(StratlitError):
    """A teaching construction was requested for an unachievable goal."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ConstructionFailedError(StratlitError):
    """A finite-parameter construction failed verification after all retries."""
