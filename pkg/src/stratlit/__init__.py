"""Strategic litigation against a learning lower court.

A litigator picks which cases to bring before a high court whose rulings the
lower court generalizes from. The package solves for good filings against a
1D nearest-neighbor lower court and a d-dimensional max-margin one, and
simulates the high court overturning stale precedent.
"""

from stratlit.core import (
    ConstantRule,
    Era,
    Label,
    LabeledCase,
    LinearSeparator,
    Piecewise1DFn,
    PrecedentSet,
)
from stratlit.errors import (
    ConstructionFailedError,
    InconsistentPrecedentError,
    InvalidInputError,
    ModelViolationError,
    NotAchievableError,
    StratlitError,
)

__all__ = [
    "ConstantRule",
    "Era",
    "Label",
    "LabeledCase",
    "LinearSeparator",
    "Piecewise1DFn",
    "PrecedentSet",
    "ConstructionFailedError",
    "InconsistentPrecedentError",
    "InvalidInputError",
    "ModelViolationError",
    "NotAchievableError",
    "StratlitError",
]
