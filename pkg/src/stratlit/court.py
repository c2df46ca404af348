"""The high court: label new cases, overturn stale precedent, run sessions.

A filing is labeled by the high court's rule. If the enlarged precedent no
longer fits any hypothesis of the lower court's class, the court discards a
minimum-size set of cases whose stored label it disagrees with. When several
such sets exist a :class:`RemovalPolicy` picks one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from stratlit.core import (
    ConstantRule,
    CourtRule,
    Era,
    LabeledCase,
    LinearSeparator,
    Piecewise1DFn,
    PrecedentSet,
    as_point,
    evaluate,
)
from stratlit.errors import InconsistentPrecedentError, InvalidInputError, ModelViolationError
from stratlit.learners import is_separable, nn_fit, svm_fit
from stratlit.measure import PiecewiseUniform1D, SamplerSpec, discrepancy_1d, estimate_error

MAX_DISAGREEING = 20


# ---------------------------------------------------------------------------
# Removal policies


@dataclass(frozen=True)
class LexicographicFirst:
    """Remove the candidate set whose sorted points come first."""

    def choose(self, candidates: list, context: "_Context") -> tuple:
        return candidates[0]


@dataclass(frozen=True)
class SeededRandom:
    """Pick uniformly among candidate sets with a fixed seed."""

    seed: int

    def choose(self, candidates: list, context: "_Context") -> tuple:
        rng = np.random.default_rng([int(self.seed), context.step])
        return candidates[int(rng.integers(len(candidates)))]


@dataclass(frozen=True)
class AdversarialWorst:
    """Pick the removal that leaves the litigator worst off.

    Each candidate is scored by the error against ``g`` of the lower court's
    refit on the surviving precedent; ties go to the first candidate.
    """

    g: CourtRule
    measure: PiecewiseUniform1D | SamplerSpec
    n_samples: int | None = None

    def choose(self, candidates: list, context: "_Context") -> tuple:
        scores = []
        for cand in candidates:
            rule = refit(context.learner, context.precedent.without(cand), context.domain, context.dim)
            scores.append(litigator_error(rule, self.g, self.measure, self.n_samples))
        worst = max(scores)
        return candidates[scores.index(worst)]


RemovalPolicy = LexicographicFirst | SeededRandom | AdversarialWorst


@dataclass(frozen=True)
class _Context:
    precedent: PrecedentSet
    learner: str
    domain: tuple
    dim: int
    step: int = 0


# ---------------------------------------------------------------------------
# Helpers shared with sessions


def learner_for(f_star: CourtRule) -> str:
    """The lower-court learner matching the high court's rule class."""
    if isinstance(f_star, Piecewise1DFn):
        return "nn"
    if isinstance(f_star, (LinearSeparator, ConstantRule)):
        return "svm"
    raise InvalidInputError(f"unsupported high-court rule {f_star!r}")


def _hypothesis(learner: str) -> str:
    if learner == "nn":
        return "nn"
    if learner == "svm":
        return "linear"
    raise InvalidInputError(f"unknown learner {learner!r}")


def refit(learner: str, precedent: PrecedentSet, domain=(0.0, 1.0), dim: int | None = None) -> CourtRule:
    if learner == "nn":
        return nn_fit(precedent, domain)
    return svm_fit(precedent, dim).rule


def litigator_error(rule: CourtRule, g: CourtRule | None, measure, n_samples: int | None = None):
    """Disagreement of ``rule`` with ``g``: exact in 1D, Monte Carlo otherwise."""
    if g is None or measure is None:
        return None
    if isinstance(measure, PiecewiseUniform1D):
        return discrepancy_1d(rule, g, measure.domain, measure)
    return estimate_error(rule, g, measure, n_samples).estimate


def disagreeing_cases(precedent: PrecedentSet, f_star: CourtRule) -> list:
    """Cases whose stored label differs from the high court's current label."""
    return [c for c in precedent if evaluate(f_star, c.point) != c.label]


# ---------------------------------------------------------------------------
# Decisions


def minimal_removal_sets(precedent_plus_new: PrecedentSet, f_star: CourtRule, learner: str | None = None) -> list:
    """Every minimum-size set of disagreeing cases whose removal restores consistency.

    Sets are searched by increasing size, so each returned set is also
    subset-minimal: all of its proper subsets were tried first and failed.
    An already consistent precedent gives ``[()]``.
    """
    hyp = _hypothesis(learner or learner_for(f_star))
    if is_separable(precedent_plus_new, hyp):
        return [()]
    bad = disagreeing_cases(precedent_plus_new, f_star)
    if len(bad) > MAX_DISAGREEING:
        raise InvalidInputError(
            f"{len(bad)} disagreeing cases exceed the brute-force bound of {MAX_DISAGREEING}"
        )
    for size in range(1, len(bad) + 1):
        found = [
            combo
            for combo in itertools.combinations(bad, size)
            if is_separable(precedent_plus_new.without(combo), hyp)
        ]
        if found:
            return found
    raise ModelViolationError(
        "removing every disagreeing case still leaves the precedent inconsistent"
    )


@dataclass(frozen=True)
class Decision:
    case: LabeledCase
    removed: tuple
    new_precedent: PrecedentSet

    @property
    def label(self):
        return self.case.label


def decide(
    f_star: CourtRule,
    precedent: PrecedentSet,
    x,
    policy: RemovalPolicy = LexicographicFirst(),
    learner: str | None = None,
    *,
    domain=(0.0, 1.0),
    step: int = 0,
) -> Decision:
    """Label ``x`` with the high court's rule and update the precedent.

    A filing at an existing coordinate replaces the old case first; if the
    old label differed it is reported as removed. Remaining inconsistency is
    resolved by removing one minimum-size set of disagreeing cases.
    """
    learner = learner or learner_for(f_star)
    point = as_point(x)
    if precedent.dim is not None and len(point) != precedent.dim:
        raise InvalidInputError(f"filing {point} does not match precedent dimension {precedent.dim}")
    case = LabeledCase(point, evaluate(f_star, point), Era.CURRENT)
    replaced = precedent.find(point)
    removed: tuple = ()
    if replaced is not None and replaced.label != case.label:
        removed = (replaced,)
    augmented = precedent.with_case(case)
    sets = minimal_removal_sets(augmented, f_star, learner)
    if sets != [()]:
        ctx = _Context(augmented, learner, domain, len(point), step)
        chosen = policy.choose(sets, ctx)
        augmented = augmented.without(chosen)
        removed = removed + tuple(chosen)
    return Decision(case, removed, augmented)


# ---------------------------------------------------------------------------
# Sessions


@dataclass(frozen=True)
class SessionEntry:
    """One step of a session; the first entry has no filing.

    ``rule`` is ``None`` only in the first entry, when stale precedent admits
    no consistent rule before the court has decided anything.
    """

    point: tuple | None
    label: object
    removed: tuple
    rule: CourtRule | None
    error: float | None


@dataclass(frozen=True)
class SessionTranscript:
    entries: tuple

    @property
    def final(self) -> SessionEntry:
        return self.entries[-1]

    @property
    def removed(self) -> tuple:
        return tuple(c for e in self.entries for c in e.removed)


def run_session(
    f_star: CourtRule,
    learner: str,
    initial_precedent: PrecedentSet,
    filings: Sequence,
    g: CourtRule | None = None,
    measure=None,
    policy: RemovalPolicy = LexicographicFirst(),
    *,
    domain=None,
    n_samples: int | None = None,
) -> SessionTranscript:
    """File cases in order, refitting the lower court after every decision."""
    precedent = initial_precedent if isinstance(initial_precedent, PrecedentSet) else PrecedentSet.of(initial_precedent)
    if domain is None:
        domain = f_star.domain if isinstance(f_star, Piecewise1DFn) else (0.0, 1.0)
    dim = f_star.dim
    try:
        rule = refit(learner, precedent, domain, dim)
    except InconsistentPrecedentError:
        # stale precedent may admit no rule until the court next decides a case
        rule = None
    error = None if rule is None else litigator_error(rule, g, measure, n_samples)
    entries = [SessionEntry(None, None, (), rule, error)]
    for step, x in enumerate(filings, start=1):
        dec = decide(f_star, precedent, x, policy, learner, domain=domain, step=step)
        precedent = dec.new_precedent
        rule = refit(learner, precedent, domain, dim)
        entries.append(
            SessionEntry(dec.case.point, dec.label, dec.removed, rule, litigator_error(rule, g, measure, n_samples))
        )
    return SessionTranscript(tuple(entries))


def final_precedent(f_star, initial_precedent: PrecedentSet, filings, policy=LexicographicFirst(), learner=None) -> PrecedentSet:
    """Precedent left after filing every case in order."""
    precedent = initial_precedent
    for step, x in enumerate(filings, start=1):
        precedent = decide(f_star, precedent, x, policy, learner, step=step).new_precedent
    return precedent
