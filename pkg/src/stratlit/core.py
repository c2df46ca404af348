"""Domain types: labels, case points, precedent and the two rule classes."""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from stratlit.errors import InvalidInputError

UNIT_NORM_TOL = 1e-12


class Label(enum.IntEnum):
    NEGATIVE = -1
    POSITIVE = 1

    def flip(self) -> "Label":
        return Label(-int(self))

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, Label):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("+", "pos", "positive", "+1", "1"):
                return cls.POSITIVE
            if key in ("-", "neg", "negative", "-1"):
                return cls.NEGATIVE
            raise InvalidInputError(f"unknown label {value!r}")
        if value in (1, -1):
            return cls(int(value))
        raise InvalidInputError(f"unknown label {value!r}")

    @property
    def symbol(self) -> str:
        return "+" if self is Label.POSITIVE else "-"


class Era(str, enum.Enum):
    """Provenance tag: was the label assigned by the current high court?"""

    CURRENT = "current"
    STALE = "stale"


Point = tuple  # tuple[float, ...]


def as_point(coords) -> Point:
    """Coerce a scalar or sequence into a finite coordinate tuple."""
    if np.isscalar(coords):
        coords = (coords,)
    pt = tuple(float(c) + 0.0 for c in coords)  # + 0.0 folds -0.0 into 0.0
    if not pt:
        raise InvalidInputError("a case point needs at least one coordinate")
    if not all(math.isfinite(c) for c in pt):
        raise InvalidInputError(f"non-finite coordinate in {pt}")
    return pt


@dataclass(frozen=True)
class LabeledCase:
    point: Point
    label: Label
    era: Era = Era.CURRENT

    def __post_init__(self):
        object.__setattr__(self, "point", as_point(self.point))
        object.__setattr__(self, "label", Label.parse(self.label))
        object.__setattr__(self, "era", Era(self.era))

    @property
    def dim(self) -> int:
        return len(self.point)


@dataclass(frozen=True)
class PrecedentSet:
    """Labeled cases in canonical (lexicographic) order, one per coordinate.

    Build with :meth:`of`; later duplicates replace earlier ones, mirroring a
    re-brought case overriding its predecessor.
    """

    cases: tuple = ()

    def __post_init__(self):
        cases = tuple(self.cases)
        pts = [c.point for c in cases]
        if pts != sorted(pts) or len(set(pts)) != len(pts):
            raise InvalidInputError(
                "PrecedentSet cases must be sorted and coordinate-distinct; use PrecedentSet.of"
            )
        if len({len(p) for p in pts}) > 1:
            raise InvalidInputError("all precedent cases must share one dimension")
        object.__setattr__(self, "cases", cases)

    @classmethod
    def of(cls, cases: Iterable[LabeledCase]) -> "PrecedentSet":
        by_point: dict = {}
        for c in cases:
            by_point[c.point] = c
        return cls(tuple(by_point[p] for p in sorted(by_point)))

    @classmethod
    def from_pairs(cls, pairs, era: Era = Era.CURRENT) -> "PrecedentSet":
        """Build from ``(coords, label)`` pairs."""
        return cls.of(LabeledCase(as_point(p), Label.parse(y), era) for p, y in pairs)

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)

    @property
    def dim(self) -> int | None:
        return self.cases[0].dim if self.cases else None

    def points(self) -> np.ndarray:
        if not self.cases:
            return np.zeros((0, self.dim or 0))
        return np.array([c.point for c in self.cases], dtype=float)

    def signs(self) -> np.ndarray:
        return np.array([int(c.label) for c in self.cases], dtype=float)

    def find(self, point) -> LabeledCase | None:
        point = as_point(point)
        for c in self.cases:
            if c.point == point:
                return c
        return None

    def with_case(self, case: LabeledCase) -> "PrecedentSet":
        return PrecedentSet.of(list(self.cases) + [case])

    def union(self, other: Iterable[LabeledCase]) -> "PrecedentSet":
        return PrecedentSet.of(list(self.cases) + list(other))

    def without(self, removed: Iterable[LabeledCase]) -> "PrecedentSet":
        drop = {c.point for c in removed}
        return PrecedentSet(tuple(c for c in self.cases if c.point not in drop))


@dataclass(frozen=True)
class Piecewise1DFn:
    """Boolean function on a closed interval with finitely many alternations.

    ``labels[i]`` holds on ``[boundaries[i-1], boundaries[i])``; a boundary
    point takes the label of the segment to its right.
    """

    labels: tuple
    boundaries: tuple = ()
    domain: tuple = (0.0, 1.0)

    def __post_init__(self):
        labels = tuple(Label.parse(y) for y in self.labels)
        bounds = tuple(float(b) for b in self.boundaries)
        lo, hi = (float(v) for v in self.domain)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise InvalidInputError(f"bad domain {self.domain}")
        if len(labels) != len(bounds) + 1:
            raise InvalidInputError("need exactly one more label than boundaries")
        for a, b in zip(bounds, bounds[1:]):
            if not a < b:
                raise InvalidInputError(f"boundaries must be strictly increasing, got {bounds}")
        if bounds and not (lo < bounds[0] and bounds[-1] < hi):
            raise InvalidInputError(f"boundaries must lie strictly inside {(lo, hi)}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "boundaries", bounds)
        object.__setattr__(self, "domain", (lo, hi))

    @classmethod
    def alternating(cls, leftmost, boundaries: Sequence[float] = (), domain=(0.0, 1.0)):
        lab = Label.parse(leftmost)
        labels = [lab if i % 2 == 0 else lab.flip() for i in range(len(boundaries) + 1)]
        return cls(tuple(labels), tuple(boundaries), tuple(domain))

    @classmethod
    def constant(cls, label, domain=(0.0, 1.0)):
        return cls((Label.parse(label),), (), tuple(domain))

    @property
    def leftmost_label(self) -> Label:
        return self.labels[0]

    @property
    def dim(self) -> int:
        return 1

    def __call__(self, x) -> Label:
        """Label at ``x``, given as a number or a one-coordinate point."""
        if not isinstance(x, (int, float)):
            pt = as_point(x)
            if len(pt) != 1:
                raise InvalidInputError(f"point of dimension {len(pt)} given to a 1-d rule")
            x = pt[0]
        return self.labels[bisect.bisect_right(self.boundaries, x)]

    def is_canonical(self) -> bool:
        return all(a != b for a, b in zip(self.labels, self.labels[1:]))

    def segments(self):
        """Yield ``(start, end, label)`` triples covering the domain."""
        edges = (self.domain[0],) + self.boundaries + (self.domain[1],)
        for i, lab in enumerate(self.labels):
            yield edges[i], edges[i + 1], lab


@dataclass(frozen=True)
class LinearSeparator:
    """Half-space rule ``normal . x + offset >= 0 -> POSITIVE`` with a unit normal."""

    normal: tuple
    offset: float = 0.0

    def __post_init__(self):
        w = tuple(float(v) for v in self.normal)
        if not w or not all(math.isfinite(v) for v in w) or not math.isfinite(self.offset):
            raise InvalidInputError("separator needs a finite, nonempty normal and offset")
        if abs(math.sqrt(math.fsum(v * v for v in w)) - 1.0) > UNIT_NORM_TOL:
            raise InvalidInputError(f"normal {w} is not unit length; use LinearSeparator.from_raw")
        object.__setattr__(self, "normal", w)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_raw(cls, w, b: float = 0.0) -> "LinearSeparator":
        w = np.asarray(w, dtype=float).ravel()
        n = float(np.linalg.norm(w))
        if n == 0.0 or not math.isfinite(n):
            raise InvalidInputError("zero or non-finite normal vector")
        return cls(tuple(w / n), float(b) / n)

    @property
    def dim(self) -> int:
        return len(self.normal)

    @property
    def w(self) -> np.ndarray:
        return np.array(self.normal)

    def decision(self, X) -> np.ndarray:
        """Signed distances ``w . x + b`` for the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (X * self.w).sum(axis=1) + self.offset

    def __call__(self, x) -> Label:
        return Label.POSITIVE if self.decision([x])[0] >= 0 else Label.NEGATIVE

    def negated(self) -> "LinearSeparator":
        return LinearSeparator(tuple(-v for v in self.normal), -self.offset)


@dataclass(frozen=True)
class ConstantRule:
    """A rule labeling every point the same; the degenerate learner output."""

    label: Label
    dim: int = field(default=1)

    def __post_init__(self):
        object.__setattr__(self, "label", Label.parse(self.label))

    def __call__(self, x) -> Label:
        return self.label


CourtRule = Union[Piecewise1DFn, LinearSeparator, ConstantRule]


def rule_dim(rule: CourtRule) -> int:
    return rule.dim


def evaluate(rule: CourtRule, x) -> Label:
    """Label of case ``x`` under ``rule``; rejects dimension mismatches."""
    pt = as_point(x)
    if len(pt) != rule_dim(rule):
        raise InvalidInputError(f"point of dimension {len(pt)} given to a {rule_dim(rule)}-d rule")
    if isinstance(rule, Piecewise1DFn):
        return rule(pt[0])
    return rule(pt)


def evaluate_many(rule: CourtRule, X) -> np.ndarray:
    """Vectorized ``evaluate`` returning +1/-1 as a float array."""
    X = np.asarray(X, dtype=float)
    if isinstance(rule, LinearSeparator):
        X = np.atleast_2d(X)
        if X.shape[1] != rule.dim:
            raise InvalidInputError("dimension mismatch")
        return np.where(rule.decision(X) >= 0, 1.0, -1.0)
    if isinstance(rule, ConstantRule):
        return np.full(len(np.atleast_1d(X)) if X.ndim <= 1 else X.shape[0], float(rule.label))
    xs = X.ravel()
    idx = np.searchsorted(np.array(rule.boundaries), xs, side="right")
    return np.array([float(v) for v in rule.labels])[idx]


def canonicalize(fn: Piecewise1DFn) -> Piecewise1DFn:
    """Drop boundaries whose two sides carry the same label."""
    labels = [fn.labels[0]]
    bounds = []
    for b, lab in zip(fn.boundaries, fn.labels[1:]):
        if lab != labels[-1]:
            bounds.append(b)
            labels.append(lab)
    return Piecewise1DFn(tuple(labels), tuple(bounds), fn.domain)


def label_cases(f_star: CourtRule, points, era: Era = Era.CURRENT) -> list:
    """Cases for ``points`` labeled by the high court's rule."""
    return [LabeledCase(as_point(p), evaluate(f_star, p), era) for p in points]
