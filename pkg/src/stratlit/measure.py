"""Case distributions, exact 1D discrepancy and Monte Carlo error estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from stratlit.core import (
    CourtRule,
    Piecewise1DFn,
    as_point,
    canonicalize,
    evaluate_many,
    rule_dim,
)
from stratlit.errors import InvalidInputError

TOTAL_MASS_TOL = 1e-12
HOEFFDING_DELTA = 0.05


@dataclass(frozen=True)
class PiecewiseUniform1D:
    """Density constant on each ``[breakpoints[i], breakpoints[i+1])``."""

    breakpoints: tuple
    densities: tuple

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        dens = tuple(float(d) for d in self.densities)
        if len(bp) < 2 or len(dens) != len(bp) - 1:
            raise InvalidInputError("need k+1 breakpoints for k density pieces")
        if any(not b < c for b, c in zip(bp, bp[1:])):
            raise InvalidInputError(f"breakpoints must be strictly increasing: {bp}")
        if any(not math.isfinite(d) or d < 0 for d in dens):
            raise InvalidInputError("densities must be finite and nonnegative")
        total = math.fsum(d * (c - b) for d, b, c in zip(dens, bp, bp[1:]))
        if abs(total - 1.0) > TOTAL_MASS_TOL:
            raise InvalidInputError(f"density integrates to {total!r}, not 1")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "densities", dens)

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "PiecewiseUniform1D":
        return cls((lo, hi), (1.0 / (hi - lo),))

    @classmethod
    def from_weights(cls, breakpoints: Sequence[float], weights: Sequence[float]):
        """Normalize nonnegative per-piece weights (density up to scale)."""
        bp = [float(b) for b in breakpoints]
        lengths = [c - b for b, c in zip(bp, bp[1:])]
        total = math.fsum(w * l for w, l in zip(weights, lengths))
        return cls(tuple(bp), tuple(w / total for w in weights))

    @property
    def domain(self) -> tuple:
        return self.breakpoints[0], self.breakpoints[-1]

    def _cum(self) -> np.ndarray:
        bp, dens = self.breakpoints, self.densities
        pieces = [d * (c - b) for d, b, c in zip(dens, bp, bp[1:])]
        return np.concatenate([[0.0], np.cumsum(pieces)])

    def cdf(self, x):
        """Mass of ``[lo, x]``; piecewise linear, clipped to the domain."""
        return np.interp(x, self.breakpoints, self._cum())

    def mass(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        return float(self.cdf(b) - self.cdf(a))

    def density_at(self, x: float) -> float:
        bp = self.breakpoints
        if x < bp[0] or x > bp[-1]:
            return 0.0
        i = min(int(np.searchsorted(bp, x, side="right")) - 1, len(self.densities) - 1)
        return self.densities[i]


def _disagreement_pieces(f: Piecewise1DFn, g: Piecewise1DFn, lo: float, hi: float):
    """Sub-intervals of ``[lo, hi]`` on which ``f`` and ``g`` differ."""
    cuts = sorted({lo, hi, *(b for b in f.boundaries + g.boundaries if lo < b < hi)})
    out = []
    for a, b in zip(cuts, cuts[1:]):
        # labels are constant on [a, b); probe its left end
        if f(a) != g(a):
            if out and out[-1][1] == a:
                out[-1] = (out[-1][0], b)
            else:
                out.append((a, b))
    return out


def discrepancy_1d(f: Piecewise1DFn, g: Piecewise1DFn, interval=None, dist: PiecewiseUniform1D | None = None) -> float:
    """Probability mass of ``{x in interval : f(x) != g(x)}`` under ``dist``."""
    if dist is None:
        dist = PiecewiseUniform1D.uniform(*f.domain)
    lo, hi = interval if interval is not None else dist.domain
    if hi < lo:
        raise InvalidInputError(f"empty interval {(lo, hi)}")
    total = 0.0
    for a, b in _disagreement_pieces(f, g, lo, hi):
        total += dist.mass(a, b)
    return min(max(total, 0.0), 1.0)


@dataclass(frozen=True)
class Rescaled:
    functions: tuple
    points: tuple
    dist: PiecewiseUniform1D


def _rescale_fn(fn: Piecewise1DFn, dist: PiecewiseUniform1D) -> Piecewise1DFn:
    labels = [fn.labels[0]]
    bounds: list = []
    for b, lab in zip(fn.boundaries, fn.labels[1:]):
        u = float(dist.cdf(b))
        if u <= 0.0:
            labels[-1] = lab  # segment collapsed onto 0
            continue
        if u >= 1.0:
            break
        if bounds and u == bounds[-1]:
            labels[-1] = lab  # zero-mass segment
            continue
        bounds.append(u)
        labels.append(lab)
    return canonicalize(Piecewise1DFn(tuple(labels), tuple(bounds), (0.0, 1.0)))


def cdf_rescale(dist: PiecewiseUniform1D, functions: Sequence[Piecewise1DFn] = (), points: Sequence[float] = ()) -> Rescaled:
    """Map every coordinate through the CDF of ``dist`` onto ``[0, 1]``.

    Afterwards the uniform distribution on ``[0, 1]`` measures disagreement
    exactly as ``dist`` did before. Points in a zero-density region would
    collapse together, so they are rejected.
    """
    bp, dens = dist.breakpoints, dist.densities
    for x in points:
        for d, a, b in zip(dens, bp, bp[1:]):
            if d == 0.0 and a <= x <= b:
                raise InvalidInputError(
                    f"point {x} lies in zero-density segment [{a}, {b}]; perturb the density"
                )
    mapped_points = tuple(float(dist.cdf(x)) for x in points)
    mapped_fns = tuple(_rescale_fn(fn, dist) for fn in functions)
    return Rescaled(mapped_fns, mapped_points, PiecewiseUniform1D.uniform(0.0, 1.0))


# ---------------------------------------------------------------------------
# d-dimensional sampling


@dataclass(frozen=True)
class SamplerSpec:
    """Where the litigator's cases of interest come from.

    ``kind`` is one of ``"uniform_box"`` (``lo``/``hi`` per coordinate),
    ``"gaussian"`` (``mean``/``std``) or ``"empirical"`` (``points``).
    """

    kind: str
    seed: int
    lo: tuple = ()
    hi: tuple = ()
    mean: tuple = ()
    std: tuple = ()
    points: tuple = ()

    def __post_init__(self):
        if self.kind == "uniform_box":
            if len(self.lo) != len(self.hi) or not self.lo:
                raise InvalidInputError("uniform_box needs lo/hi of equal nonzero length")
            if any(not a < b for a, b in zip(self.lo, self.hi)):
                raise InvalidInputError("uniform_box needs lo < hi per coordinate")
        elif self.kind == "gaussian":
            if len(self.mean) != len(self.std) or not self.mean:
                raise InvalidInputError("gaussian needs mean/std of equal nonzero length")
            if any(s <= 0 for s in self.std):
                raise InvalidInputError("gaussian stddevs must be positive")
        elif self.kind == "empirical":
            if not self.points:
                raise InvalidInputError("empirical sampler needs a nonempty point list")
            object.__setattr__(self, "points", tuple(as_point(p) for p in self.points))
        else:
            raise InvalidInputError(f"unknown sampler kind {self.kind!r}")
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def uniform_box(cls, lo, hi, seed: int = 0):
        return cls("uniform_box", seed, lo=tuple(map(float, lo)), hi=tuple(map(float, hi)))

    @classmethod
    def gaussian(cls, mean, std, seed: int = 0):
        return cls("gaussian", seed, mean=tuple(map(float, mean)), std=tuple(map(float, std)))

    @classmethod
    def empirical(cls, points, seed: int = 0):
        return cls("empirical", seed, points=tuple(points))

    @property
    def dim(self) -> int:
        if self.kind == "uniform_box":
            return len(self.lo)
        if self.kind == "gaussian":
            return len(self.mean)
        return len(self.points[0])

    def with_seed(self, seed: int) -> "SamplerSpec":
        return SamplerSpec(self.kind, seed, self.lo, self.hi, self.mean, self.std, self.points)

    def sample(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        if self.kind == "uniform_box":
            return rng.uniform(self.lo, self.hi, size=(n, self.dim))
        if self.kind == "gaussian":
            return rng.normal(self.mean, self.std, size=(n, self.dim))
        pts = np.array(self.points, dtype=float)
        return pts[rng.integers(0, len(pts), size=n)]


def default_sample_size(d: int, eps: float = 0.05) -> int:
    """``ceil(d / eps^2 * ln(1/eps))``, the shape of the uniform-convergence bound."""
    if not 0 < eps < 1:
        raise InvalidInputError("eps must lie in (0, 1)")
    return math.ceil(d / eps**2 * math.log(1.0 / eps))


def hoeffding_half_width(n: int, delta: float = HOEFFDING_DELTA) -> float:
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


@dataclass(frozen=True)
class ErrorEstimate:
    estimate: float
    half_width: float
    n_samples: int


def estimate_error(f: CourtRule, g: CourtRule, sampler: SamplerSpec, n_samples: int | None = None) -> ErrorEstimate:
    """Fraction of sampled cases on which ``f`` and ``g`` disagree."""
    if rule_dim(f) != rule_dim(g) or rule_dim(f) != sampler.dim:
        raise InvalidInputError("rules and sampler must share one dimension")
    if n_samples is None:
        n_samples = default_sample_size(sampler.dim)
    if n_samples <= 0:
        raise InvalidInputError("n_samples must be positive")
    X = sampler.sample(n_samples)
    if isinstance(f, Piecewise1DFn) or isinstance(g, Piecewise1DFn):
        X = X[:, 0]
    est = float(np.mean(evaluate_many(f, X) != evaluate_many(g, X)))
    return ErrorEstimate(est, hoeffding_half_width(n_samples), n_samples)


def rule_disagreement(f: CourtRule, g: CourtRule, X: np.ndarray) -> int:
    """Number of rows of ``X`` labeled differently by ``f`` and ``g``."""
    return int(np.count_nonzero(evaluate_many(f, X) != evaluate_many(g, X)))


__all__ = [
    "PiecewiseUniform1D",
    "SamplerSpec",
    "ErrorEstimate",
    "Rescaled",
    "discrepancy_1d",
    "cdf_rescale",
    "estimate_error",
    "default_sample_size",
    "hoeffding_half_width",
    "rule_disagreement",
]
