"""The litigator's toolkit against a max-margin lower court in d dimensions.

Covers deciding whether a goal separator can be forced on the lower court,
the two-filing construction that forces it, a sampled search for the best
forceable stand-in when it cannot, enumeration of what a finite pool can
force, and the construction that also clears stale precedent.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from stratlit.core import (
    ConstantRule,
    Label,
    LabeledCase,
    LinearSeparator,
    PrecedentSet,
    as_point,
    evaluate,
    evaluate_many,
)
from stratlit.court import LexicographicFirst, disagreeing_cases, run_session
from stratlit.errors import (
    ConstructionFailedError,
    InconsistentPrecedentError,
    InvalidInputError,
    NotAchievableError,
)
from stratlit.learners import _kkt_solve, svm_fit
from stratlit.measure import SamplerSpec, default_sample_size

COS_TOL = 1e-9
DIST_TOL = 1e-9
REPRODUCE_TOL = 1e-6
DEDUP_TOL = 1e-9
MAX_POOL = 25
MAX_POOL_DIM = 4

INTERSECTING = "intersecting"
PARALLEL = "parallel"
BLOCKED = "blocked"


def _as_precedent(history) -> PrecedentSet:
    return history if isinstance(history, PrecedentSet) else PrecedentSet.of(history)


def _check_dims(f_star: LinearSeparator, g: LinearSeparator, history: PrecedentSet) -> int:
    if not isinstance(f_star, LinearSeparator) or not isinstance(g, LinearSeparator):
        raise InvalidInputError("f_star and g must both be linear separators")
    if f_star.dim != g.dim:
        raise InvalidInputError(f"f_star is {f_star.dim}-d but g is {g.dim}-d")
    if history.dim is not None and history.dim != g.dim:
        raise InvalidInputError(f"history is {history.dim}-d but the separators are {g.dim}-d")
    return g.dim


def separator_gap(a: LinearSeparator, b: LinearSeparator) -> tuple:
    """``(angle in radians between normals, |offset difference|)``."""
    cos = float(np.clip(np.dot(a.w, b.w), -1.0, 1.0))
    return math.acos(cos), abs(a.offset - b.offset)


def same_separator(a, b, tol: float = REPRODUCE_TOL) -> bool:
    if not isinstance(a, LinearSeparator) or not isinstance(b, LinearSeparator):
        return False
    return max(float(np.max(np.abs(a.w - b.w))), abs(a.offset - b.offset)) <= tol


# ---------------------------------------------------------------------------
# Achievability


@dataclass(frozen=True)
class AchievabilityReport:
    """Outcome of the achievability test for a goal separator.

    ``case`` names the geometry: ``"intersecting"`` for an angle strictly
    between 0 and 90 degrees, ``"parallel"`` for equal normals and
    ``"blocked"`` when the angle rules the goal out by itself. ``delta`` is
    only meaningful in the parallel case.
    """

    achievable: bool
    theta_deg: float
    case: str
    delta: float = 0.0
    blockers: tuple = ()
    reason: str = ""


def _parallel_geometry(f_star: LinearSeparator, g: LinearSeparator) -> tuple:
    """``(delta, strict)`` for (near-)parallel normals.

    ``delta`` is the distance from the foot of ``g`` to the high court's
    boundary. ``strict`` is true when that boundary lies on ``g``'s negative
    side (or on ``g``); the boundary itself is labeled positive, so negative
    filings must then sit strictly beyond ``delta``.
    """
    foot = -g.offset * g.w
    s = float(np.dot(f_star.w, foot) + f_star.offset)
    return abs(s), s >= 0.0


def check_achievable(f_star: LinearSeparator, g: LinearSeparator, history) -> AchievabilityReport:
    """Decide whether filings labeled by ``f_star`` can make the lower court output ``g``.

    Args:
        f_star: The high court's separator.
        g: The goal separator.
        history: Precedent labeled by ``f_star``.

    Returns:
        A report; ``blockers`` lists the historical cases that rule ``g`` out.
    """
    history = _as_precedent(history)
    _check_dims(f_star, g, history)
    for c in history:
        if evaluate(f_star, c.point) != c.label:
            raise InvalidInputError(f"history case {c.point} disagrees with f_star; it must be current")
    cos = float(np.clip(np.dot(f_star.w, g.w), -1.0, 1.0))
    theta = math.degrees(math.acos(cos))
    if cos <= COS_TOL:
        return AchievabilityReport(
            False, theta, BLOCKED, 0.0, (),
            "learned normals always have a positive inner product with the high court's normal",
        )
    pts = history.points()
    dist = np.abs(g.decision(pts)) if len(history) else np.zeros(0)
    wrong = [c for c in history if g(c.point) != c.label]
    if cos < 1.0 - COS_TOL:
        near = [c for c, d in zip(history, dist) if d <= DIST_TOL and c not in wrong]
        blockers = tuple(sorted(wrong + near, key=lambda c: c.point))
        reason = ""
        if wrong:
            reason = "historical cases lie where the high court and the goal disagree"
        elif near:
            reason = "historical cases lie on the goal's boundary"
        return AchievabilityReport(not blockers, theta, INTERSECTING, 0.0, blockers, reason)
    delta, strict = _parallel_geometry(f_star, g)
    close = []
    for c, d in zip(history, dist):
        if c in wrong:
            continue
        if d < delta - DIST_TOL or (strict and d <= delta + DIST_TOL):
            close.append(c)
    blockers = tuple(sorted(wrong + close, key=lambda c: c.point))
    reason = "historical cases lie within distance delta of the goal" if blockers else ""
    return AchievabilityReport(not blockers, theta, PARALLEL, delta, blockers, reason)


# ---------------------------------------------------------------------------
# Two-point teaching


@dataclass(frozen=True)
class TeachingPlan:
    points: tuple
    expected_labels: tuple


def _anchor(f_star: LinearSeparator, g: LinearSeparator, case: str) -> np.ndarray:
    """A point on ``g``: the min-norm common point, or the foot of ``g``."""
    if case == INTERSECTING:
        A = np.vstack([g.w, f_star.w])
        rhs = -np.array([g.offset, f_star.offset])
        return np.linalg.lstsq(A, rhs, rcond=None)[0]
    return -g.offset * g.w


def teach_two_points(f_star: LinearSeparator, g: LinearSeparator, history) -> TeachingPlan:
    """Two filings that make the max-margin lower court output exactly ``g``.

    The filings are ``x0 +- t * w_g`` for a point ``x0`` on ``g``. ``t`` is
    half the smallest distance from a historical case to ``g`` (1 without
    history), pushed beyond ``delta`` when the normals are parallel.

    Raises:
        NotAchievableError: ``g`` fails the achievability test; the report
            is attached.
    """
    history = _as_precedent(history)
    report = check_achievable(f_star, g, history)
    if not report.achievable:
        raise NotAchievableError(f"goal is not achievable: {report.reason}", report)
    x0 = _anchor(f_star, g, report.case)
    hmin = float(np.min(np.abs(g.decision(history.points())))) if len(history) else math.inf
    if report.case == PARALLEL:
        delta, strict = _parallel_geometry(f_star, g)
        t = _parallel_step(delta, strict, hmin)
    else:
        t = hmin / 2.0 if math.isfinite(hmin) else 1.0
    plus, minus = x0 + t * g.w, x0 - t * g.w
    points = (as_point(plus), as_point(minus))
    labels = tuple(evaluate(f_star, p) for p in points)
    if labels != (Label.POSITIVE, Label.NEGATIVE):
        raise NotAchievableError("teaching points fall on the wrong side of the high court", report)
    return TeachingPlan(points, labels)


def _parallel_step(delta: float, strict: bool, hmin: float) -> float:
    """Half-width of the teaching pair when the normals are parallel.

    It must reach ``delta`` (strictly beyond it when ``strict``) and stay
    below every historical distance so the pair are the only support vectors.
    """
    if not math.isfinite(hmin):
        return max(1.0, 2.0 * delta)
    half = hmin / 2.0
    if half > delta or (half == delta and not strict):
        return half
    if strict or hmin > delta:
        return 0.5 * (delta + hmin)
    return delta


# ---------------------------------------------------------------------------
# Best achievable proxy


def _achievable_mask(W: np.ndarray, B: np.ndarray, f_star: LinearSeparator, history: PrecedentSet) -> np.ndarray:
    """Vectorized :func:`check_achievable` over candidate separators ``(W, B)``."""
    cos = W @ f_star.w
    ok = cos > COS_TOL
    if len(history):
        H = history.points()
        y = history.signs()
        dec = W @ H.T + B[:, None]
        glab = np.where(dec >= 0, 1.0, -1.0)
        agree = np.all(glab == y[None, :], axis=1)
        dist = np.abs(dec)
        hmin = dist.min(axis=1)
    else:
        agree = np.ones(len(W), dtype=bool)
        hmin = np.full(len(W), np.inf)
    inter = ok & (cos < 1.0 - COS_TOL)
    ok_inter = agree & (hmin > DIST_TOL)
    par = ok & ~inter
    # parallel: distance from the foot of each candidate to the court's boundary
    s = (W * (-B[:, None])) @ f_star.w + f_star.offset
    delta, strict = np.abs(s), s >= 0.0
    if len(history):
        bad = (dist < delta[:, None] - DIST_TOL) | (strict[:, None] & (dist <= delta[:, None] + DIST_TOL))
        ok_par = agree & ~np.any(bad, axis=1)
    else:
        ok_par = np.ones(len(W), dtype=bool)
    return (inter & ok_inter) | (par & ok_par)


def _subset_separators(S: np.ndarray):
    """Max-margin separators of every labeled subset of 2..d+1 sample points.

    A subset's own max-margin separator is the KKT solution of some subset of
    it with every point on the margin, so solving the all-on-margin system
    for every labeled subset yields exactly the separators induced by
    subsets of size at most d+1.
    """
    n, d = S.shape
    Ws, Bs = [], []
    for k in range(2, min(d + 1, n) + 1):
        idx = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp)
        if idx.size == 0:
            continue
        signs = np.array(
            [s for s in itertools.product((-1.0, 1.0), repeat=k) if min(s) < 0 < max(s)]
        )
        P = np.repeat(S[idx], len(signs), axis=0)
        Y = np.tile(signs, (len(idx), 1))
        unit, offset, _, ok = _kkt_solve(P, Y)
        Ws.append(unit[ok])
        Bs.append(offset[ok])
    if not Ws:
        return np.zeros((0, d)), np.zeros(0)
    return np.concatenate(Ws), np.concatenate(Bs)


@dataclass(frozen=True)
class BestAchievable:
    """A forceable stand-in for the goal and its disagreement on the sample.

    ``fallback`` is set when nothing on the sample was achievable and the
    all-positive rule was returned instead.
    """

    proxy: LinearSeparator | ConstantRule
    sample_error: float
    n_candidates: int
    sample: np.ndarray = field(repr=False, compare=False)
    fallback: bool = False


def sample_error(rule, g: LinearSeparator, S: np.ndarray) -> float:
    """Fraction of the rows of ``S`` on which ``rule`` and ``g`` disagree."""
    return float(np.mean(evaluate_many(rule, S) != evaluate_many(g, S)))


def best_achievable(
    f_star: LinearSeparator,
    g: LinearSeparator,
    history,
    sampler: SamplerSpec,
    epsilon: float = 0.05,
    *,
    n_samples: int | None = None,
) -> BestAchievable:
    """Achievable separator with the least disagreement with ``g`` on a sample.

    Draws ``ceil(d / epsilon^2 * ln(1 / epsilon))`` points unless
    ``n_samples`` is given. Candidates are the max-margin separators of every
    labeled sample subset of size at most d+1 that pass the achievability
    test. Ties go to the smallest angle with ``f_star``, then the
    lexicographically smallest ``(normal, offset)``.
    """
    history = _as_precedent(history)
    d = _check_dims(f_star, g, history)
    if sampler.dim != d:
        raise InvalidInputError(f"sampler is {sampler.dim}-d but the separators are {d}-d")
    n = n_samples if n_samples is not None else default_sample_size(d, epsilon)
    S = sampler.sample(n)
    if check_achievable(f_star, g, history).achievable:
        return BestAchievable(g, sample_error(g, g, S), 1, S)
    W, B = _subset_separators(S)
    keep = _achievable_mask(W, B, f_star, history)
    W, B = W[keep], B[keep]
    if len(W) == 0:
        warnings.warn("no achievable candidate on the sample; falling back to the all-positive rule")
        rule = ConstantRule(Label.POSITIVE, d)
        return BestAchievable(rule, sample_error(rule, g, S), 0, S, fallback=True)
    glab = np.where(g.decision(S) >= 0, 1.0, -1.0)
    cand = np.where(W @ S.T + B[:, None] >= 0, 1.0, -1.0)
    errors = np.count_nonzero(cand != glab[None, :], axis=1)
    theta = np.round(np.degrees(np.arccos(np.clip(W @ f_star.w, -1.0, 1.0))), 12)
    keys = [np.round(B, 12)] + [np.round(W[:, i], 12) for i in range(d - 1, -1, -1)] + [theta, errors]
    best = int(np.lexsort(keys)[0])
    proxy = LinearSeparator.from_raw(W[best], B[best])
    return BestAchievable(proxy, errors[best] / n, len(W), S)


# ---------------------------------------------------------------------------
# Pool enumeration


@dataclass(frozen=True)
class PoolFunction:
    rule: LinearSeparator | ConstantRule
    subset: tuple


def rules_match(a, b, tol: float = DEDUP_TOL) -> bool:
    if isinstance(a, ConstantRule) or isinstance(b, ConstantRule):
        return isinstance(a, ConstantRule) and isinstance(b, ConstantRule) and a.label == b.label
    return same_separator(a, b, tol)


def _fit_with(f_star, history: PrecedentSet, subset, d: int):
    cases = [LabeledCase(p, evaluate(f_star, p)) for p in subset]
    return svm_fit(history.union(cases), d).rule


def enumerate_pool_functions(f_star: LinearSeparator, history, pool, *, tol: float = DEDUP_TOL) -> list:
    """Distinct lower-court rules reachable by filing subsets of ``pool``.

    Only subsets of at most d+1 points are tried; a max-margin separator is
    pinned down by at most d+1 support vectors, so larger subsets add
    nothing. Each distinct rule keeps the first subset that produced it.
    Constant rules from one-class precedent are kept; subsets whose
    precedent cannot be separated are skipped.
    """
    history = _as_precedent(history)
    pts = [as_point(p) for p in pool]
    if len(pts) > MAX_POOL:
        raise InvalidInputError(f"pool of {len(pts)} exceeds the desk-scale bound of {MAX_POOL}")
    d = f_star.dim
    if d > MAX_POOL_DIM:
        raise InvalidInputError(f"dimension {d} exceeds the desk-scale bound of {MAX_POOL_DIM}")
    if any(len(p) != d for p in pts):
        raise InvalidInputError("pool points must match the high court's dimension")
    found: list = []
    for k in range(0, min(d + 1, len(pts)) + 1):
        for subset in itertools.combinations(pts, k):
            try:
                rule = _fit_with(f_star, history, subset, d)
            except InconsistentPrecedentError:
                continue
            if not any(rules_match(rule, f.rule, tol) for f in found):
                found.append(PoolFunction(rule, subset))
    return found


# ---------------------------------------------------------------------------
# Teaching while overturning stale precedent


@dataclass(frozen=True)
class OverturnTeachConfig:
    """Finite stand-ins for the construction's limits.

    ``None`` fields scale with the data radius ``R = max(1, extent)``:
    ``epsilon = 1e-3 R``, ``alpha = 1e3 R``, ``big_m = 1e6 R``. ``c_half``
    overrides the boundary point's distance from the frame origin.
    Each retry divides ``epsilon`` by 10 and multiplies ``alpha`` and
    ``big_m`` by 10.
    """

    epsilon: float | None = None
    alpha: float | None = None
    big_m: float | None = None
    c_half: float | None = None
    retries: int = 4
    allow_goal_labeled_stale: bool = False
    policy: object = LexicographicFirst()

    def __post_init__(self):
        if self.retries < 1:
            raise InvalidInputError("retries must be at least 1")
        vals = [v for v in (self.epsilon, self.alpha, self.big_m) if v is not None]
        if any(v <= 0 for v in vals):
            raise InvalidInputError("epsilon, alpha and big_m must be positive")
        if self.epsilon is not None and self.alpha is not None and not self.epsilon < self.alpha:
            raise InvalidInputError("need epsilon < alpha")
        if self.alpha is not None and self.big_m is not None and not self.alpha < self.big_m:
            raise InvalidInputError("need alpha < big_m")


def _complement(basis: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal rows spanning the complement of the rows of ``basis``."""
    if len(basis) >= d:
        return np.zeros((0, d))
    _, _, vt = np.linalg.svd(basis, full_matrices=True)
    return vt[len(basis):]


@dataclass(frozen=True)
class _Frame:
    origin: np.ndarray
    axes: np.ndarray  # rows e1..ed

    def point(self, local) -> tuple:
        return as_point(self.origin + np.asarray(local) @ self.axes)


def _stale_diagnosis(f_star, g, stale, report: AchievabilityReport, relax: bool):
    problems = []
    delta, _ = _parallel_geometry(f_star, g) if report.case == PARALLEL else (0.0, False)
    for c in stale:
        gl = g(c.point)
        dist = abs(float(g.decision([c.point])[0]))
        if gl == c.label:
            if not (relax and report.case == INTERSECTING):
                problems.append(f"stale case {c.point} carries the goal's label")
            continue
        if report.case == INTERSECTING and dist <= DIST_TOL:
            problems.append(f"stale case {c.point} lies on the goal's boundary")
        if report.case == PARALLEL and dist <= delta + DIST_TOL:
            problems.append(f"stale case {c.point} lies within distance delta of the goal")
    return problems


def _construction(f_star, g, report, frame: _Frame, eps, alpha, big_m, c_half, d):
    """The filings, in order, for one choice of finite parameters."""
    if report.case == INTERSECTING:
        wg = frame.axes @ g.w  # g's normal in frame coordinates
        e1 = np.eye(d)[0]
        perp = e1 - wg[0] * wg
        perp /= np.linalg.norm(perp)
        local = [eps * wg, -eps * wg]
        for i in range(2, d):
            for sgn in (1.0, -1.0):
                local.append(eps * wg + sgn * big_m * np.eye(d)[i])
        local.append(eps * wg + alpha * perp)
        if c_half is None:
            # off the court's boundary by as much as eps * w_g, so rounding
            # cannot hand this point a negative label
            local.append(alpha * np.eye(d)[1] + eps * wg[0] * e1)
        else:
            # stale cases on the boundary must lie on the segment between
            # these two, so both stay on the boundary itself
            local.append(alpha * np.eye(d)[1])
            local.append(c_half * np.eye(d)[1])
    else:
        delta, _ = _parallel_geometry(f_star, g)
        r = delta + eps
        local = [r * np.eye(d)[0], -r * np.eye(d)[0]]
        for i in range(1, d):
            for sgn in (1.0, -1.0):
                local.append(r * np.eye(d)[0] + sgn * big_m * np.eye(d)[i])
    return [_positive_if_on_edge(f_star, frame.point(v)) for v in local]


def _positive_if_on_edge(f_star: LinearSeparator, p: tuple) -> tuple:
    """Nudge a point meant to sit on the court's boundary onto its positive side.

    Frame arithmetic can leave such a point a few ulps on the negative
    side; the boundary itself belongs to the positive class.
    """
    x = np.array(p)
    dec = float(f_star.decision([x])[0])
    if dec >= 0.0 or dec < -1e-9 * max(1.0, float(np.max(np.abs(x)))):
        return p
    step = -dec
    while float(f_star.decision([x])[0]) < 0.0:
        x = x + step * f_star.w
        step *= 2.0
    return as_point(x)


def _frame_for(f_star, g, report, d) -> _Frame:
    if report.case == INTERSECTING:
        origin = _anchor(f_star, g, INTERSECTING)
        e1 = f_star.w
        e2 = g.w - float(np.dot(g.w, e1)) * e1
        e2 /= np.linalg.norm(e2)
        axes = np.vstack([e1, e2, _complement(np.vstack([e1, e2]), d)])
    else:
        origin = -g.offset * g.w
        axes = np.vstack([g.w, _complement(g.w[None, :], d)])
    return _Frame(origin, axes)


def teach_with_overturning(
    f_star: LinearSeparator,
    g: LinearSeparator,
    history_with_stale,
    config: OverturnTeachConfig = OverturnTeachConfig(),
) -> tuple:
    """At most 2d+1 filings that clear stale precedent and then teach ``g``.

    Stale cases are those whose stored label the high court now disagrees
    with; each must also disagree with ``g``. The filings are verified by
    running a full court session; on failure the parameters are pushed
    further toward their limits and the construction is retried.

    Raises:
        NotAchievableError: ``g`` fails the achievability test on current
            precedent, or a stale case violates the construction's
            preconditions.
        ConstructionFailedError: verification still fails after all retries.
    """
    history = _as_precedent(history_with_stale)
    d = _check_dims(f_star, g, history)
    stale = disagreeing_cases(history, f_star)
    current = history.without(stale)
    report = check_achievable(f_star, g, current)
    if not report.achievable:
        raise NotAchievableError(f"goal is not achievable: {report.reason}", report)
    problems = _stale_diagnosis(f_star, g, stale, report, config.allow_goal_labeled_stale)
    if problems:
        raise NotAchievableError("; ".join(problems), report)
    if not stale:
        return teach_two_points(f_star, g, current).points

    frame = _frame_for(f_star, g, report, d)
    local_pts = (np.array([c.point for c in history]) - frame.origin) @ frame.axes.T
    radius = max(1.0, float(np.max(np.abs(local_pts))), report.delta)
    eps = config.epsilon if config.epsilon is not None else 1e-3 * radius
    if len(current):
        gap = float(np.min(np.abs(g.decision(current.points())))) - report.delta
        eps = min(eps, 0.5 * gap) if gap > 0 else eps
    alpha = config.alpha if config.alpha is not None else 1e3 * radius
    big_m = config.big_m if config.big_m is not None else 1e6 * radius

    c_half = config.c_half
    if c_half is None and report.case == INTERSECTING:
        on_edge = [
            c for c in stale
            if c.label == Label.NEGATIVE and abs(float(f_star.decision([c.point])[0])) <= DIST_TOL
        ]
        if on_edge:
            c = min(float(np.linalg.norm(np.asarray(x.point) - frame.origin)) for x in on_edge)
            c_half = c / 2.0

    last = None
    for _ in range(config.retries):
        filings = _construction(f_star, g, report, frame, eps, alpha, big_m, c_half, d)
        transcript = run_session(f_star, "svm", history, filings, policy=config.policy)
        removed = {c.point for c in transcript.removed}
        if all(c.point in removed for c in stale) and same_separator(transcript.final.rule, g):
            return tuple(filings)
        last = transcript.final.rule
        eps, alpha, big_m = eps / 10.0, alpha * 10.0, big_m * 10.0
    raise ConstructionFailedError(
        f"finite construction failed after {config.retries} attempts; last learned rule {last}"
    )
