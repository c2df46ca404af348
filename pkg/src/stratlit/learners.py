"""The lower court's learners: 1D nearest neighbor and exact hard-margin SVM."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from stratlit.core import (
    ConstantRule,
    Label,
    LabeledCase,
    LinearSeparator,
    Piecewise1DFn,
    PrecedentSet,
    canonicalize,
)
from stratlit.errors import InconsistentPrecedentError, InvalidInputError

SEPARABILITY_MARGIN = 1e-12
FEASIBILITY_RTOL = 1e-9
CONDITION_LIMIT = 1e16
RESIDUAL_TOL = 1e-8
ROUNDING_SLACK = 10.0
RELIABLE_ERROR = 1e-6
_CHUNK = 20000


def _as_cases(precedent) -> list:
    if isinstance(precedent, PrecedentSet):
        return list(precedent.cases)
    cases = []
    for c in precedent:
        if isinstance(c, LabeledCase):
            cases.append(c)
        else:
            p, y = c
            cases.append(LabeledCase(p, Label.parse(y)))
    return cases


def nn_fit(precedent, domain=(0.0, 1.0)) -> Piecewise1DFn:
    """Nearest-neighbor rule on ``domain`` induced by 1D precedent.

    Boundaries sit at midpoints between consecutive differently-labeled cases.
    An exact midpoint goes to the left neighbor, so the stored boundary is the
    next float above the midpoint. No precedent gives the all-positive rule.
    """
    lo, hi = float(domain[0]), float(domain[1])
    cases = _as_cases(precedent)
    seen: dict = {}
    for c in cases:
        if c.dim != 1:
            raise InvalidInputError(f"nearest neighbor is 1D only; got point {c.point}")
        x = c.point[0]
        if not lo <= x <= hi:
            raise InvalidInputError(f"case {x} outside domain {(lo, hi)}")
        if x in seen and seen[x] != c.label:
            raise InconsistentPrecedentError(f"conflicting labels at duplicate coordinate {x}")
        seen[x] = c.label
    if not seen:
        return Piecewise1DFn.constant(Label.POSITIVE, (lo, hi))
    xs = sorted(seen)
    labels = [seen[xs[0]]]
    bounds = []
    for a, b in zip(xs, xs[1:]):
        if seen[b] != labels[-1]:
            mid = 0.5 * (a + b)
            nudged = math.nextafter(mid, math.inf)
            bounds.append(nudged if nudged < hi else mid)
            labels.append(seen[b])
    return canonicalize(Piecewise1DFn(tuple(labels), tuple(bounds), (lo, hi)))


# ---------------------------------------------------------------------------
# Exact hard-margin SVM


@dataclass(frozen=True)
class SvmModel:
    """Max-margin fit. Degenerate fits (empty or one class) carry a constant rule."""

    separator: LinearSeparator | None
    support_vectors: tuple
    margin: float
    constant_label: Label | None = None
    dim: int = 1

    @property
    def degenerate(self) -> bool:
        return self.separator is None

    @property
    def rule(self):
        if self.separator is None:
            return ConstantRule(self.constant_label, self.dim)
        return self.separator


def _kkt_solve(P: np.ndarray, Y: np.ndarray):
    """Solve the equality KKT system for a batch of labeled point subsets.

    ``P`` has shape ``(m, k, d)`` and ``Y`` shape ``(m, k)``; every point of a
    subset is assumed to sit exactly on the margin. Coordinates are shifted
    to the subset's smallest point and scaled before solving. Returns unit normals, global
    offsets, margins and a validity mask (solvable, nonnegative multipliers).
    """
    m, k, _ = P.shape
    # translating by the smallest member adds no more rounding than the points
    # already carry, unlike the mean, which can swamp small points next to huge ones
    nearest = np.linalg.norm(P, axis=2).argmin(axis=1)
    centre = P[np.arange(m), nearest]
    Q = P - centre[:, None, :]
    scale = np.abs(Q).max(axis=(1, 2))
    scale = np.where(scale > 0, scale, 1.0)
    Q = Q / scale[:, None, None]
    # augmented system in (w, b, alpha); it avoids squaring the conditioning
    # the way the Gram-matrix dual does for mixed-scale subsets
    d = Q.shape[2]
    Z = Q * Y[:, :, None]
    n = d + 1 + k
    A = np.zeros((m, n, n))
    A[:, :d, :d] = np.eye(d)
    A[:, :d, d + 1 :] = -np.transpose(Z, (0, 2, 1))
    A[:, d, d + 1 :] = -Y
    A[:, d + 1 :, :d] = -Z
    A[:, d + 1 :, d] = -Y
    rhs = np.zeros((m, n))
    rhs[:, d + 1 :] = -1.0
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(A)
    ok = np.isfinite(cond) & (cond < CONDITION_LIMIT)
    sol = np.full((m, n), np.nan)
    if ok.any():
        sol[ok] = _solve_rows(A[ok], rhs[ok])
        # ill-conditioned systems stay usable only if the solve is accurate
        As, xs = A[ok], sol[ok]
        resid = np.abs(np.einsum("mij,mj->mi", As, xs) - rhs[ok]).max(axis=1)
        size = 1.0 + np.abs(As).max(axis=(1, 2)) * np.abs(xs).max(axis=1)
        ok[ok] = resid <= RESIDUAL_TOL * size
    w_loc, b_loc, alpha = sol[:, :d], sol[:, d], sol[:, d + 1 :]
    amax = np.nanmax(np.abs(alpha), axis=1, initial=0.0)
    ok &= np.all(alpha >= -FEASIBILITY_RTOL * np.maximum(amax, 1.0)[:, None], axis=1)
    norm = np.linalg.norm(w_loc, axis=1)
    ok &= np.isfinite(norm) & (norm > 0)
    norm = np.where(ok, norm, 1.0)
    unit = w_loc / norm[:, None]
    margin = scale / norm
    offset = scale * b_loc / norm - np.einsum("md,md->m", unit, centre)
    return unit, offset, margin, ok


def _solve_rows(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched ``solve``; rows that turn out exactly singular become NaN."""
    try:
        return np.linalg.solve(A, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.full(rhs.shape, np.nan)
        for r in range(len(A)):
            try:
                out[r] = np.linalg.solve(A[r], rhs[r])
            except np.linalg.LinAlgError:
                pass
        return out


def _kkt_candidates(X: np.ndarray, y: np.ndarray, idx: np.ndarray):
    """:func:`_kkt_solve` for the subsets of ``X`` named by the rows of ``idx``."""
    return _kkt_solve(X[idx], y[idx])


def _max_margin(X: np.ndarray, y: np.ndarray):
    """Exact max-margin separator by support-subset enumeration.

    Returns ``(normal, offset, margin)`` or ``None`` if not strictly separable.
    """
    n, d = X.shape
    xnorm = np.linalg.norm(X, axis=1)
    best = None
    for k in range(2, min(d + 1, n) + 1):
        combos = itertools.combinations(range(n), k)
        while True:
            chunk = np.fromiter(
                itertools.chain.from_iterable(itertools.islice(combos, _CHUNK)), dtype=np.intp
            )
            if chunk.size == 0:
                break
            idx = chunk.reshape(-1, k)
            labs = y[idx]
            idx = idx[(labs.max(axis=1) > 0) & (labs.min(axis=1) < 0)]
            if idx.size == 0:
                continue
            unit, offset, margin, ok = _kkt_candidates(X, y, idx)
            if not ok.any():
                continue
            unit, offset, margin, idx = unit[ok], offset[ok], margin[ok], idx[ok]
            fm = y[None, :] * (unit @ X.T + offset[:, None])
            # support points sit exactly on the margin in exact arithmetic, so
            # their computed deviation measures this candidate's rounding error
            own = np.take_along_axis(fm, idx, axis=1)
            err = np.abs(own - margin[:, None]).max(axis=1)
            # only trust that estimate while it is negligible next to the margin
            err = np.where(err <= RELIABLE_ERROR * margin, err, 0.0)
            tol = (
                FEASIBILITY_RTOL * margin[:, None]
                + 1e-13 * (xnorm[None, :] + np.abs(offset)[:, None])
                + ROUNDING_SLACK * err[:, None]
            )
            feas = np.all(fm >= margin[:, None] - tol, axis=1)
            for u, b, mg in zip(unit[feas], offset[feas], margin[feas]):
                key = (-round(float(mg), 12), tuple(np.round(u, 12)), round(float(b), 12))
                if best is None or key < best[0]:
                    best = (key, u, float(b), float(mg))
    if best is None:
        return None
    return best[1], best[2], best[3]


def _separates_exactly(X: np.ndarray, y: np.ndarray, normal, offset: float) -> bool:
    """Whether ``y * (normal . x + offset) > 0`` for every row, in exact rationals."""
    wq = [Fraction(float(v)) for v in normal]
    bq = Fraction(float(offset))
    for x, s in zip(X, y):
        if s * sum((a * Fraction(float(b)) for a, b in zip(wq, x)), bq) <= 0:
            return False
    return True


def _hulls_meet(X: np.ndarray, y: np.ndarray) -> bool:
    """Whether the convex hulls of the two classes share a point, decided exactly.

    Phase-one simplex over rationals (Bland's rule) on the system
    ``sum_i lam_i y_i x_i = 0``, unit weight on each class, ``lam >= 0``.
    Float data converts to rationals without loss, so the answer is exact.
    """
    n, d = X.shape
    rows = [[Fraction(float(v)) * int(s) for v, s in zip(X[:, j], y)] for j in range(d)]
    rows.append([Fraction(int(s > 0)) for s in y])
    rows.append([Fraction(int(s < 0)) for s in y])
    rhs = [Fraction(0)] * d + [Fraction(1), Fraction(1)]
    m = d + 2
    tab = [row + [Fraction(int(i == r)) for i in range(m)] + [rhs[r]] for r, row in enumerate(rows)]
    basis = [n + r for r in range(m)]
    # reduced costs of the artificial-sum objective; the last entry is minus its value
    obj = [-sum(tab[r][c] for r in range(m)) for c in range(n)] + [Fraction(0)] * m + [-sum(rhs)]
    while True:
        enter = next((c for c in range(n + m) if obj[c] < 0), None)
        if enter is None:
            return obj[-1] == 0
        best = None
        for r in range(m):
            if tab[r][enter] > 0:
                key = (tab[r][-1] / tab[r][enter], basis[r])
                if best is None or key < best[0]:
                    best = (key, r)
        pr = best[1]
        pivot = tab[pr][enter]
        tab[pr] = [v / pivot for v in tab[pr]]
        for r in range(m):
            f = tab[r][enter]
            if r != pr and f != 0:
                tab[r] = [a - f * b for a, b in zip(tab[r], tab[pr])]
        f = obj[enter]
        obj = [a - f * b for a, b in zip(obj, tab[pr])]
        basis[pr] = enter


def _solve_exact(A: list, rhs: list):
    """Gauss-Jordan over rationals; ``None`` when the system is singular."""
    n = len(A)
    M = [row[:] + [v] for row, v in zip(A, rhs)]
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c] != 0), None)
        if p is None:
            return None
        M[c], M[p] = M[p], M[c]
        inv = 1 / M[c][c]
        M[c] = [v * inv for v in M[c]]
        for r in range(n):
            f = M[r][c]
            if r != c and f != 0:
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return [M[r][n] for r in range(n)]


def _max_margin_exact(X: np.ndarray, y: np.ndarray):
    """Support-subset enumeration in exact rationals; slow but immune to conditioning.

    Each subset's points are put on the margin ``y (w . x + b) = 1``; among the
    candidates satisfying every constraint, the smallest ``w . w`` is the
    maximum margin. Returns ``(normal, offset, margin)`` rounded to floats, or
    ``None`` when no candidate is feasible.
    """
    n, d = X.shape
    P = [[Fraction(float(v)) for v in row] for row in X]
    ys = [int(v) for v in y]
    G = [[sum((a * b for a, b in zip(P[i], P[j])), Fraction(0)) for j in range(n)] for i in range(n)]
    best = None
    for k in range(2, min(d + 1, n) + 1):
        for S in itertools.combinations(range(n), k):
            if len({ys[i] for i in S}) < 2:
                continue
            A = [[ys[i] * ys[j] * G[i][j] for j in S] + [Fraction(ys[i])] for i in S]
            A.append([Fraction(ys[j]) for j in S] + [Fraction(0)])
            sol = _solve_exact(A, [Fraction(1)] * k + [Fraction(0)])
            if sol is None:
                continue
            coef, b = [a * ys[i] for a, i in zip(sol, S)], sol[k]
            if any(ys[l] * (sum((c * G[i][l] for c, i in zip(coef, S)), b)) < 1 for l in range(n)):
                continue
            ww = sum(coef[a] * coef[c] * G[S[a]][S[c]] for a in range(k) for c in range(k))
            if ww > 0 and (best is None or ww < best[0]):
                best = (ww, coef, S, b)
    if best is None:
        return None
    ww, coef, S, b = best
    w = [sum((c * P[i][j] for c, i in zip(coef, S)), Fraction(0)) for j in range(d)]
    norm = math.sqrt(ww)
    return np.array([float(v) for v in w]) / norm, float(b) / norm, 1.0 / norm


def _split_classes(cases):
    pos = [c for c in cases if c.label is Label.POSITIVE]
    neg = [c for c in cases if c.label is Label.NEGATIVE]
    return pos, neg


def svm_fit(precedent, dim: int | None = None) -> SvmModel:
    """Hard-margin maximum-margin separator of the precedent.

    Empty precedent yields the all-positive constant rule and single-class
    precedent the constant rule of that class; both are flagged degenerate
    with an infinite margin. Raises :class:`InconsistentPrecedentError` when
    the two classes cannot be strictly separated.
    """
    # canonical order makes the fit independent of how the cases were listed
    cases = sorted(_as_cases(precedent), key=lambda c: (c.point, int(c.label)))
    pos, neg = _split_classes(cases)
    if not pos or not neg:
        label = Label.NEGATIVE if neg else Label.POSITIVE
        dim = cases[0].dim if cases else dim or 1
        return SvmModel(None, (), math.inf, label, dim)
    X = np.array([c.point for c in cases], dtype=float)
    y = np.array([int(c.label) for c in cases], dtype=float)
    found = _max_margin(X, y)
    if found is None or found[2] <= SEPARABILITY_MARGIN or not _separates_exactly(X, y, found[0], found[1]):
        # floating point failed on this data; fall back to exact arithmetic
        found = None if _hulls_meet(X, y) else _max_margin_exact(X, y)
    if found is None or found[2] <= SEPARABILITY_MARGIN:
        raise InconsistentPrecedentError("precedent is not linearly separable")
    u, b, mg = found
    sep = LinearSeparator.from_raw(u, b)
    dist = y * sep.decision(X)
    tol = FEASIBILITY_RTOL * mg + 1e-13 * (np.linalg.norm(X, axis=1) + abs(sep.offset))
    svs = tuple(c for c, dd, t in zip(cases, dist, tol) if dd <= mg + t)
    return SvmModel(sep, svs, mg, None, sep.dim)


def is_separable(precedent, hypothesis: str = "linear") -> bool:
    """Whether some rule in the hypothesis class fits every case.

    ``hypothesis`` is ``"linear"`` (strict separation) or ``"nn"`` (fails
    only on duplicate conflicts). A linear answer is settled by a float
    separator that passes an exact rational check, or otherwise by an exact
    test of whether the two class hulls meet.
    """
    cases = _as_cases(precedent)
    if hypothesis == "nn":
        seen: dict = {}
        for c in cases:
            if seen.setdefault(c.point, c.label) != c.label:
                return False
        return True
    if hypothesis != "linear":
        raise InvalidInputError(f"unknown hypothesis class {hypothesis!r}")
    pos, neg = _split_classes(cases)
    if not pos or not neg:
        return True
    if {c.point for c in pos} & {c.point for c in neg}:
        return False
    X = np.array([c.point for c in cases], dtype=float)
    y = np.array([int(c.label) for c in cases], dtype=float)
    found = _max_margin(X, y)
    if found is not None and found[2] > SEPARABILITY_MARGIN and _separates_exactly(X, y, found[0], found[1]):
        return True
    # floating point cannot resolve margins this small relative to the data,
    # so settle the question exactly
    return not _hulls_meet(X, y)


def fit(precedent, learner: str, domain=(0.0, 1.0), dim: int | None = None):
    """Dispatch to the named learner and return the learned rule."""
    if learner == "nn":
        return nn_fit(precedent, domain)
    if learner == "svm":
        return svm_fit(precedent, dim).rule
    raise InvalidInputError(f"unknown learner {learner!r}")


def margin_gap(model: SvmModel, cases: Iterable[LabeledCase]) -> float:
    """|min positive distance - min negative distance| to the separator."""
    cases = list(cases)
    X = np.array([c.point for c in cases], dtype=float)
    y = np.array([int(c.label) for c in cases])
    dist = np.abs(model.separator.decision(X))
    return abs(float(dist[y > 0].min()) - float(dist[y < 0].min()))
