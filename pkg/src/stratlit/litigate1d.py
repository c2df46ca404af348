"""Optimal case selection for the 1D nearest-neighbor lower court.

The dynamic program keeps, for each pool point, the least error reachable
when that point is the rightmost one filed. Adding the next point to the
right only changes the learned rule on the truncated interval right of the
previous pick, so transitions are local and the whole table costs
``O(|P|^2)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from stratlit.core import Era, Label, LabeledCase, Piecewise1DFn, PrecedentSet, evaluate
from stratlit.errors import InvalidInputError
from stratlit.learners import nn_fit
from stratlit.measure import PiecewiseUniform1D, discrepancy_1d

TIE_TOL = 1e-12
ORACLE_MAX_POOL = 20
_CHUNK = 1 << 18
_BLOCK = 32


@dataclass(frozen=True)
class Pool1D:
    points: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if any(not a < b for a, b in zip(pts, pts[1:])):
            raise InvalidInputError("pool points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def of(cls, points: Sequence[float]) -> "Pool1D":
        return cls(tuple(sorted(set(float(p) for p in points))))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Step:
    chosen: tuple
    error: float


@dataclass(frozen=True)
class SelectionResult:
    chosen: tuple
    labels: tuple
    achieved_error: float
    learned: Piecewise1DFn
    steps: tuple = field(default=())


def _as_pool(pool) -> Pool1D:
    if isinstance(pool, Pool1D):
        return pool
    return Pool1D.of(pool)


def _domain(f_star, g, dist) -> tuple:
    dom = dist.domain
    for fn in (f_star, g):
        if fn.domain != dom:
            raise InvalidInputError(f"function domain {fn.domain} differs from distribution domain {dom}")
    return dom


def _check_inputs(f_star, g, dist, history, pool, allow_stale: bool):
    lo, hi = _domain(f_star, g, dist)
    for c in history:
        if c.dim != 1:
            raise InvalidInputError(f"history case {c.point} is not 1D")
        if not lo <= c.point[0] <= hi:
            raise InvalidInputError(f"history case {c.point[0]} outside domain")
        if not allow_stale and evaluate(f_star, c.point) != c.label:
            raise InvalidInputError(
                f"history case at {c.point[0]} disagrees with the high court; use solve_with_relabel"
            )
    for x in pool.points:
        if not lo <= x <= hi:
            raise InvalidInputError(f"pool point {x} outside domain")


def learned_after(f_star, history: PrecedentSet, chosen, domain) -> Piecewise1DFn:
    """Lower-court rule once ``chosen`` points are decided; duplicates replace history."""
    filed = [LabeledCase((x,), f_star(x), Era.CURRENT) for x in chosen]
    return nn_fit(history.union(filed), domain)


def _result(f_star, g, dist, history, chosen, steps=()) -> SelectionResult:
    chosen = tuple(sorted(chosen))
    learned = learned_after(f_star, history, chosen, dist.domain)
    err = discrepancy_1d(learned, g, dist.domain, dist)
    return SelectionResult(chosen, tuple(f_star(x) for x in chosen), err, learned, tuple(steps))


# ---------------------------------------------------------------------------
# Mass bookkeeping for the transitions


class _Mismatch:
    """Cumulative mass where a constant label disagrees with ``g``.

    Probability mass stands in for length, which is what rescaling every
    coordinate through the CDF achieves; nearest-neighbor distances stay in
    case coordinates.
    """

    def __init__(self, g: Piecewise1DFn, dist: PiecewiseUniform1D):
        lo, hi = dist.domain
        knots = sorted({lo, hi, *dist.breakpoints, *(b for b in g.boundaries if lo < b < hi)})
        self.knots = np.array(knots)
        cdf = dist.cdf(self.knots)
        mass = np.diff(cdf)
        glab = np.array([float(g(a)) for a in knots[:-1]])
        pos = np.concatenate([[0.0], np.cumsum(np.where(glab < 0, mass, 0.0))])
        neg = np.concatenate([[0.0], np.cumsum(np.where(glab > 0, mass, 0.0))])
        self.lo, self.hi = lo, hi
        # one lookup table for both labels: negative-label queries are
        # shifted past the domain so a single interp serves every cell
        self.shift = 2.0 * (hi - lo) + 1.0
        self.table_x = np.concatenate([self.knots, self.knots + self.shift])
        self.table_y = np.concatenate([pos, neg])

    def cum(self, label, x):
        """Mass of ``[lo, x]`` on which a constant ``label`` disagrees with ``g``."""
        x = np.asarray(x, dtype=float)
        return np.interp(np.where(np.asarray(label) > 0, x, x + self.shift), self.table_x, self.table_y)

    def span(self, label, a, b):
        return self.cum(label, b) - self.cum(label, a)

    def cost(self, ax, al, a_edge, bx, bl, b_edge):
        """Error of the NN rule between adjacent training points ``a < b``.

        ``a_edge``/``b_edge`` flag a missing neighbor (domain end); the other
        point's label then holds up to the end.
        """
        ax = np.where(a_edge, self.lo, ax)
        bx = np.where(b_edge, self.hi, bx)
        al = np.where(a_edge, bl, al)
        bl = np.where(b_edge, al, bl)
        mid = 0.5 * (ax + bx)
        return self.span(al, ax, mid) + self.span(bl, mid, bx)


@dataclass
class _Tables:
    e_empty: float
    only: np.ndarray  # error when P[j] is the only filed point
    delta: np.ndarray  # delta[i, j]: change on [P[i], hi] when P[j] follows P[i]


def _neighbors(px: np.ndarray, hx: np.ndarray):
    """History indices strictly left/right of each pool point and exact duplicates."""
    left = np.searchsorted(hx, px, side="left") - 1
    right = np.searchsorted(hx, px, side="right")
    dup = np.full(len(px), -1)
    inside = (right - 1 >= 0) & (right - 1 < len(hx))
    cand = np.where(inside, right - 1, 0)
    if len(hx):
        dup = np.where(inside & (hx[cand] == px), cand, -1)
    return left, right, dup


def _build_tables(f_star, g, dist, history: PrecedentSet, pool: Pool1D) -> _Tables:
    mm = _Mismatch(g, dist)
    px = np.array(pool.points, dtype=float)
    pl = np.array([float(f_star(x)) for x in pool.points])
    hx = np.array([c.point[0] for c in history], dtype=float)
    hl = np.array([float(c.label) for c in history])
    p, nh = len(px), len(hx)
    e_empty = discrepancy_1d(nn_fit(history, dist.domain), g, dist.domain, dist)

    left, right, dup = _neighbors(px, hx)
    has_left, has_right, has_dup = left >= 0, right < nh, dup >= 0
    lx = np.where(has_left, hx[np.clip(left, 0, max(nh - 1, 0))] if nh else 0.0, 0.0)
    ll = np.where(has_left, hl[np.clip(left, 0, max(nh - 1, 0))] if nh else 1.0, 1.0)
    rx = np.where(has_right, hx[np.clip(right, 0, max(nh - 1, 0))] if nh else 0.0, 0.0)
    rl = np.where(has_right, hl[np.clip(right, 0, max(nh - 1, 0))] if nh else 1.0, 1.0)
    dx = np.where(has_dup, px, 0.0)
    dl = np.where(has_dup, hl[np.clip(dup, 0, max(nh - 1, 0))] if nh else 1.0, 1.0)

    def local_before(Lx, Ll, L_edge):
        plain = mm.cost(Lx, Ll, L_edge, rx, rl, ~has_right)
        with_dup = mm.cost(Lx, Ll, L_edge, dx, dl, False) + mm.cost(dx, dl, False, rx, rl, ~has_right)
        return np.where(has_dup, with_dup, plain)

    def local_after(Lx, Ll, L_edge):
        return mm.cost(Lx, Ll, L_edge, px, pl, False) + mm.cost(px, pl, False, rx, rl, ~has_right)

    if nh == 0:
        only = mm.span(pl, mm.lo, mm.hi)
    else:
        no_left = ~has_left
        only = e_empty + local_after(lx, ll, no_left) - local_before(lx, ll, no_left)

    delta = np.full((p, p), np.inf)
    rows, cols = np.triu_indices(p, k=1)  # only i < j is ever read
    for start in range(0, len(rows), _CHUNK):
        i, j = rows[start : start + _CHUNK], cols[start : start + _CHUNK]
        # L is P[i] unless a history case sits strictly between P[i] and P[j]
        use_hist = has_left[j] & (lx[j] > px[i])
        Lx = np.where(use_hist, lx[j], px[i])
        Ll = np.where(use_hist, ll[j], pl[i])
        crx, crl, c_edge = rx[j], rl[j], ~has_right[j]
        cdx, cdl, cpx, cpl = dx[j], dl[j], px[j], pl[j]
        plain = mm.cost(Lx, Ll, False, crx, crl, c_edge)
        with_dup = mm.cost(Lx, Ll, False, cdx, cdl, False) + mm.cost(cdx, cdl, False, crx, crl, c_edge)
        before = np.where(has_dup[j], with_dup, plain)
        after = mm.cost(Lx, Ll, False, cpx, cpl, False) + mm.cost(cpx, cpl, False, crx, crl, c_edge)
        delta[i, j] = after - before
    return _Tables(e_empty, np.asarray(only, dtype=float), delta)


def error_ij_reference(f_star, g, dist, history: PrecedentSet, pool, i: int, j: int, T_i: float) -> float:
    """The transition helper computed literally on the truncated interval ``[P[i], hi]``."""
    pool = _as_pool(pool)
    lo, hi = dist.domain
    pi, pj = pool.points[i], pool.points[j]
    base = history.union([LabeledCase((pi,), f_star(pi))])
    f_i = nn_fit(base, (lo, hi))
    err_after_i_no_j = discrepancy_1d(f_i, g, (pi, hi), dist)
    f_ij = nn_fit(base.union([LabeledCase((pj,), f_star(pj))]), (lo, hi))
    err_after_i_with_j = discrepancy_1d(f_ij, g, (pi, hi), dist)
    return T_i - err_after_i_no_j + err_after_i_with_j


def only_j_reference(f_star, g, dist, history: PrecedentSet, pool, j: int) -> float:
    pool = _as_pool(pool)
    pj = pool.points[j]
    f_j = nn_fit(history.union([LabeledCase((pj,), f_star(pj))]), dist.domain)
    return discrepancy_1d(f_j, g, dist.domain, dist)


def _forward_table(tab: _Tables) -> np.ndarray:
    """``T[j]``: least error with ``P[j]`` the rightmost filing.

    Columns are processed in blocks: earlier blocks contribute through one
    vectorized min-plus step, then a short scalar pass settles the block.
    """
    p = len(tab.only)
    T = np.array(tab.only, dtype=float)
    for s in range(0, p, _BLOCK):
        e = min(s + _BLOCK, p)
        if s:
            T[s:e] = np.minimum(T[s:e], np.min(T[:s, None] + tab.delta[:s, s:e], axis=0))
        sub = tab.delta[s:e, s:e].tolist()
        t = T[s:e].tolist()
        for jj in range(1, e - s):
            best = t[jj]
            for ii in range(jj):
                v = t[ii] + sub[ii][jj]
                if v < best:
                    best = v
            t[jj] = best
        T[s:e] = t
    return T


def _lex_reconstruct(tab: _Tables, target: float, budget: int, tail) -> tuple:
    """Lexicographically smallest index set whose error is within TIE_TOL of ``target``.

    ``tail(r)[i]`` is the least change obtainable after pick ``i`` with at
    most ``r`` further picks.
    """
    if tab.e_empty <= target + TIE_TOL:
        return ()
    start = np.nonzero(tab.only + tail(budget - 1) <= target + TIE_TOL)[0]
    if start.size == 0:
        raise RuntimeError("DP reconstruction lost the optimum")
    cur = int(start[0])
    picks = [cur]
    remaining = target - tab.only[cur]
    left = budget - 1
    # a shorter prefix is lexicographically smaller, so stop as soon as we can
    while left > 0 and remaining < -TIE_TOL:
        cand = np.nonzero(tab.delta[cur] + tail(left - 1) <= remaining + TIE_TOL)[0]
        if cand.size == 0:
            raise RuntimeError("DP reconstruction lost the optimum")
        j = int(cand[0])
        remaining -= tab.delta[cur, j]
        picks.append(j)
        cur = j
        left -= 1
    return tuple(picks)


def _budget_tails(delta: np.ndarray, rounds: int) -> list:
    """``tails[r]``, r = 0..rounds, by repeated min-plus products."""
    tails = [np.zeros(delta.shape[0])]
    for _ in range(rounds):
        tails.append(np.minimum(0.0, np.min(delta + tails[-1][None, :], axis=1, initial=np.inf)))
    return tails


def _unbounded_tail(delta: np.ndarray) -> np.ndarray:
    """``V[i]``: least change after pick ``i`` with any number of further picks."""
    p = delta.shape[0]
    V = np.zeros(p)
    for e in range(p, 0, -_BLOCK):
        s = max(e - _BLOCK, 0)
        if e < p:
            V[s:e] = np.minimum(0.0, np.min(delta[s:e, e:] + V[None, e:], axis=1))
        sub = delta[s:e, s:e].tolist()
        v = V[s:e].tolist()
        for ii in range(e - s - 2, -1, -1):
            best = v[ii]
            row = sub[ii]
            for jj in range(ii + 1, e - s):
                c = row[jj] + v[jj]
                if c < best:
                    best = c
            v[ii] = best
        V[s:e] = v
    return V


def _solve(f_star, g, dist, history, pool, k: int | None, allow_stale: bool) -> SelectionResult:
    pool = _as_pool(pool)
    history = history if isinstance(history, PrecedentSet) else PrecedentSet.of(history)
    _check_inputs(f_star, g, dist, history, pool, allow_stale)
    if len(pool) == 0 or k == 0:
        return _result(f_star, g, dist, history, ())
    tab = _build_tables(f_star, g, dist, history, pool)
    p = len(pool)
    if k is None or k >= p:
        T = _forward_table(tab)
        V = _unbounded_tail(tab.delta)
        zeros = np.zeros(p)
        budget, tail = p, (lambda r: V if r > 0 else zeros)
    else:
        # row r of the table: least error with at most r picks, P[j] rightmost
        T = tab.only.copy()
        for _ in range(k - 1):
            T = np.minimum(tab.only, np.min(T[:, None] + tab.delta, axis=0, initial=np.inf))
        tails = _budget_tails(tab.delta, k)
        budget, tail = k, tails.__getitem__
    target = min(tab.e_empty, float(np.min(T)))
    picks = _lex_reconstruct(tab, target, budget, tail)
    return _result(f_star, g, dist, history, [pool.points[i] for i in picks])


def solve_optimal(f_star, g, dist, history, pool) -> SelectionResult:
    """Least-error subset of the pool, all 2^|P| subsets considered implicitly.

    Ties go to the lexicographically smallest subset, so filing nothing wins
    any tie with the empty set.
    """
    return _solve(f_star, g, dist, history, pool, None, allow_stale=False)


def solve_budgeted(f_star, g, dist, history, pool, k: int) -> SelectionResult:
    """Least-error subset of at most ``k`` pool points."""
    if k < 0:
        raise InvalidInputError("budget k must be nonnegative")
    return _solve(f_star, g, dist, history, pool, k, allow_stale=False)


def solve_with_relabel(f_star, g, dist, history_with_stale, pool) -> SelectionResult:
    """As :func:`solve_optimal`, but history may hold stale labels.

    Filing a pool point that duplicates a historical case replaces that case
    with the high court's current label.
    """
    return _solve(f_star, g, dist, history_with_stale, pool, None, allow_stale=True)


def forward_table(f_star, g, dist, history, pool) -> np.ndarray:
    """The table ``T`` (least error with ``P[j]`` rightmost), for inspection."""
    pool = _as_pool(pool)
    return _forward_table(_build_tables(f_star, g, dist, history, pool))


# ---------------------------------------------------------------------------
# Exhaustive oracle and myopic baselines


def oracle_optimal(f_star, g, dist, history, pool) -> SelectionResult:
    """Exhaustive search over every subset of a small pool."""
    pool = _as_pool(pool)
    if len(pool) > ORACLE_MAX_POOL:
        raise InvalidInputError(f"oracle limited to {ORACLE_MAX_POOL} pool points")
    history = history if isinstance(history, PrecedentSet) else PrecedentSet.of(history)
    _domain(f_star, g, dist)
    scored = []
    for r in range(len(pool) + 1):
        for combo in itertools.combinations(pool.points, r):
            learned = learned_after(f_star, history, combo, dist.domain)
            scored.append((discrepancy_1d(learned, g, dist.domain, dist), combo))
    least = min(err for err, _ in scored)
    chosen = min(combo for err, combo in scored if err <= least + TIE_TOL)
    return _result(f_star, g, dist, history, chosen)


def _error_of(f_star, g, dist, history, chosen) -> float:
    learned = learned_after(f_star, history, chosen, dist.domain)
    return discrepancy_1d(learned, g, dist.domain, dist)


def greedy_strategy(f_star, g, dist, history, pool) -> SelectionResult:
    """File one case at a time, each the best single next case.

    Ties prefer cases that ``g`` and the high court label alike, then the
    leftmost. Stops once no case strictly lowers the error.
    """
    pool = _as_pool(pool)
    history = history if isinstance(history, PrecedentSet) else PrecedentSet.of(history)
    chosen: list = []
    current = _error_of(f_star, g, dist, history, chosen)
    steps = [Step((), current)]
    remaining = list(pool.points)
    while remaining:
        scored = []
        for x in remaining:
            err = _error_of(f_star, g, dist, history, chosen + [x])
            scored.append((err, 0 if g(x) == f_star(x) else 1, x))
        best_err = min(s[0] for s in scored)
        if not best_err < current - TIE_TOL:
            break
        _, _, x = min(s for s in scored if s[0] <= best_err + TIE_TOL)
        chosen.append(x)
        remaining.remove(x)
        current = best_err
        steps.append(Step((x,), current))
    return _result(f_star, g, dist, history, chosen, steps)


def pair_lookahead_strategy(f_star, g, dist, history, pool) -> SelectionResult:
    """File the best pair of cases at a time until no pair strictly helps."""
    pool = _as_pool(pool)
    history = history if isinstance(history, PrecedentSet) else PrecedentSet.of(history)
    chosen: list = []
    current = _error_of(f_star, g, dist, history, chosen)
    steps = [Step((), current)]
    remaining = list(pool.points)
    while len(remaining) >= 2:
        best = None
        for pair in itertools.combinations(remaining, 2):
            err = _error_of(f_star, g, dist, history, chosen + list(pair))
            if best is None or err < best[0] - TIE_TOL:
                best = (err, pair)
        if not best[0] < current - TIE_TOL:
            break
        chosen.extend(best[1])
        for x in best[1]:
            remaining.remove(x)
        current = best[0]
        steps.append(Step(best[1], current))
    return _result(f_star, g, dist, history, chosen, steps)
