"""Acceptance criteria 1 to 10, each checked against an independent oracle.

Every test records one ``criterion NN: PASS/FAIL`` line (printed live with
``-s`` and collected in the terminal summary) before asserting.
"""

from __future__ import annotations

import itertools
import time

import numpy as np
import pytest

from generators import (
    random_density,
    random_nn1d,
    random_overturning_instance,
    random_piecewise,
    random_teaching_instance,
    random_unit,
)
from oracles import (
    all_masks,
    brute_force_optimal_1d,
    certified_separable,
    filing_errors_1d,
    separator_distance,
    svm_2d,
    svm_2d_batch,
    svm_2d_with_pairs,
)
from stratlit.core import (
    ConstantRule,
    Era,
    LabeledCase,
    LinearSeparator,
    Piecewise1DFn,
    PrecedentSet,
    evaluate_many,
    label_cases,
)
from stratlit.court import decide, disagreeing_cases, minimal_removal_sets, run_session
from stratlit.learners import nn_fit, svm_fit
from stratlit.litigate1d import (
    Pool1D,
    greedy_strategy,
    pair_lookahead_strategy,
    solve_budgeted,
    solve_optimal,
)
from stratlit.litigatesvm import (
    best_achievable,
    check_achievable,
    enumerate_pool_functions,
    same_separator,
    teach_two_points,
    teach_with_overturning,
)
from stratlit.measure import (
    PiecewiseUniform1D,
    SamplerSpec,
    cdf_rescale,
    discrepancy_1d,
    estimate_error,
)

A = Piecewise1DFn.alternating
UNIFORM = PiecewiseUniform1D.uniform()


def _hist(history):
    return [c.point[0] for c in history], [float(int(c.label)) for c in history]


# ---------------------------------------------------------------------------
# 1. DP optimality


@pytest.mark.criterion(1)
def test_criterion_01_dp_matches_exhaustive_oracle(verdict):
    rng = np.random.default_rng(10)
    worst, mismatches, dp_time = 0.0, 0, 0.0
    start = time.perf_counter()
    for _ in range(1000):
        f_star, g, dist, history, pool = random_nn1d(rng)
        t0 = time.perf_counter()
        got = solve_optimal(f_star, g, dist, history, pool).achieved_error
        dp_time += time.perf_counter() - t0
        want = brute_force_optimal_1d(f_star, g, dist, *_hist(history), pool)
        worst = max(worst, abs(got - want))
        mismatches += abs(got - want) > 1e-12
    total = time.perf_counter() - start
    verdict(
        1,
        mismatches == 0 and total < 60.0,
        f"1000 instances, worst |DP - oracle| = {worst:.2e}, DP {dp_time:.1f}s, total {total:.1f}s",
    )


# ---------------------------------------------------------------------------
# 2. DP runtime shape


def _timing_instance():
    f_star = A("+", (0.2, 0.45, 0.7, 0.9))
    g = A("-", (0.15, 0.5, 0.65, 0.8))
    dist = PiecewiseUniform1D.from_weights([0.0, 0.3, 0.6, 0.8, 1.0], [1.0, 2.0, 0.5, 1.5])
    history = PrecedentSet.of(label_cases(f_star, [0.05, 0.33, 0.5, 0.77, 0.95]))
    return f_star, g, dist, history


@pytest.mark.criterion(2)
def test_criterion_02_dp_runtime_is_quadratic(verdict):
    f_star, g, dist, history = _timing_instance()
    rng = np.random.default_rng(20)
    sizes = [250, 500, 1000, 2000]
    best = []
    for n in sizes:
        pool = Pool1D.of(rng.uniform(0.0, 1.0, n))
        runs = []
        for _ in range(5):
            t0 = time.perf_counter()
            solve_optimal(f_star, g, dist, history, pool)
            runs.append(time.perf_counter() - t0)
        best.append(min(runs))
    slope = float(np.polyfit(np.log(sizes), np.log(best), 1)[0])
    timings = ", ".join(f"{n}:{t:.3f}s" for n, t in zip(sizes, best))
    verdict(2, abs(slope - 2.0) <= 0.3 and best[-1] < 10.0, f"exponent {slope:.2f} ({timings})")


# ---------------------------------------------------------------------------
# 3. Budget extension


@pytest.mark.criterion(3)
def test_criterion_03_budget_monotone_and_exact(verdict):
    rng = np.random.default_rng(11)
    increases = wrong = top_mismatch = 0
    for _ in range(200):
        f_star, g, dist, history, pool = random_nn1d(rng)
        errs = [solve_budgeted(f_star, g, dist, history, pool, k).achieved_error for k in range(len(pool) + 1)]
        masks = all_masks(len(pool))
        filed = filing_errors_1d(f_star, g, dist, *_hist(history), pool, masks)
        counts = masks.sum(axis=1)
        want = [filed[counts <= k].min() for k in range(len(pool) + 1)]
        increases += any(b > a for a, b in zip(errs, errs[1:]))
        wrong += max(abs(a - b) for a, b in zip(errs, want)) > 1e-12
        top_mismatch += errs[-1] != solve_optimal(f_star, g, dist, history, pool).achieved_error
    verdict(
        3,
        increases == wrong == top_mismatch == 0,
        f"200 instances: {increases} increases in k, {wrong} budget/oracle mismatches, "
        f"{top_mismatch} k=|P| mismatches",
    )


# ---------------------------------------------------------------------------
# 4. Observation golden values


def _oracle_error(f_star, g, history, pool, chosen):
    mask = np.array([[p in chosen for p in pool]], dtype=bool)
    return float(filing_errors_1d(f_star, g, UNIFORM, *_hist(history), pool, mask)[0])


@pytest.mark.criterion(4)
def test_criterion_04_observation_golden_values(verdict):
    tol = 1e-9
    checks = {}
    empty = PrecedentSet()

    # Obs. 1: an adverse ruling helps
    g1 = A("+", (0.1,))
    f1 = A("-", (0.1,))
    session = run_session(f1, "nn", empty, [0.05], g1, UNIFORM)
    before, after = session.entries[0].error, session.final.error
    checks["obs1"] = (
        abs(before - 0.9) <= tol
        and abs(after - 0.1) <= tol
        and abs(_oracle_error(f1, g1, empty, [0.05], []) - 0.9) <= tol
        and abs(_oracle_error(f1, g1, empty, [0.05], [0.05]) - 0.1) <= tol
    )

    # Obs. 2: greedy locks in a bad boundary
    f2, g2 = A("+", (0.1,)), A("+", (0.4,))
    grid21 = [i / 20 for i in range(21)]
    greedy = greedy_strategy(f2, g2, UNIFORM, empty, grid21)
    best = solve_optimal(f2, g2, UNIFORM, empty, grid21)
    checks["obs2"] = (
        greedy.achieved_error >= 0.125 - tol
        and abs(_oracle_error(f2, g2, empty, grid21, greedy.chosen) - greedy.achieved_error) <= tol
        and best.achieved_error <= tol
        and _oracle_error(f2, g2, empty, grid21, best.chosen) <= tol
    )

    # Obs. 3: pair lookahead is stuck while four cases succeed
    f3 = A("+", (1 / 3, 2 / 3))
    grid61 = [i / 60 for i in range(61)]
    pairs = np.zeros((61 * 60 // 2 + 1, 61), dtype=bool)
    for r, (i, j) in enumerate(itertools.combinations(range(61), 2), start=1):
        pairs[r, [i, j]] = True
    pair_errors = filing_errors_1d(f3, f3, UNIFORM, [], [], grid61, pairs)
    four = (0.2, 28 / 60, 0.6, 44 / 60)
    lookahead = pair_lookahead_strategy(f3, f3, UNIFORM, empty, grid61)
    checks["obs3"] = (
        lookahead.chosen == ()
        and abs(lookahead.achieved_error - 1 / 3) <= tol
        and pair_errors.min() >= 1 / 3 - tol
        and _oracle_error(f3, f3, empty, grid61, four) <= tol
        and solve_budgeted(f3, f3, UNIFORM, empty, grid61, 4).achieved_error <= tol
    )

    # Obs. 4: no single case helps while three cases succeed
    f4 = A("+", (0.4, 0.6))
    hist4 = PrecedentSet.of(label_cases(f4, [0.1, 0.9]))
    grid101 = [i / 100 for i in range(101)]
    singles = np.vstack([np.zeros(101, dtype=bool), np.eye(101, dtype=bool)])
    single_errors = filing_errors_1d(f4, f4, UNIFORM, *_hist(hist4), grid101, singles)
    greedy4 = greedy_strategy(f4, f4, UNIFORM, hist4, grid101)
    checks["obs4"] = (
        abs(single_errors[0] - 0.2) <= tol
        and single_errors[1:].min() >= single_errors[0] - tol
        and greedy4.chosen == ()
        and _oracle_error(f4, f4, hist4, grid101, (0.3, 0.5, 0.7)) <= tol
        and solve_budgeted(f4, f4, UNIFORM, hist4, grid101, 3).achieved_error <= tol
    )
    detail = ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())
    verdict(4, all(checks.values()), detail)


# ---------------------------------------------------------------------------
# 5. Achievability biconditional


def _two_point_grid(rng, f_star, g):
    """10 centres x 10 scales x 100 directions of filing pairs ``c +- s u``."""
    ext = max(3.0, abs(g.offset) + 1.0)
    centres = rng.uniform(-ext, ext, size=(10, 2))
    centres[0] = -g.offset * g.w
    scales = np.geomspace(1e-3, 10.0, 10)
    ang = np.linspace(0.0, 2 * np.pi, 100, endpoint=False)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    C = np.repeat(centres, 1000, axis=0)
    S = np.tile(np.repeat(scales, 100), 10)[:, None]
    U = np.tile(dirs, (100, 1))
    a, b = C + S * U, C - S * U
    la = np.where(f_star.decision(a) >= 0, 1, -1)
    lb = np.where(f_star.decision(b) >= 0, 1, -1)
    pos = np.where((la > 0)[:, None], a, b)
    neg = np.where((la > 0)[:, None], b, a)
    keep = la != lb
    return pos[keep], neg[keep]


@pytest.mark.criterion(5)
def test_criterion_05_achievability_biconditional(verdict):
    rng = np.random.default_rng(0)
    n_true = n_false = 0
    failures = []
    for it in range(1000):
        f_star, g, history = random_teaching_instance(rng)
        report = check_achievable(f_star, g, history)
        if report.achievable:
            n_true += 1
            plan = teach_two_points(f_star, g, history)
            model = svm_fit(history.union(label_cases(f_star, plan.points)))
            svs = {c.point for c in model.support_vectors}
            if not (same_separator(model.separator, g) and svs == set(plan.points)):
                failures.append(it)
        else:
            n_false += 1
            pos, neg = _two_point_grid(rng, f_star, g)
            H = history.points().reshape(-1, 2)
            W, B, M = svm_2d_with_pairs(H, history.signs().astype(float), pos, neg)
            ok = np.isfinite(M)
            dist = separator_distance(W[ok], B[ok], g.w, g.offset)
            if dist.size and dist.min() <= 1e-3:
                failures.append(it)
    verdict(
        5,
        not failures,
        f"{n_true} achievable taught exactly, {n_false} unachievable never approached; failures {failures[:5]}",
    )


# ---------------------------------------------------------------------------
# 6. Pool enumeration sufficiency


def _all_subset_rules(f_star, history, pool):
    H = history.points().reshape(-1, 2)
    hy = history.signs().astype(float)
    py = np.where(f_star.decision(pool) >= 0, 1.0, -1.0)
    rules = []
    n = len(pool)
    for k in range(n + 1):
        combos = list(itertools.combinations(range(n), k))
        idx = np.array(combos, dtype=int).reshape(len(combos), k)
        m = len(idx)
        pts = np.concatenate([np.repeat(H[None], m, axis=0), pool[idx].reshape(m, k, 2)], axis=1)
        ys = np.concatenate([np.repeat(hy[None], m, axis=0), py[idx].reshape(m, k)], axis=1)
        one = np.all(ys == ys[:, :1], axis=1) if ys.shape[1] else np.ones(m, dtype=bool)
        for r in np.flatnonzero(one):
            rules.append(("c", ys[r, 0] if ys.shape[1] else 1.0))
        if (~one).any():
            W, B, M = svm_2d_batch(pts[~one], ys[~one])
            rules.extend(("l", w, b) for w, b, mg in zip(W, B, M) if np.isfinite(mg))
    return rules


def _same_rule(a, b, tol=1e-9):
    if a[0] != b[0]:
        return False
    if a[0] == "c":
        return a[1] == b[1]
    return max(float(np.max(np.abs(a[1] - b[1]))), abs(a[2] - b[2])) <= tol


def _dedup(rules):
    out = []
    for r in rules:
        if not any(_same_rule(r, o) for o in out):
            out.append(r)
    return out


@pytest.mark.criterion(6)
def test_criterion_06_small_subsets_suffice(verdict):
    rng = np.random.default_rng(1)
    bad = []
    for it in range(100):
        f_star = LinearSeparator.from_raw(random_unit(rng, 2), rng.uniform(-1, 1))
        while True:
            history = PrecedentSet.of(label_cases(f_star, rng.uniform(-3, 3, size=(int(rng.integers(0, 4)), 2))))
            pool = rng.uniform(-3, 3, size=(int(rng.integers(1, 11)), 2))
            everything = np.concatenate([history.points().reshape(-1, 2), pool])
            if np.all(np.abs(f_star.decision(everything)) > 1e-2):
                break
        lib = [
            ("c", float(int(f.rule.label))) if isinstance(f.rule, ConstantRule) else ("l", f.rule.w, f.rule.offset)
            for f in enumerate_pool_functions(f_star, history, [tuple(p) for p in pool])
        ]
        full = _dedup(_all_subset_rules(f_star, history, pool))
        covered = all(any(_same_rule(x, y) for y in full) for x in lib)
        complete = all(any(_same_rule(y, x) for x in lib) for y in full)
        if not (covered and complete):
            bad.append(it)
    verdict(6, not bad, f"100 pools, mismatched function sets: {bad[:5]}")


# ---------------------------------------------------------------------------
# 7. Best-achievable dominance


def _achievable_direct(f_star, w, b, H, hy):
    """Achievability of ``(w, b)`` restated from the geometry, for the oracle."""
    cos = float(w @ f_star.w)
    if cos <= 1e-9:
        return False
    d = H @ w + b
    if np.any(np.where(d >= 0, 1, -1) != hy) or np.any(np.abs(d) <= 1e-9):
        return False
    if cos < 1 - 1e-9:
        return True
    s = float(f_star.w @ (-b * w) + f_star.offset)
    delta = abs(s)
    return not np.any(np.abs(d) < delta - 1e-9) and not (s >= 0 and np.any(np.abs(d) <= delta + 1e-9))


def _enumerated_errors(f_star, g, history, S):
    H = history.points().reshape(-1, 2)
    hy = history.signs()
    glab = np.where(g.decision(S) >= 0, 1, -1)
    errs = []
    for k in (2, 3):
        idx = np.array(list(itertools.combinations(range(len(S)), k)))
        for lab in itertools.product((-1.0, 1.0), repeat=k):
            if len(set(lab)) < 2:
                continue
            W, B, M = svm_2d_batch(S[idx], np.broadcast_to(np.array(lab), (len(idx), k)))
            for w, b, m in zip(W, B, M):
                if np.isfinite(m) and _achievable_direct(f_star, w, b, H, hy):
                    errs.append(int(np.count_nonzero(np.where(S @ w + b >= 0, 1, -1) != glab)))
    return errs


@pytest.mark.criterion(7)
def test_criterion_07_best_achievable_dominance(verdict):
    rng = np.random.default_rng(2)
    bad = []
    n_goal = 0
    for seed in range(100):
        f_star = LinearSeparator.from_raw(random_unit(rng, 2), rng.uniform(-0.5, 0.5))
        g = LinearSeparator.from_raw(random_unit(rng, 2), rng.uniform(-0.5, 0.5))
        history = PrecedentSet.of(label_cases(f_star, rng.uniform(-1, 1, size=(int(rng.integers(0, 4)), 2))))
        sampler = SamplerSpec.uniform_box((-1, -1), (1, 1), seed=seed)
        res = best_achievable(f_star, g, history, sampler, n_samples=14)
        if check_achievable(f_star, g, history).achievable:
            n_goal += 1
            if res.proxy != g or res.sample_error != 0:
                bad.append(seed)
            continue
        errs = _enumerated_errors(f_star, g, history, res.sample)
        proxy_err = int(np.count_nonzero(evaluate_many(res.proxy, res.sample) != evaluate_many(g, res.sample)))
        if errs and proxy_err > min(errs):
            bad.append(seed)
    verdict(7, not bad, f"100 seeded runs ({n_goal} with an achievable goal), violations {bad[:5]}")


# ---------------------------------------------------------------------------
# 8. Overturning


def _figure6():
    f_star = LinearSeparator((1.0, 0.0), -0.1)
    cases = [
        LabeledCase((0.2, 0.5), "+"),
        LabeledCase((0.6, 0.1), "+"),
        LabeledCase((0.8, 0.2), "-", Era.STALE),
        LabeledCase((0.9, 0.8), "-", Era.STALE),
    ]
    return f_star, PrecedentSet.of(cases)


def _overturning_run(f_star, g, history, limit):
    """Problems found when filing the overturning construction; empty when all is well."""
    filings = teach_with_overturning(f_star, g, history)
    problems = []
    if len(filings) > limit:
        problems.append(f"{len(filings)} filings")
    precedent = history
    for step, x in enumerate(filings, start=1):
        dec = decide(f_star, precedent, x, step=step)
        augmented = precedent.with_case(dec.case)
        if dec.removed:
            if any(f_star(c.point) == c.label for c in dec.removed):
                problems.append("removed an agreeing case")
            if not certified_separable(augmented.without(dec.removed)):
                problems.append("removal did not restore separability")
            for keep in dec.removed:
                if certified_separable(augmented.without([c for c in dec.removed if c != keep])):
                    problems.append("removal set not subset-minimal")
        precedent = dec.new_precedent
    if not same_separator(svm_fit(precedent).separator, g):
        problems.append("final rule differs from the goal")
    stale = {c.point for c in disagreeing_cases(history, f_star)}
    if stale & {c.point for c in precedent}:
        problems.append("stale case survived")
    return problems, len(filings)


@pytest.mark.criterion(8)
def test_criterion_08_overturning(verdict):
    f_star, prec = _figure6()
    new = LabeledCase((0.95, 0.5), "+")
    sets = minimal_removal_sets(prec.with_case(new), f_star)
    dec = decide(f_star, prec, new.point)
    fig6 = (
        not certified_separable(prec.with_case(new))
        and sorted(tuple(c.point for c in s) for s in sets) == [((0.8, 0.2),), ((0.9, 0.8),)]
        and [c.point for c in dec.removed] == [(0.8, 0.2)]
        and certified_separable(dec.new_precedent)
    )
    rng = np.random.default_rng(8)
    summary = {}
    failures = []
    for d, count, limit in ((2, 100, 5), (3, 50, 7)):
        longest = 0
        for it in range(count):
            f, g, history = random_overturning_instance(rng, d)
            problems, n = _overturning_run(f, g, history, limit)
            longest = max(longest, n)
            failures.extend(f"d={d}#{it}: {p}" for p in problems)
        summary[d] = longest
    verdict(
        8,
        fig6 and not failures,
        f"figure 6 {'ok' if fig6 else 'FAILED'}; d=2 max {summary[2]} filings, d=3 max {summary[3]}; "
        f"problems {failures[:3]}",
    )


# ---------------------------------------------------------------------------
# 9. Learner suite


def _separable_sample(rng, d):
    while True:
        truth = LinearSeparator.from_raw(random_unit(rng, d), rng.uniform(-0.5, 0.5))
        X = rng.uniform(-2, 2, size=(int(rng.integers(2, 9)), d))
        if np.all(np.abs(truth.decision(X)) > 1e-3):
            cases = label_cases(truth, X)
            if len({c.label for c in cases}) == 2:
                return cases


def _nn_locality_ok(rng):
    xs = rng.uniform(0, 1, int(rng.integers(0, 8)))
    ys = rng.choice(["+", "-"], len(xs))
    base = PrecedentSet.of(LabeledCase((x,), y) for x, y in zip(xs, ys))
    x_new = float(rng.uniform(0, 1))
    if base.find((x_new,)) is not None:
        return True
    grown = base.with_case(LabeledCase((x_new,), rng.choice(["+", "-"])))
    coords = sorted(c.point[0] for c in grown)
    i = coords.index(x_new)
    left = coords[i - 1] if i > 0 else -np.inf
    right = coords[i + 1] if i + 1 < len(coords) else np.inf
    grid = np.linspace(0, 1, 2001)
    outside = grid[(grid <= left) | (grid >= right)]
    before, after = nn_fit(base), nn_fit(grown)
    return all(before(x) == after(x) for x in outside)


@pytest.mark.criterion(9)
def test_criterion_09_learner_suite(verdict):
    rng = np.random.default_rng(9)
    consistency = margin_eq = optimal = determinism = 0
    trials = 300
    for t in range(trials):
        d = 2 if t % 3 else 3
        cases = _separable_sample(rng, d)
        model = svm_fit(PrecedentSet.of(cases))
        X = np.array([c.point for c in cases])
        y = np.array([int(c.label) for c in cases])
        consistency += all(model.separator(c.point) == c.label for c in cases)
        dist = y * model.separator.decision(X)
        margin_eq += (
            abs(dist[y > 0].min() - dist[y < 0].min()) <= 1e-9
            and all(abs(abs(model.separator.decision(sv.point)[0]) - model.margin) <= 1e-9 for sv in model.support_vectors)
        )
        if d == 2:
            ref = svm_2d(X, y)
            optimal += ref is not None and abs(ref[2] - model.margin) <= 1e-9
        else:
            optimal += True
        perm = [cases[i] for i in rng.permutation(len(cases))]
        again = svm_fit(PrecedentSet.of(perm))
        determinism += again == model
    nn_ok = 0
    for _ in range(trials):
        xs = rng.uniform(0, 1, int(rng.integers(0, 10)))
        cases = list(label_cases(random_piecewise(rng), xs))
        fitted = nn_fit(PrecedentSet.of(cases))
        nn_ok += all(fitted(c.point) == c.label for c in cases)
        perm = [cases[i] for i in rng.permutation(len(cases))]
        determinism += nn_fit(PrecedentSet.of(perm)) == fitted
    locality = sum(_nn_locality_ok(rng) for _ in range(1000))
    passed = (
        consistency == margin_eq == optimal == nn_ok == trials
        and determinism == 2 * trials
        and locality == 1000
    )
    verdict(
        9,
        passed,
        f"svm consistent {consistency}/{trials}, margin equality {margin_eq}/{trials}, "
        f"optimal {optimal}/{trials}; nn consistent {nn_ok}/{trials}; locality {locality}/1000; "
        f"permutation-identical {determinism}/{2 * trials}",
    )


# ---------------------------------------------------------------------------
# 10. Measure suite


@pytest.mark.criterion(10)
def test_criterion_10_measure_suite(verdict):
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(500):
        dist = random_density(rng)
        f, g = random_piecewise(rng), random_piecewise(rng)
        direct = discrepancy_1d(f, g, dist.domain, dist)
        mapped = cdf_rescale(dist, [f, g])
        rescaled = discrepancy_1d(*mapped.functions, (0.0, 1.0), mapped.dist)
        worst = max(worst, abs(direct - rescaled))
    # the band -0.2 <= x1 < 0 covers 0.4 of the box's area 4
    band = 0.1
    f = LinearSeparator((1.0, 0.0), 0.0)
    g = LinearSeparator((1.0, 0.0), 0.2)
    inside = 0
    for seed in range(200):
        est = estimate_error(f, g, SamplerSpec.uniform_box((-1, -1), (1, 1), seed=seed), 100_000)
        inside += abs(est.estimate - band) <= est.half_width
    verdict(
        10,
        worst <= 1e-12 and inside >= 190,
        f"rescale worst {worst:.1e} over 500 instances; band within half-width in {inside}/200 seeds",
    )
