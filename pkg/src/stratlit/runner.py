"""Dispatch a scenario to the solvers and build its result document."""

from __future__ import annotations

from stratlit import litigate1d, litigatesvm
from stratlit.court import (
    AdversarialWorst,
    LexicographicFirst,
    SeededRandom,
    run_session,
)
from stratlit.scenario import (
    Scenario,
    case_to_dict,
    point_to_list,
    rule_to_dict,
)

MC_DEFAULT_SAMPLES = 4000


def _measure(s: Scenario):
    return s.distribution if s.setting == "nn1d" else s.sampler


def _n_samples(s: Scenario):
    if s.setting == "nn1d" or s.sampler is None:
        return None
    return s.n_samples or MC_DEFAULT_SAMPLES


def make_policy(s: Scenario):
    if s.removal_policy == "seeded_random":
        return SeededRandom(s.seed)
    if s.removal_policy == "adversarial_worst":
        return AdversarialWorst(s.g, _measure(s), _n_samples(s))
    return LexicographicFirst()


def _session(s: Scenario, filings):
    learner = "nn" if s.setting == "nn1d" else "svm"
    return run_session(
        s.f_star,
        learner,
        s.history,
        filings,
        s.g,
        _measure(s),
        make_policy(s),
        domain=s.domain,
        n_samples=_n_samples(s),
    )


def _steps(transcript) -> list:
    out = []
    for e in transcript.entries:
        out.append(
            {
                "filed": None if e.point is None else point_to_list(e.point),
                "label": None if e.label is None else e.label.symbol,
                "removed": [case_to_dict(c) for c in e.removed],
                "error": e.error,
                "rule": rule_to_dict(e.rule),
            }
        )
    return out


def _filing_order(result: litigate1d.SelectionResult) -> list:
    """Filings in the order a myopic strategy chose them."""
    order = [x for step in result.steps for x in step.chosen]
    return [(x,) for x in order]


def solve(s: Scenario) -> tuple:
    """Run the scenario's solver; returns ``(filings, extra)``."""
    name = s.solver.name
    extra: dict = {}
    if s.setting == "nn1d":
        pool = [p[0] for p in s.pool]
        args = (s.f_star, s.g, s.distribution, s.history, pool)
        if name == "session":
            return list(s.filings), extra
        if name == "optimal":
            res = litigate1d.solve_optimal(*args)
        elif name == "budgeted":
            res = litigate1d.solve_budgeted(*args, s.solver.k)
            extra["k"] = s.solver.k
        elif name == "relabel":
            res = litigate1d.solve_with_relabel(*args)
        elif name == "greedy":
            res = litigate1d.greedy_strategy(*args)
        else:
            res = litigate1d.pair_lookahead_strategy(*args)
        extra["achieved_error"] = res.achieved_error
        if name in ("greedy", "pair_lookahead"):
            return _filing_order(res), extra
        return [(x,) for x in res.chosen], extra

    if name == "session":
        return list(s.filings), extra
    if name == "teach2":
        report = litigatesvm.check_achievable(s.f_star, s.g, s.history)
        extra["achievability"] = _report_dict(report)
        return list(litigatesvm.teach_two_points(s.f_star, s.g, s.history).points), extra
    if name == "best_achievable":
        eps = s.solver.epsilon if s.solver.epsilon is not None else 0.05
        best = litigatesvm.best_achievable(
            s.f_star, s.g, s.history, s.sampler, eps, n_samples=s.solver.n_samples
        )
        extra.update(
            proxy=rule_to_dict(best.proxy),
            sample_error=best.sample_error,
            n_candidates=best.n_candidates,
            fallback=best.fallback,
        )
        if best.fallback:
            return [], extra
        return list(litigatesvm.teach_two_points(s.f_star, best.proxy, s.history).points), extra
    config = litigatesvm.OverturnTeachConfig(policy=make_policy(s))
    return list(litigatesvm.teach_with_overturning(s.f_star, s.g, s.history, config)), extra


def _report_dict(report: litigatesvm.AchievabilityReport) -> dict:
    return {
        "achievable": report.achievable,
        "theta_deg": report.theta_deg,
        "case": report.case,
        "delta": report.delta,
        "blockers": [case_to_dict(c) for c in report.blockers],
        "reason": report.reason,
    }


def run_scenario(s: Scenario) -> dict:
    """Solve, replay the filings through a court session, and report."""
    filings, extra = solve(s)
    transcript = _session(s, filings)
    final = transcript.final
    return {
        "scenario": s.name,
        "setting": s.setting,
        "solver": s.solver.name,
        "removal_policy": s.removal_policy,
        "seed": s.seed,
        "chosen": [point_to_list(p) for p in filings],
        "labels": [e.label.symbol for e in transcript.entries[1:]],
        "steps": _steps(transcript),
        "removals": [case_to_dict(c) for c in transcript.removed],
        "final_rule": rule_to_dict(final.rule),
        "final_error": final.error,
        "extra": extra,
    }
