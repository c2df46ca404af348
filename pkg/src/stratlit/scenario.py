"""Scenario and result files: JSON text with exactly round-tripping reals."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from stratlit.core import (
    ConstantRule,
    Era,
    Label,
    LabeledCase,
    LinearSeparator,
    Piecewise1DFn,
    PrecedentSet,
    as_point,
    evaluate,
)
from stratlit.errors import InvalidInputError
from stratlit.measure import PiecewiseUniform1D, SamplerSpec

SETTINGS = ("nn1d", "svm")
SOLVERS_1D = ("optimal", "budgeted", "relabel", "greedy", "pair_lookahead", "session")
SOLVERS_SVM = ("teach2", "best_achievable", "overturn_teach", "session")
POLICIES = ("lexicographic_first", "seeded_random", "adversarial_worst")


class ScenarioError(InvalidInputError):
    """A scenario field failed validation; the message names the field."""

    def __init__(self, field_name: str, problem: str):
        super().__init__(f"{field_name}: {problem}")
        self.field = field_name


@dataclass(frozen=True)
class SolverSpec:
    name: str
    k: int | None = None
    epsilon: float | None = None
    n_samples: int | None = None


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one litigation run."""

    name: str
    setting: str
    dimension: int
    f_star: object
    g: object
    solver: SolverSpec
    history: PrecedentSet = PrecedentSet()
    pool: tuple = ()
    filings: tuple = ()
    distribution: PiecewiseUniform1D | None = None
    sampler: SamplerSpec | None = None
    n_samples: int | None = None
    removal_policy: str = "lexicographic_first"
    seed: int | None = None
    outputs: dict = field(default_factory=dict, compare=True, hash=False)

    def with_overrides(self, seed: int | None = None, policy: str | None = None) -> "Scenario":
        out = self
        if seed is not None:
            out = replace(out, seed=int(seed))
            if out.sampler is not None:
                out = replace(out, sampler=out.sampler.with_seed(int(seed)))
        if policy is not None:
            out = replace(out, removal_policy=policy)
        validate_scenario(out)
        return out

    @property
    def domain(self) -> tuple:
        if self.distribution is not None:
            return self.distribution.domain
        if isinstance(self.f_star, Piecewise1DFn):
            return self.f_star.domain
        return (0.0, 1.0)


# ---------------------------------------------------------------------------
# Encoding


def _num(x: float):
    """JSON-safe real; repr of a float is its shortest exact round trip."""
    x = float(x)
    return x if math.isfinite(x) else None


def rule_to_dict(rule) -> dict | None:
    if rule is None:
        return None
    if isinstance(rule, Piecewise1DFn):
        return {
            "kind": "piecewise",
            "labels": [lab.symbol for lab in rule.labels],
            "boundaries": [_num(b) for b in rule.boundaries],
            "domain": [_num(v) for v in rule.domain],
        }
    if isinstance(rule, LinearSeparator):
        return {"kind": "linear", "normal": [_num(v) for v in rule.normal], "offset": _num(rule.offset)}
    if isinstance(rule, ConstantRule):
        return {"kind": "constant", "label": rule.label.symbol, "dim": rule.dim}
    raise InvalidInputError(f"cannot encode rule {rule!r}")


def case_to_dict(case: LabeledCase) -> dict:
    return {"point": [_num(v) for v in case.point], "label": case.label.symbol, "era": case.era.value}


def point_to_list(p) -> list:
    return [_num(v) for v in as_point(p)]


def scenario_to_dict(s: Scenario) -> dict:
    out: dict = {
        "name": s.name,
        "setting": s.setting,
        "dimension": s.dimension,
        "f_star": rule_to_dict(s.f_star),
        "g": rule_to_dict(s.g),
    }
    if s.distribution is not None:
        out["distribution"] = {
            "breakpoints": [_num(v) for v in s.distribution.breakpoints],
            "densities": [_num(v) for v in s.distribution.densities],
        }
    if s.sampler is not None:
        sp = s.sampler
        body: dict = {"kind": sp.kind}
        if sp.kind == "uniform_box":
            body.update(lo=[_num(v) for v in sp.lo], hi=[_num(v) for v in sp.hi])
        elif sp.kind == "gaussian":
            body.update(mean=[_num(v) for v in sp.mean], std=[_num(v) for v in sp.std])
        else:
            body.update(points=[point_to_list(p) for p in sp.points])
        out["sampler"] = body
    if s.n_samples is not None:
        out["n_samples"] = s.n_samples
    out["history"] = [case_to_dict(c) for c in s.history]
    out["pool"] = [point_to_list(p) for p in s.pool]
    out["filings"] = [point_to_list(p) for p in s.filings]
    solver: dict = {"name": s.solver.name}
    for key in ("k", "epsilon", "n_samples"):
        val = getattr(s.solver, key)
        if val is not None:
            solver[key] = val
    out["solver"] = solver
    out["removal_policy"] = s.removal_policy
    out["seed"] = s.seed
    out["outputs"] = dict(s.outputs)
    return out


def dumps(obj) -> str:
    """Canonical JSON text: fixed key order, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps(scenario_to_dict(s)))


# ---------------------------------------------------------------------------
# Decoding


def _req(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ScenarioError(f"{where}{key}", "missing required field")
    return obj[key]


def _real(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(name, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(name, "must be finite")
    return float(value)


def _reals(value, name: str) -> tuple:
    if not isinstance(value, list):
        raise ScenarioError(name, f"expected a list of numbers, got {value!r}")
    return tuple(_real(v, f"{name}[{i}]") for i, v in enumerate(value))


def _label(value, name: str) -> Label:
    try:
        return Label.parse(value)
    except InvalidInputError as exc:
        raise ScenarioError(name, str(exc)) from None


def _point(value, name: str, dim: int) -> tuple:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    coords = _reals(value, name)
    if len(coords) != dim:
        raise ScenarioError(name, f"point {list(coords)} has dimension {len(coords)}, expected {dim}")
    return coords


def rule_from_dict(obj, name: str, dim: int | None = None):
    kind = _req(obj, "kind", f"{name}.")
    try:
        if kind == "piecewise":
            labels = tuple(_label(v, f"{name}.labels[{i}]") for i, v in enumerate(_req(obj, "labels", f"{name}.")))
            bounds = _reals(obj.get("boundaries", []), f"{name}.boundaries")
            domain = _reals(obj.get("domain", [0.0, 1.0]), f"{name}.domain")
            return Piecewise1DFn(labels, bounds, domain)
        if kind == "linear":
            normal = _reals(_req(obj, "normal", f"{name}."), f"{name}.normal")
            offset = _real(obj.get("offset", 0.0), f"{name}.offset")
            norm = math.sqrt(math.fsum(v * v for v in normal))
            if abs(norm - 1.0) <= 1e-12:
                return LinearSeparator(normal, offset)
            return LinearSeparator.from_raw(normal, offset)
        if kind == "constant":
            return ConstantRule(_label(_req(obj, "label", f"{name}."), f"{name}.label"), int(obj.get("dim", dim or 1)))
    except ScenarioError:
        raise
    except InvalidInputError as exc:
        raise ScenarioError(name, str(exc)) from None
    raise ScenarioError(f"{name}.kind", f"unknown rule kind {kind!r}")


def scenario_from_dict(obj: dict) -> Scenario:
    if not isinstance(obj, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    setting = _req(obj, "setting", "")
    if setting not in SETTINGS:
        raise ScenarioError("setting", f"must be one of {SETTINGS}, got {setting!r}")
    dim = _req(obj, "dimension", "")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ScenarioError("dimension", f"must be a positive integer, got {dim!r}")
    f_star = rule_from_dict(_req(obj, "f_star", ""), "f_star", dim)
    g = rule_from_dict(_req(obj, "g", ""), "g", dim)

    distribution = None
    if "distribution" in obj and obj["distribution"] is not None:
        d = obj["distribution"]
        try:
            distribution = PiecewiseUniform1D(
                _reals(_req(d, "breakpoints", "distribution."), "distribution.breakpoints"),
                _reals(_req(d, "densities", "distribution."), "distribution.densities"),
            )
        except ScenarioError:
            raise
        except InvalidInputError as exc:
            raise ScenarioError("distribution", str(exc)) from None

    seed = obj.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ScenarioError("seed", f"must be an integer or null, got {seed!r}")
    sampler = None
    if "sampler" in obj and obj["sampler"] is not None:
        sp = obj["sampler"]
        kind = _req(sp, "kind", "sampler.")
        try:
            if kind == "uniform_box":
                sampler = SamplerSpec.uniform_box(
                    _reals(_req(sp, "lo", "sampler."), "sampler.lo"),
                    _reals(_req(sp, "hi", "sampler."), "sampler.hi"),
                    seed or 0,
                )
            elif kind == "gaussian":
                sampler = SamplerSpec.gaussian(
                    _reals(_req(sp, "mean", "sampler."), "sampler.mean"),
                    _reals(_req(sp, "std", "sampler."), "sampler.std"),
                    seed or 0,
                )
            elif kind == "empirical":
                pts = [_point(p, f"sampler.points[{i}]", dim) for i, p in enumerate(_req(sp, "points", "sampler."))]
                sampler = SamplerSpec.empirical(pts, seed or 0)
            else:
                raise ScenarioError("sampler.kind", f"unknown sampler kind {kind!r}")
        except ScenarioError:
            raise
        except InvalidInputError as exc:
            raise ScenarioError("sampler", str(exc)) from None

    cases = []
    for i, c in enumerate(obj.get("history", [])):
        where = f"history[{i}]"
        pt = _point(_req(c, "point", f"{where}."), f"{where}.point", dim)
        lab = _label(_req(c, "label", f"{where}."), f"{where}.label")
        era = c.get("era", "current")
        if era not in (e.value for e in Era):
            raise ScenarioError(f"{where}.era", f"must be 'current' or 'stale', got {era!r}")
        cases.append(LabeledCase(pt, lab, Era(era)))
    history = PrecedentSet.of(cases)
    pool = tuple(_point(p, f"pool[{i}]", dim) for i, p in enumerate(obj.get("pool", [])))
    filings = tuple(_point(p, f"filings[{i}]", dim) for i, p in enumerate(obj.get("filings", [])))

    solver_obj = _req(obj, "solver", "")
    if isinstance(solver_obj, str):
        solver_obj = {"name": solver_obj}
    solver = SolverSpec(
        _req(solver_obj, "name", "solver."),
        solver_obj.get("k"),
        solver_obj.get("epsilon"),
        solver_obj.get("n_samples"),
    )
    n_samples = obj.get("n_samples")
    scenario = Scenario(
        name=str(obj.get("name", "scenario")),
        setting=setting,
        dimension=dim,
        f_star=f_star,
        g=g,
        solver=solver,
        history=history,
        pool=pool,
        filings=filings,
        distribution=distribution,
        sampler=sampler,
        n_samples=n_samples,
        removal_policy=obj.get("removal_policy", "lexicographic_first"),
        seed=seed,
        outputs=dict(obj.get("outputs") or {}),
    )
    validate_scenario(scenario)
    return scenario


def validate_scenario(s: Scenario) -> None:
    """Cross-field checks; raises :class:`ScenarioError` naming the field."""
    dim = s.dimension
    for name in ("f_star", "g"):
        rule = getattr(s, name)
        if rule.dim != dim:
            raise ScenarioError(name, f"rule is {rule.dim}-d but the scenario is {dim}-d")
    if s.setting == "nn1d":
        if dim != 1:
            raise ScenarioError("dimension", "the nn1d setting is one-dimensional")
        for name in ("f_star", "g"):
            if not isinstance(getattr(s, name), Piecewise1DFn):
                raise ScenarioError(name, "nn1d needs a piecewise rule")
        if s.distribution is None:
            raise ScenarioError("distribution", "nn1d needs a piecewise-uniform distribution")
        if s.f_star.domain != s.distribution.domain or s.g.domain != s.distribution.domain:
            raise ScenarioError("distribution", "domain differs from the rules' domain")
        if s.solver.name not in SOLVERS_1D:
            raise ScenarioError("solver.name", f"must be one of {SOLVERS_1D} for nn1d, got {s.solver.name!r}")
        lo, hi = s.distribution.domain
        for field_name, pts in (("pool", s.pool), ("filings", s.filings)):
            for i, p in enumerate(pts):
                if not lo <= p[0] <= hi:
                    raise ScenarioError(f"{field_name}[{i}]", f"point {p[0]} outside domain {(lo, hi)}")
    else:
        for name in ("f_star", "g"):
            if not isinstance(getattr(s, name), LinearSeparator):
                raise ScenarioError(name, "svm needs a linear rule")
        if s.solver.name not in SOLVERS_SVM:
            raise ScenarioError("solver.name", f"must be one of {SOLVERS_SVM} for svm, got {s.solver.name!r}")
        if s.sampler is not None:
            if s.sampler.dim != dim:
                raise ScenarioError("sampler", f"sampler is {s.sampler.dim}-d but the scenario is {dim}-d")
            if s.seed is None:
                raise ScenarioError("seed", "a seed is required when sampling")
        if s.solver.name == "best_achievable" and s.sampler is None:
            raise ScenarioError("sampler", "best_achievable needs a sampler")
    if s.history.dim is not None and s.history.dim != dim:
        raise ScenarioError("history", f"cases are {s.history.dim}-d but the scenario is {dim}-d")
    if s.solver.name == "budgeted":
        k = s.solver.k
        if isinstance(k, bool) or not isinstance(k, int) or k < 0:
            raise ScenarioError("solver.k", f"budget must be a nonnegative integer, got {k!r}")
    if s.solver.epsilon is not None and not 0 < s.solver.epsilon < 1:
        raise ScenarioError("solver.epsilon", "must lie in (0, 1)")
    for name, val in (("solver.n_samples", s.solver.n_samples), ("n_samples", s.n_samples)):
        if val is not None and (isinstance(val, bool) or not isinstance(val, int) or val < 1):
            raise ScenarioError(name, f"must be a positive integer, got {val!r}")
    if s.removal_policy not in POLICIES:
        raise ScenarioError("removal_policy", f"must be one of {POLICIES}, got {s.removal_policy!r}")
    if s.removal_policy == "seeded_random" and s.seed is None:
        raise ScenarioError("seed", "seeded_random removal needs a seed")
    if s.solver.name in ("optimal", "budgeted", "greedy", "pair_lookahead"):
        for i, c in enumerate(s.history):
            if evaluate(s.f_star, c.point) != c.label:
                raise ScenarioError(f"history[{i}]", f"case {c.point} disagrees with f_star; use the relabel solver")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(str(path), f"cannot read scenario file ({exc.strerror})") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(str(path), f"malformed JSON at line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(obj)
