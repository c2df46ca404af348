"""Command line: ``stratlit run | render | validate | suite``.

Exit status is 0 on success, 2 when a scenario fails validation and 3 when
a solver or the court model reports an error (or a golden run drifts).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from stratlit.errors import InvalidInputError, StratlitError
from stratlit.render import render_frames, render_svg
from stratlit.runner import run_scenario
from stratlit.scenario import POLICIES, ScenarioError, dumps, load_scenario

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3


def golden_dir() -> Path:
    return Path(str(resources.files("stratlit") / "scenarios"))


def golden_scenarios() -> list:
    return sorted(golden_dir().glob("*.json"))


def _load(args):
    scenario = load_scenario(args.scenario)
    return scenario.with_overrides(seed=getattr(args, "seed", None), policy=getattr(args, "policy", None))


def _write(text: str, target: str | None) -> None:
    if target is None or target == "-":
        sys.stdout.write(text)
    else:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        Path(target).write_text(text)


def cmd_run(args) -> int:
    scenario = _load(args)
    result = run_scenario(scenario)
    _write(dumps(result), args.out or scenario.outputs.get("result"))
    render_to = args.render or scenario.outputs.get("render")
    if render_to and scenario.dimension <= 2:
        _write(render_svg(scenario, result), render_to)
    return EXIT_OK


def cmd_render(args) -> int:
    scenario = _load(args)
    result = json.loads(Path(args.result).read_text())
    target = args.out or scenario.outputs.get("render") or str(Path(args.result).with_suffix(".svg"))
    if args.frames:
        stem = Path(target)
        for i, svg in enumerate(render_frames(scenario, result)):
            _write(svg, str(stem.with_name(f"{stem.stem}-step{i:02d}.svg")))
    else:
        _write(render_svg(scenario, result), target)
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = _load(args)
    print(f"ok: {scenario.name} ({scenario.setting}, solver {scenario.solver.name})")
    return EXIT_OK


def cmd_suite(args) -> int:
    status = EXIT_OK
    for path in golden_scenarios():
        expected_path = path.parent / "golden" / path.name.replace(".json", ".result.json")
        result = dumps(run_scenario(load_scenario(path)))
        if args.update:
            expected_path.parent.mkdir(exist_ok=True)
            expected_path.write_text(result)
            print(f"UPDATED {path.stem}")
            continue
        same = expected_path.exists() and expected_path.read_text() == result
        print(f"{'PASS' if same else 'FAIL'} {path.stem}")
        if not same:
            status = EXIT_SOLVER
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratlit", description="Strategic litigation solvers and court simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def overrides(p):
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--policy", choices=POLICIES, default=None, help="override the removal policy")

    p = sub.add_parser("run", help="solve a scenario and write its result JSON")
    p.add_argument("scenario")
    p.add_argument("-o", "--out", default=None, help="result path (default: scenario outputs.result or stdout)")
    p.add_argument("--render", default=None, help="also write an SVG rendering here")
    overrides(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("render", help="draw a scenario and its result as SVG")
    p.add_argument("scenario")
    p.add_argument("result")
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--frames", action="store_true", help="write one SVG per session step")
    overrides(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    overrides(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("suite", help="run the bundled golden scenarios")
    p.add_argument("--update", action="store_true", help="rewrite the golden result files")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, InvalidInputError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except StratlitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
