"""Command-line entry point.

    pushcrowd run <scenario.toml | --preset NAME> [--out DIR] [--snapshot-every N] [--steps N] [--images]
    pushcrowd validate <scenario.toml>
    pushcrowd presets

Exit codes: 0 success, 1 invalid scenario, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import CflViolation, CrowdError, ScenarioError
from .presets import PRESETS, get_preset
from .scenario import digest, parse_scenario, validate

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pushcrowd", description="Macroscopic crowd simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file or a preset")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("scenario", nargs="?", help="scenario file (TOML)")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    r.add_argument("--out", help="output directory (default: the scenario's)")
    r.add_argument("--snapshot-every", type=int, help="snapshot cadence in steps")
    r.add_argument("--steps", type=int, help="override the number of steps")
    r.add_argument("--images", action="store_true", help="also write graymap images")
    r.add_argument("--fields", action="store_true", help="also export potentials and desired velocities")

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("scenario")

    pr = sub.add_parser("presets", help="list built-in scenarios")
    pr.add_argument("--dump", metavar="NAME", help="print a preset as a scenario file")
    return p


def _load(args):
    if args.preset:
        return get_preset(args.preset)
    return parse_scenario(args.scenario)


def _report_errors(err: ScenarioError, where: str) -> None:
    print(f"{where}: invalid scenario", file=sys.stderr)
    for msg in err.errors:
        print(f"  {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    from . import engine, io

    try:
        scenario = _load(args)
        if args.steps is not None and args.steps < 0:
            raise ScenarioError(["--steps must be >= 0"])
        if args.snapshot_every is not None and args.snapshot_every < 1:
            raise ScenarioError(["--snapshot-every must be >= 1"])
    except ScenarioError as err:
        _report_errors(err, args.scenario or args.preset)
        return EXIT_INVALID
    except OSError as err:
        print(f"cannot read scenario: {err}", file=sys.stderr)
        return EXIT_INVALID

    out = Path(args.out or scenario.output.directory)
    if args.snapshot_every is not None:
        scenario = dataclasses.replace(
            scenario, schedule=dataclasses.replace(scenario.schedule, snapshot_every=args.snapshot_every)
        )
    try:
        result = engine.run(scenario, out, images=args.images or scenario.output.images, n_steps=args.steps)
        if args.fields:
            io.write_fields(result.state, out / "fields")
    except CflViolation as err:
        print(f"run aborted: {err}; partial output in {out}", file=sys.stderr)
        return EXIT_RUNTIME
    except (CrowdError, OSError) as err:
        print(f"run failed: {err}", file=sys.stderr)
        return EXIT_RUNTIME

    st = result.state
    print(f"{scenario.name}: {st.step} steps, t = {st.time:.6g}")
    for n, pop in enumerate(scenario.populations):
        print(
            f"  pop {pop.id}: mass {st.mass(n):.6g}, exited {st.exited[n]:.6g}, injected {st.injected[n]:.6g}"
            + "".join(f", target {t}: {m:.6g}" for t, m in sorted(st.exited_by_target[n].items()))
        )
    print(f"  output in {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        scenario = parse_scenario(args.scenario)
    except ScenarioError as err:
        _report_errors(err, args.scenario)
        return EXIT_INVALID
    except OSError as err:
        print(f"cannot read scenario: {err}", file=sys.stderr)
        return EXIT_INVALID
    print(f"{args.scenario}: ok ({scenario.name}, m = {scenario.geometry.m}, {len(scenario.populations)} population(s))")
    return EXIT_OK


def cmd_presets(args) -> int:
    from .scenario import dumps

    if args.dump:
        try:
            print(dumps(get_preset(args.dump)), end="")
        except KeyError as err:
            print(err.args[0], file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK
    for name in PRESETS:
        s = get_preset(name)
        print(f"{name:26s} m={s.geometry.m:<4d} dt={s.physics.dt:.4g} steps={s.schedule.n_steps:<5d} {digest(s)[:12]}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return {"run": cmd_run, "validate": cmd_validate, "presets": cmd_presets}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
