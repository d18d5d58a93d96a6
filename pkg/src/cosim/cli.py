"""Command line entry point: ``cosim run|sweep|presets|validate``.

Exit codes: 0 success, 2 configuration error, 3 runtime invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .netsim import UnknownAgent
from .report import render_report, write_run
from .scenario import ConfigError, Scenario, load_preset, load_scenario, preset_names
from .simkernel import SchedulingInPast
from .sweep import sweep
from .synchro import DesyncDetected, Strategy, run_simulation

log = logging.getLogger("cosim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class UsageError(ConfigError):
    pass


def parse_seeds(text: str) -> list[int]:
    """``"1..5"`` -> [1, 2, 3, 4, 5]; ``"3,7"`` -> [3, 7]."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --seeds value {text!r}") from exc
    if not seeds:
        raise UsageError(f"--seeds {text!r} selects no seeds")
    return seeds


def parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad {flag} value {text!r}") from exc


def parse_strategies(text: str) -> list[Strategy]:
    try:
        return [Strategy(s.strip()) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"unknown strategy in {text!r}; use fixed,adjustable") from exc


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get("COSIM_OUT") or "cosim-out")


def _scenario(args) -> Scenario:
    if getattr(args, "preset", None):
        return load_preset(args.preset)
    if getattr(args, "config", None):
        return load_scenario(args.config)
    raise UsageError("give --config FILE or --preset NAME")


def cmd_run(args) -> int:
    scenario = _scenario(args)
    policy = scenario.policy
    if args.strategy:
        policy = policy.model_copy(update={"strategy": Strategy(args.strategy)})
    result = run_simulation(scenario, policy, args.seed)
    out = _out_dir(args.out)
    write_run(result, out, trace=args.trace)
    print(
        f"{scenario.name} strategy={policy.strategy.value} seed={result.seed} "
        f"windows={len(result.windows)} elapsed_us={result.elapsed} "
        f"cumulative_lp={result.cumulative_lp():.6f} out={out}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _scenario(args)
    rows = sweep(
        base,
        parse_floats(args.distances, "--distances"),
        parse_strategies(args.strategies),
        parse_seeds(args.seeds) if args.seeds else None,
    )
    out = _out_dir(args.out)
    for path in render_report(rows, out, svg=args.svg):
        print(path)
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in preset_names():
        s = load_preset(name)
        print(f"{name}\t{s.pair_kind}\t{s.los_label}\tagents={len(s.world.agents)}\tobstacles={len(s.world.obstacles)}")
    return EXIT_OK


def cmd_validate(args) -> int:
    s = load_scenario(args.config)
    print(f"ok: {s.name} ({len(s.world.agents)} agents, {len(s.flows)} flows)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cosim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="scenario JSON file")
    src.add_argument("--preset", help="bundled preset name")
    run.add_argument("--strategy", choices=[s.value for s in Strategy])
    run.add_argument("--seed", type=int)
    run.add_argument("--trace", action="store_true", help="also write trace.txt")
    run.add_argument("--out", help="output directory (default $COSIM_OUT or ./cosim-out)")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="distance x strategy comparison")
    src = sw.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset")
    src.add_argument("--config")
    sw.add_argument("--distances", default="20,40,60,80,100")
    sw.add_argument("--strategies", default="fixed,adjustable")
    sw.add_argument("--seeds", help="'1..5' or '1,2,3' (default: scenario seed)")
    sw.add_argument("--svg", action="store_true")
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)

    ps = sub.add_parser("presets", help="list bundled scenarios")
    ps.set_defaults(func=cmd_presets)

    va = sub.add_parser("validate", help="check a scenario file")
    va.add_argument("--config", required=True)
    va.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UnknownAgent) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DesyncDetected, SchedulingInPast) as exc:
        log.error("invariant violation: %s", exc)
        print(f"runtime invariant violation: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
