"""Command-line front end.

Examples
--------
    exitlaw simulate --preset two_state --seed 1 --out results/
    exitlaw exact --config my_chain.toml
    exitlaw check --seed 42 --out results/
"""

from __future__ import annotations

import argparse
import sys

from .experiments.acceptance import run_check
from .experiments.config import ConfigError, load_config
from .experiments.output import emit_outputs, summary_text
from .experiments.presets import PRESETS, preset
from .experiments.scenarios import run_exact, run_qsd_scenario, run_ray_scenario, run_scenario

U64_MAX = 2**64 - 1


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exitlaw",
        description="Exit laws of killed Markov processes: exact solves, simulation, checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "exact": "exact exit law and resurrected invariant law of a finite chain",
        "simulate": "exact solve, killed samples and resurrected cycles, compared",
        "qsd": "quasi-stationary start: lifetime, independence and exit law checks",
        "ray": "unit-velocity ray: inversion and thinning against closed forms",
        "check": "run the full acceptance suite",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--seed", type=_seed, default=None,
                       help="master seed (default: config value, or 42 for check)")
        p.add_argument("--out", default=None, help="output directory for tables and figures")
        if name != "check":
            src = p.add_mutually_exclusive_group(required=True)
            src.add_argument("--config", help="scenario TOML file")
            src.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    return parser


def _load(args):
    cfg = load_config(args.config) if args.config else preset(args.preset)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _run_one(args) -> int:
    cfg = _load(args)
    if args.command == "exact":
        if cfg.model != "ctmc" or cfg.mu == "qsd":
            raise ConfigError("exact needs a chain scenario with an explicit mu")
        report = run_exact(cfg)
    elif args.command == "qsd":
        if cfg.model != "ctmc":
            raise ConfigError("qsd needs a chain scenario")
        report = run_qsd_scenario(cfg)
    elif args.command == "ray":
        if cfg.model != "ray":
            raise ConfigError("ray needs a ray scenario")
        report = run_ray_scenario(cfg)
    else:
        report = run_scenario(cfg)
    sys.stdout.write(summary_text(report))
    out = args.out or cfg.out_dir
    if out:
        for path in emit_outputs(report, out):
            print(f"wrote {path}")
    return 0 if report.passed else 1


def _run_check(args) -> int:
    seed = 42 if args.seed is None else args.seed
    results = run_check(seed, args.out)
    for r in results:
        print(r.line())
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return _run_check(args)
        return _run_one(args)
    except (ConfigError, OSError) as exc:
        print(f"exitlaw: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
