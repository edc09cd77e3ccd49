"""Command-line entry point.

    hybrid-gd run --preset trial1 --out runs/
    hybrid-gd run --config exp.json --checks theorem,escape_growth
    hybrid-gd list-presets
    hybrid-gd compare-modes --config exp.json

Exit status: 0 all checks pass, 1 a check failed, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import CHECK_NAMES, ExperimentConfig, load_config
from .errors import ConfigError, DimensionError, InvalidSpectrumError, NumericalFailure
from .runner import compare_modes, list_presets, preset_configs, run_experiment

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("hybrid_gd")


def _parse_checks(value: str) -> str | list[str]:
    if value in ("all", "none"):
        return value
    names = [v.strip() for v in value.split(",") if v.strip()]
    unknown = sorted(set(names) - set(CHECK_NAMES))
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown checks {unknown}; choose from {', '.join(CHECK_NAMES)}")
    return names


def _seed(value: str) -> int:
    s = int(value)
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return s


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybrid-gd", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment or a preset")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path)
    src.add_argument("--preset")
    run.add_argument("--seed", type=_seed, default=None)
    run.add_argument("--out", type=Path, default=None, help="output directory (default: config output_dir or runs/)")
    run.add_argument("--checks", type=_parse_checks, default=None, help="all | none | comma-separated names")
    run.add_argument("--large", action="store_true", help="include n=5000 in the scaling preset")

    sub.add_parser("list-presets", help="list bundled presets")

    cmp_ = sub.add_parser("compare-modes", help="centralized vs agent-based simulation")
    src = cmp_.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path)
    src.add_argument("--preset")
    cmp_.add_argument("--seed", type=_seed, default=None)
    cmp_.add_argument("--shuffle-seed", type=int, default=None, help="randomize agent iteration order")
    return parser


def _configs(args) -> list[ExperimentConfig]:
    if args.config is not None:
        cfgs = [load_config(args.config)]
        if args.seed is not None:
            cfgs = [c.model_copy(update={"seed": args.seed}) for c in cfgs]
    else:
        try:
            cfgs = preset_configs(args.preset, args.seed or 0, getattr(args, "large", False))
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from exc
    if getattr(args, "checks", None) is not None:
        cfgs = [c.model_copy(update={"checks": args.checks}) for c in cfgs]
    return cfgs


def _cmd_run(args) -> int:
    cfgs = _configs(args)
    status = EXIT_OK
    for cfg in cfgs:
        if args.out is not None:
            out_dir = args.out / cfg.name
        elif cfg.output_dir is not None:
            out_dir = Path(cfg.output_dir) if len(cfgs) == 1 else Path(cfg.output_dir) / cfg.name
        else:
            out_dir = Path("runs") / cfg.name
        result = run_experiment(cfg, out_dir)
        s = result.summary
        for rep in s.reports:
            for line in rep.lines():
                log.info("%s: %s", cfg.name, line)
        print(
            f"{'PASS' if s.passed else 'FAIL'} {cfg.name}: status={s.status} jumps={s.jump_count} "
            f"final_dist={s.final_dist:.3e} t={s.final_t:.6g} wall={s.wall_clock:.2f}s -> {out_dir}"
        )
        if not s.passed:
            status = EXIT_CHECK_FAILED
    return status


def _cmd_list() -> int:
    for name, desc in list_presets():
        print(f"{name}\t{desc}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    status = EXIT_OK
    for cfg in _configs(args):
        cmp = compare_modes(cfg, args.shuffle_seed)
        report = {k: v for k, v in cmp.to_dict().items() if k not in ("centralized", "distributed")}
        print(json.dumps(report))
        if not cmp.passed:
            status = EXIT_CHECK_FAILED
    return status


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list-presets":
            return _cmd_list()
        return _cmd_compare(args)
    except (ConfigError, InvalidSpectrumError, DimensionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
