"""Command-line entry point.

    sixdma run --config <path> [--out <dir>] [--seed <n>]
               [--scheme proposed|fpa|circular|rotation-only]
               [--sweep users|xi|power|none] [--jobs <n>]

Exit status: 0 on success, 1 for configuration or usage errors, 2 when a
run fails.
"""

from __future__ import annotations

import argparse
import sys

from .config import SCHEMES, SWEEP_AXES, load_config
from .errors import ConfigError
from .experiment import emit_outputs, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sixdma", description="Movable-antenna base station experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run an experiment described by a config file")
    run.add_argument("--config", required=True, help="JSON experiment config")
    run.add_argument("--out", help="output directory (default: experiment.out from the config)")
    run.add_argument("--seed", type=_u64, help="master seed override")
    run.add_argument("--scheme", choices=SCHEMES, help="run only this scheme")
    run.add_argument("--sweep", choices=SWEEP_AXES, help="sweep axis override")
    run.add_argument("--jobs", type=int, help="sweep points to run in parallel")
    run.add_argument("--quiet", action="store_true", help="do not print the results table")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, scheme=args.scheme, sweep=args.sweep, out=args.out, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        outputs = run_experiment(cfg)
        emit_outputs(outputs, cfg.experiment.out, cfg.experiment.record_timing)
    except Exception as exc:  # any failure past validation is a runtime failure
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not args.quiet:
        for o in outputs:
            r = o.row
            where = "" if r.sweep is None else f"{cfg.sweep.axis}={r.sweep:g} "
            print(f"{where}{r.scheme}: {r.capacity:.4f} bps/Hz (se {r.stderr:.4f})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
