"""Command-line entry point.

    latticemf run <config.json | preset-name> [--out DIR] [--threads N] [--seed S]
    latticemf presets

Exit codes: 0 all asserted properties pass; 1 a property failed;
2 configuration or resource error (the message names the config field).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ExperimentConfig
from .errors import ConfigError, GeometryError, LatticeMFError, ResourceLimitError
from .experiments import run_experiment
from .presets import describe_presets, get_preset

log = logging.getLogger("latticemf")

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latticemf",
        description="Finite-volume simulator and verification harness for "
        "lattice fermions with mean-field interactions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a config file or preset")
    run.add_argument("config", help="path to a JSON config, or a preset name")
    run.add_argument("--out", default=None, help="output directory (default: ./latticemf-out)")
    run.add_argument("--threads", type=int, default=None, help="worker pool size")
    run.add_argument("--seed", type=int, default=None, help="random seed override")
    sub.add_parser("presets", help="list bundled presets")
    return parser


def _resolve_config(arg):
    if os.path.isfile(arg):
        return ExperimentConfig.from_file(arg)
    try:
        return ExperimentConfig(get_preset(arg))
    except KeyError:
        raise ConfigError(
            "<config>",
            f"{arg!r} is neither an existing file nor a preset "
            f"(presets: {', '.join(n for n, _ in describe_presets())})",
        ) from None


def main(argv=None):
    logging.basicConfig(level=logging.WARNING)
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name, desc in describe_presets():
            print(f"{name:20s} {desc}")
        return EXIT_OK
    try:
        cfg = _resolve_config(args.config)
        out_dir = args.out or cfg.out or os.environ.get("LATTICEMF_OUT", "latticemf-out")
        result = run_experiment(cfg, out_dir, threads=args.threads, seed=args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (ResourceLimitError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except LatticeMFError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_PROPERTY_FAILURE
    for check in result.checks:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}")
    for path in result.files:
        print(f"wrote {path}")
    return EXIT_OK if result.passed else EXIT_PROPERTY_FAILURE


if __name__ == "__main__":
    sys.exit(main())
