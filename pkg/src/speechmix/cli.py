"""Command-line entry point binding the pipeline stages.

Every subcommand takes the same global options (--config, --seed,
--workers) and runs one stage; ``run`` executes the full pipeline or a
--stages subset.  Exit codes: 0 success, 1 stage failure, 2 configuration
or dependency error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .corpus import ManifestError
from .pipeline import (
    STAGE_NAMES,
    ConfigError,
    PipelineError,
    StageError,
    load_config,
    run_pipeline,
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="pipeline configuration file (YAML)")
    common.add_argument("--seed", type=int, default=None, help="override the global seed")
    common.add_argument("--workers", type=int, default=None, help="override the worker count")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress progress logging")

    parser = argparse.ArgumentParser(prog="speechmix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_NAMES:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    run = sub.add_parser("run", parents=[common], help="run the full pipeline (or --stages subset)")
    run.add_argument(
        "--stages",
        default=None,
        help=f"comma-separated subset of: {','.join(STAGE_NAMES)}",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config, seed=args.seed, workers=args.workers)
        if args.command == "run":
            stages = [s.strip() for s in args.stages.split(",")] if args.stages else None
            run_pipeline(cfg, stages)
        else:
            run_pipeline(cfg, [args.command])
    except (ConfigError, PipelineError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
