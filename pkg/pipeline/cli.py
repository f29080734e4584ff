"""Command line entry point: ``python -m pipeline.cli <generate|assemble|evaluate|stats>``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal invariant violation or unexpected failure. Failures print a single
``error=<CODE> <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv

from detmetrics.predictions import format_report
from pipeline.assemble import cmd_assemble
from pipeline.config import PipelineConfig, load_config
from pipeline.generate import cmd_generate
from pipeline.report import DEFAULT_THRESHOLDS, cmd_evaluate, cmd_stats, parse_thresholds
from utils.errors import SynthError, UsageError
from utils.telemetry import configure_logging, configure_tracing

logger = logging.getLogger(__name__)


class CommandLineError(UsageError):
    code = "USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise CommandLineError(f"{self.prog}: {message}")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline YAML config")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--experiments", type=int, help="number of experiments (overrides the config)")
    parser.add_argument("--out", help="output root (overrides the config)")
    parser.add_argument("--jobs", type=int, help="worker processes (default: config, ROOMSYNTH_JOBS, CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="roomsynth", description="Synthetic dynamic indoor datasets and detection metrics")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR (default: ROOMSYNTH_LOG_LEVEL or INFO)")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    generate = commands.add_parser("generate", help="sample, explore and render experiments")
    _add_config_flags(generate)

    assemble = commands.add_parser("assemble", help="build a recipe's COCO dataset from generated experiments")
    _add_config_flags(assemble)
    assemble.add_argument("--recipe", required=True, help="recipe name from the config")

    evaluate = commands.add_parser("evaluate", help="AP / AP50 of a predictions file")
    evaluate.add_argument("--gt", required=True, help="COCO ground-truth annotation file")
    evaluate.add_argument("--predictions", required=True, help="COCO results file")
    evaluate.add_argument("--task", choices=("bbox", "mask", "both"), default="both")
    evaluate.add_argument("--thresholds", default=",".join(str(t) for t in DEFAULT_THRESHOLDS),
                          help="comma-separated score thresholds")
    evaluate.add_argument("--out", help="machine-readable results file")

    stats = commands.add_parser("stats", help="counts report of a written dataset")
    stats.add_argument("dataset", help="dataset directory holding annotations/")
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {"seed": args.seed, "experiments": args.experiments, "output_root": args.out, "jobs": args.jobs}
    return load_config(args.config, overrides)


def run(args: argparse.Namespace) -> int:
    if args.command == "generate":
        summary = cmd_generate(_config_from_args(args))
        print(json.dumps(summary, sort_keys=True))
    elif args.command == "assemble":
        print(cmd_assemble(_config_from_args(args), args.recipe))
    elif args.command == "evaluate":
        rows = cmd_evaluate(args.gt, args.predictions, args.task, parse_thresholds(args.thresholds), args.out)
        print(format_report(rows))
    elif args.command == "stats":
        print(json.dumps(cmd_stats(args.dataset), sort_keys=True, indent=2))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    provider = None
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level)
        provider = configure_tracing()
        return run(args)
    except SynthError as e:
        print(e.one_line(), file=sys.stderr)
        return e.exit_status
    except Exception as e:
        logger.debug("Unexpected failure", exc_info=True)
        print(f"error=INTERNAL {' '.join(f'{type(e).__name__}: {e}'.split())}", file=sys.stderr)
        return 3
    finally:
        if provider is not None:
            provider.shutdown()


if __name__ == "__main__":
    sys.exit(main())
