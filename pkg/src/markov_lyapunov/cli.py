"""Command-line front door: python -m markov_lyapunov.cli MODE --config PATH."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from markov_lyapunov.commands import register_all
from markov_lyapunov.errors import EXIT_INTERNAL, LyapunovError
from markov_lyapunov.runner import PipelineRunner, RunContext
from markov_lyapunov.schemas.base import ErrorReport
from markov_lyapunov.schemas.config import MODES, RunConfig
from markov_lyapunov.schemas.report import EstimateReport, write_report, write_traces
from markov_lyapunov.utils import default_workers, env_str, load_env

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Top Lyapunov exponent of Markovian products of invertible matrices"
    )
    parser.add_argument(
        "mode",
        nargs="?",
        choices=MODES,
        help="Pipeline to run; overrides the config's mode",
    )
    parser.add_argument("--mode", dest="mode_flag", choices=MODES, help="Alias for the positional mode")
    parser.add_argument("--config", required=True, type=Path, help="Run configuration (JSON)")
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument(
        "--workers",
        type=int,
        help="Worker threads (default: MARKOV_LYAPUNOV_WORKERS or the CPU count); 1 is bit-exact",
    )
    parser.add_argument("--out", type=Path, help="Output directory for report.json and traces.csv")
    parser.add_argument("--log-level", help="Logging level (default: MARKOV_LYAPUNOV_LOG_LEVEL or INFO)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file, then environment, then flags."""

    config = RunConfig.load(args.config)
    mode = args.mode or args.mode_flag
    if mode:
        config.mode = mode
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.output.directory = str(args.out)
    else:
        config.output.directory = env_str("OUT", config.output.directory)
    return config


def run(config: RunConfig, *, workers: int = 1) -> EstimateReport:
    """Execute the configured pipelines and write the report and traces."""

    context = RunContext.from_config(config, workers=workers)
    runner = PipelineRunner(context)
    register_all(runner, context)
    report = runner.run(config.mode)
    out_dir = Path(config.output.directory)
    write_report(report, out_dir / config.output.report)
    write_traces(report.traces, out_dir / config.output.traces)
    logger.info("Report written to %s", out_dir / config.output.report)
    return report


def main(argv: Sequence[str] | None = None) -> int:
    load_env()
    parser = build_parser()
    args = parser.parse_args(argv)
    level_name = (args.log_level or env_str("LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    workers = args.workers if args.workers is not None else default_workers()
    if workers < 1:
        parser.error("--workers must be at least 1")
    try:
        config = resolve_config(args)
        report = run(config, workers=workers)
    except LyapunovError as exc:
        error = ErrorReport.from_exception(exc)
        logger.error("%s: %s", error.error_type, error.message)
        print(json.dumps({"error": error.to_dict()}), file=sys.stderr)
        return error.exit_code
    except Exception as exc:  # pragma: no cover - logged for observability
        logger.exception("Run failed")
        print(json.dumps({"error": ErrorReport.from_exception(exc).to_dict()}), file=sys.stderr)
        return EXIT_INTERNAL
    for estimate in report.gammas:
        logger.info("gamma[%s] = %.10f", estimate.method, estimate.value)
    return report.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
