"""Command-line interface to jointconcordance"""
import argparse
import logging
import sys
import typing
from pathlib import Path

from .base import Report
from .cli import (
    add_common_args,
    add_estimator_args,
    add_fit_args,
    add_horizon_args,
    resolve_config,
    setup_logging,
)
from .errors import USAGE_EXIT_CODE, JointConcordanceError
from .harness import (
    COMMANDS,
    MODEL_CHOICES,
    ErrorReport,
    RunConfig,
    format_text,
    run_output,
)
from .varimp import IN_SAMPLE, K_FOLD

_LOGGER = logging.getLogger(__name__)

# -----------------------------------------------------------------------------


def main():
    """Main method"""
    sys.exit(run())


def run(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    args = get_args(argv)
    setup_logging(args)
    _LOGGER.debug(args)

    try:
        config = resolve_config(args)
        result = COMMANDS[config.command](config)
        emit(config, result)
    except JointConcordanceError as error:
        _LOGGER.error("%s: %s", error.name, error.message)
        print(ErrorReport.from_error(error).payload())
        return error.exit_code
    except (ValueError, OSError) as error:
        _LOGGER.error(error)
        print(ErrorReport(error="UsageError", message=str(error)).payload())
        return USAGE_EXIT_CODE

    return 0


def emit(config: RunConfig, result: Report):
    """Write a command result as JSON or text."""
    if config.format == "text":
        text = format_text(result)
    else:
        text = run_output(config, result).payload(indent=2)

    if config.output and (config.command != "simulate"):
        Path(config.output).write_text(text + "\n", encoding="utf-8")
        _LOGGER.debug("Wrote %s char(s) to %s", len(text), config.output)
    else:
        print(text)


# -----------------------------------------------------------------------------


class _ArgumentParser(argparse.ArgumentParser):
    """Exits with the usage exit code on bad arguments."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT_CODE, f"{self.prog}: error: {message}\n")


def get_args(argv: typing.Optional[typing.Sequence[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = _ArgumentParser(
        prog="jointconcordance",
        description="Joint concordance for competing-risks models",
    )

    # Create subparsers for each sub-command
    sub_parsers = parser.add_subparsers(parser_class=_ArgumentParser)
    sub_parsers.required = True
    sub_parsers.dest = "command"

    # --------
    # evaluate
    # --------
    evaluate_parser = sub_parsers.add_parser(
        "evaluate", help="Evaluate a model on a CSV dataset"
    )
    evaluate_parser.add_argument(
        "dataset", nargs="?", default=argparse.SUPPRESS, help="Path to CSV dataset"
    )
    evaluate_parser.add_argument(
        "--model",
        choices=MODEL_CHOICES,
        default=argparse.SUPPRESS,
        help="Risk model (default: exp)",
    )
    evaluate_parser.add_argument(
        "--model-path",
        default=argparse.SUPPRESS,
        help="Fitted model JSON (overrides --model)",
    )
    evaluate_parser.add_argument(
        "--bootstrap",
        default=argparse.SUPPRESS,
        help="Bootstrap replicates for intervals (default: 0)",
    )
    evaluate_parser.add_argument(
        "--level", default=argparse.SUPPRESS, help="Interval level (default: 0.95)"
    )
    add_horizon_args(evaluate_parser)
    add_estimator_args(evaluate_parser)
    add_fit_args(evaluate_parser)
    add_common_args(evaluate_parser)

    # ---
    # fit
    # ---
    fit_parser = sub_parsers.add_parser(
        "fit", help="Fit a cause-specific proportional-hazards model"
    )
    fit_parser.add_argument(
        "dataset", nargs="?", default=argparse.SUPPRESS, help="Path to CSV dataset"
    )
    add_fit_args(fit_parser)
    add_common_args(fit_parser)

    # --------
    # simulate
    # --------
    simulate_parser = sub_parsers.add_parser(
        "simulate", help="Write a synthetic cohort to CSV"
    )
    simulate_parser.add_argument(
        "--n", default=argparse.SUPPRESS, help="Cohort size (default: 1000)"
    )
    simulate_parser.add_argument(
        "--censoring-rate",
        default=argparse.SUPPRESS,
        help="Target censored fraction (default: 0)",
    )
    simulate_parser.add_argument(
        "--beta0",
        default=argparse.SUPPRESS,
        help="Covariate effect on censoring (default: 0)",
    )
    add_common_args(simulate_parser)

    # ---------------
    # simulate-table1
    # ---------------
    table1_parser = sub_parsers.add_parser(
        "simulate-table1", help="Replicate study of the weighted estimator"
    )
    table1_parser.add_argument(
        "--models",
        default=argparse.SUPPRESS,
        help="Comma-separated models (default: exp,csc)",
    )
    table1_parser.add_argument(
        "--censoring-rates",
        default=argparse.SUPPRESS,
        help="Comma-separated censored fractions (default: 0.5)",
    )
    table1_parser.add_argument(
        "--sizes",
        default=argparse.SUPPRESS,
        help="Comma-separated cohort sizes (default: 1000)",
    )
    table1_parser.add_argument(
        "--replicates", default=argparse.SUPPRESS, help="Replicates (default: 100)"
    )
    table1_parser.add_argument(
        "--beta0",
        default=argparse.SUPPRESS,
        help="Covariate effect on censoring (default: 0)",
    )
    table1_parser.add_argument(
        "--n-large",
        default=argparse.SUPPRESS,
        help="Cohort size for true values (default: 100000)",
    )
    table1_parser.add_argument(
        "--n-train",
        default=argparse.SUPPRESS,
        help="Training cohort size for csc (default: 5000)",
    )
    add_horizon_args(table1_parser)
    add_estimator_args(table1_parser)
    add_fit_args(table1_parser)
    add_common_args(table1_parser)

    # ---------------
    # simulate-table2
    # ---------------
    table2_parser = sub_parsers.add_parser(
        "simulate-table2", help="Compare models on a large uncensored cohort"
    )
    table2_parser.add_argument(
        "--n-large",
        default=argparse.SUPPRESS,
        help="Evaluation cohort size (default: 100000)",
    )
    table2_parser.add_argument(
        "--n-train",
        default=argparse.SUPPRESS,
        help="Training cohort size for csc (default: 5000)",
    )
    add_horizon_args(table2_parser)
    add_fit_args(table2_parser)
    add_common_args(table2_parser)

    # --------------
    # rank-variables
    # --------------
    rank_parser = sub_parsers.add_parser(
        "rank-variables", help="Rank covariates by backward elimination"
    )
    rank_parser.add_argument(
        "dataset", nargs="?", default=argparse.SUPPRESS, help="Path to CSV dataset"
    )
    rank_parser.add_argument(
        "--methods",
        default=argparse.SUPPRESS,
        help="Comma-separated methods (default: stepwise_cr,stepwise_lumped)",
    )
    rank_parser.add_argument(
        "--evaluation",
        choices=[IN_SAMPLE, K_FOLD],
        default=argparse.SUPPRESS,
        help="Metric evaluation (default: in-sample)",
    )
    rank_parser.add_argument(
        "--folds", default=argparse.SUPPRESS, help="Folds for k-fold (default: 5)"
    )
    add_horizon_args(rank_parser)
    add_fit_args(rank_parser)
    add_common_args(rank_parser)

    return parser.parse_args(argv)


# -----------------------------------------------------------------------------

if __name__ == "__main__":
    main()
