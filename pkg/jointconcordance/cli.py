"""Methods for command-line parsing of joint-concordance runs."""
import argparse
import dataclasses
import logging
import typing
from pathlib import Path

from .harness import RunConfig
from .utils import only_fields

_LOGGER = logging.getLogger(__name__)

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}
_NONE = {"", "none", "null"}

# -----------------------------------------------------------------------------


def add_common_args(parser: argparse.ArgumentParser):
    """Add arguments shared by every subcommand.

    Options default to ``argparse.SUPPRESS`` so that only flags given on the
    command line override values from ``--config``.
    """
    parser.add_argument("--config", help="Plain-text key=value config file")
    parser.add_argument(
        "--output", default=argparse.SUPPRESS, help="Output path (default: stdout)"
    )
    parser.add_argument(
        "--format",
        choices=["json", "text"],
        default=argparse.SUPPRESS,
        help="Report format (default: json)",
    )
    parser.add_argument(
        "--seed", default=argparse.SUPPRESS, help="Top-level random seed (default: 0)"
    )
    parser.add_argument(
        "--workers",
        default=argparse.SUPPRESS,
        help="Threads for replicates and refits (default: 1)",
    )
    parser.add_argument(
        "--debug", action="store_true", help="Print DEBUG messages to the console"
    )
    parser.add_argument(
        "--log-format",
        default="[%(levelname)s:%(asctime)s] %(name)s: %(message)s",
        help="Python logger format",
    )


def add_horizon_args(parser: argparse.ArgumentParser):
    """Add evaluation horizon arguments."""
    parser.add_argument(
        "--quantile",
        default=argparse.SUPPRESS,
        help="Horizon as a quantile of observed times (default: 0.75)",
    )
    parser.add_argument(
        "--horizon", default=argparse.SUPPRESS, help="Horizon (overrides --quantile)"
    )


def add_estimator_args(parser: argparse.ArgumentParser):
    """Add weighted estimator options."""
    parser.add_argument(
        "--tie-credit",
        action="store_true",
        default=argparse.SUPPRESS,
        help="Give half credit to tied risk scores",
    )
    parser.add_argument(
        "--exclude-censored-comparators",
        action="store_true",
        default=argparse.SUPPRESS,
        help="Only observed competing events enter the second pair term",
    )


def add_fit_args(parser: argparse.ArgumentParser):
    """Add proportional-hazards fitting options."""
    parser.add_argument(
        "--max-iter", default=argparse.SUPPRESS, help="Newton iterations (default: 100)"
    )
    parser.add_argument(
        "--tol",
        default=argparse.SUPPRESS,
        help="Score tolerance per event (default: 1e-8)",
    )


def setup_logging(args: argparse.Namespace):
    """Set up Python logging."""
    if args.debug:
        logging.basicConfig(level=logging.DEBUG, format=args.log_format)
    else:
        logging.basicConfig(level=logging.INFO, format=args.log_format)


# -----------------------------------------------------------------------------


def load_config_file(path: typing.Union[str, Path]) -> typing.Dict[str, str]:
    """Read ``key=value`` lines. Blank lines and ``#`` comments are skipped.

    Example
    -------

    A file containing::

        # Table I
        censoring_rates = 0.25, 0.5
        replicates=100

    gives ``{"censoring_rates": "0.25, 0.5", "replicates": "100"}``.
    """
    values: typing.Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as config_file:
        for line_number, line in enumerate(config_file, start=1):
            line = line.split("#", maxsplit=1)[0].strip()
            if not line:
                continue

            key, separator, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not separator or not key:
                raise ValueError(f"{path}:{line_number}: expected key=value")

            values[key] = value.strip()

    return values


def coerce_value(field_type: typing.Any, value: typing.Any) -> typing.Any:
    """Convert a string to a config field type.

    >>> coerce_value(typing.List[float], "0.25, 0.5")
    [0.25, 0.5]
    >>> coerce_value(typing.Optional[float], "none") is None
    True
    >>> coerce_value(bool, "yes")
    True
    """
    if not isinstance(value, str):
        return value

    origin = getattr(field_type, "__origin__", None)
    type_args = getattr(field_type, "__args__", ())

    if origin is typing.Union:
        if value.strip().lower() in _NONE:
            return None
        inner = [arg for arg in type_args if arg is not type(None)][0]
        return coerce_value(inner, value)

    if origin in (list, typing.List):
        return [
            coerce_value(type_args[0], item.strip())
            for item in value.split(",")
            if item.strip()
        ]

    text = value.strip()
    if field_type is bool:
        if text.lower() in _TRUE:
            return True
        if text.lower() in _FALSE:
            return False
        raise ValueError(f"Not a boolean: {value}")

    if field_type is int:
        return int(text)

    if field_type is float:
        return float(text)

    return text


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    values: typing.Dict[str, typing.Any] = {}

    if getattr(args, "config", None):
        file_values = load_config_file(args.config)
        unknown = set(file_values) - {f.name for f in dataclasses.fields(RunConfig)}
        if unknown:
            _LOGGER.warning("Ignoring unknown config key(s): %s", sorted(unknown))

        values.update(only_fields(RunConfig, file_values))

    values.update(only_fields(RunConfig, vars(args)))
    values["command"] = args.command

    hints = typing.get_type_hints(RunConfig)
    config = RunConfig(
        **{key: coerce_value(hints[key], value) for key, value in values.items()}
    )

    if config.format not in ("json", "text"):
        raise ValueError(f"Unknown format: {config.format}")
    if config.workers < 1:
        raise ValueError(f"At least 1 worker required, got {config.workers}")

    return config
