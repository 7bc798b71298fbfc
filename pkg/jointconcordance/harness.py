"""Commands behind the command-line interface and their report types.

Every command takes a resolved :class:`RunConfig` and returns a
:class:`~jointconcordance.base.Report`. Randomness flows from
``RunConfig.seed`` through :func:`~jointconcordance.utils.derive_seed`,
keyed by task and index, so results do not depend on worker count.
"""
import logging
import math
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .base import Report
from .core import Dataset, RiskModel, evaluation_horizon, read_dataset, write_dataset
from .errors import JointConcordanceError
from .metrics import MetricReport, evaluate, joint_concordance, with_bootstrap
from .models import CauseSpecificPH, ExpModel, FitConfig
from .synth import SynthConfig, calibrate_censoring_rate, generate, true_metrics_mc
from .utils import derive_seed, format_table
from .varimp import (
    STEPWISE_CR,
    STEPWISE_LUMPED,
    RankingResult,
    format_ranking_table,
    rank_variables,
)

_LOGGER = logging.getLogger(__name__)

EXP_MODEL = "exp"
CSC_MODEL = "csc"
MODEL_CHOICES = [EXP_MODEL, CSC_MODEL]

# Seed derivation keys
COHORT_TASK = 1
TRAIN_TASK = 2
REPLICATE_TASK = 3
BOOTSTRAP_TASK = 4
RANKING_TASK = 5
SIMULATE_TASK = 6

# -----------------------------------------------------------------------------


@dataclass
class RunConfig(Report):
    """Resolved parameters of one command run."""

    command: str = ""
    dataset: typing.Optional[str] = None
    """CSV dataset path."""
    output: typing.Optional[str] = None
    """Output path (CSV for ``simulate``, report otherwise)."""
    format: str = "json"
    """Report format: json or text."""
    model: str = EXP_MODEL
    model_path: typing.Optional[str] = None
    """Fitted model JSON to evaluate instead of ``model``."""
    quantile: float = 0.75
    horizon: typing.Optional[float] = None
    """Evaluation time (overrides ``quantile``)."""
    seed: int = 0
    n: int = 1000
    censoring_rate: float = 0.0
    """Target censored fraction for ``simulate`` (0 for none)."""
    n_large: int = 100_000
    n_train: int = 5000
    replicates: int = 100
    models: typing.List[str] = field(default_factory=lambda: [EXP_MODEL, CSC_MODEL])
    censoring_rates: typing.List[float] = field(default_factory=lambda: [0.5])
    sizes: typing.List[int] = field(default_factory=lambda: [1000])
    beta0: float = 0.0
    bootstrap: int = 0
    """Bootstrap replicates (0 disables intervals)."""
    level: float = 0.95
    methods: typing.List[str] = field(
        default_factory=lambda: [STEPWISE_CR, STEPWISE_LUMPED]
    )
    evaluation: str = "in-sample"
    folds: int = 5
    workers: int = 1
    tie_credit: bool = False
    exclude_censored_comparators: bool = False
    max_iter: int = 100
    tol: float = 1e-8

    def fit_config(self) -> FitConfig:
        """Settings for proportional-hazards fits."""
        return FitConfig(max_iter=self.max_iter, tol=self.tol, workers=self.workers)


@dataclass
class EfficiencyRow(Report):
    """Replicate statistics of the weighted estimator for one configuration."""

    model: str
    censoring_rate: float
    n: int
    beta0: float
    true_jc: float
    mean: typing.Optional[float] = None
    rmse: typing.Optional[float] = None
    se: typing.Optional[float] = None
    """Standard deviation of estimates (population normalization)."""
    bias: typing.Optional[float] = None
    median_abs_error: typing.Optional[float] = None
    replicates: int = 0
    """Successful replicates."""
    failures: typing.Dict[str, int] = field(default_factory=dict)


@dataclass
class EfficiencyReport(Report):
    """Estimator efficiency study.

    RMSE, SE and bias share the 1/R normalization, so that
    ``rmse ** 2 == se ** 2 + bias ** 2`` up to rounding.
    """

    horizon: float
    rows: typing.List[EfficiencyRow] = field(default_factory=list)


@dataclass
class ComparisonRow(Report):
    """Metrics of one model on the large cohort."""

    model: str
    concordance_per_event: typing.List[typing.Optional[float]]
    accuracy: typing.Optional[float]
    joint_concordance: float
    conditional_concordance: typing.Optional[float]
    accuracy_star: float


@dataclass
class ComparisonTable(Report):
    """Model comparison on a large uncensored cohort."""

    horizon: float
    n: int
    rows: typing.List[ComparisonRow] = field(default_factory=list)


@dataclass
class RankingComparison(Report):
    """Rankings of one dataset by one or more methods."""

    horizon: float
    results: typing.List[RankingResult] = field(default_factory=list)


@dataclass
class RunOutput(Report):
    """Command output: resolved config and result."""

    command: str
    config: RunConfig
    result_type: str
    result: typing.Dict[str, typing.Any]


@dataclass
class ErrorReport(Report):
    """Machine-readable error."""

    error: str
    message: str
    details: typing.Dict[str, typing.Any] = field(default_factory=dict)
    exit_code: int = 1

    @classmethod
    def from_error(cls, error: JointConcordanceError) -> "ErrorReport":
        """Report for a library error."""
        return cls(
            error=error.name,
            message=error.message,
            details={key: _plain(value) for key, value in error.details.items()},
            exit_code=error.exit_code,
        )


def _plain(value: typing.Any) -> typing.Any:
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.generic):
        return value.item()

    return value


# -----------------------------------------------------------------------------


def efficiency_row(
    estimates: typing.Sequence[float],
    true_jc: float,
    model: str,
    censoring_rate: float,
    n: int,
    beta0: float = 0.0,
    failures: typing.Optional[typing.Dict[str, int]] = None,
) -> EfficiencyRow:
    """Mean, RMSE, SE and bias of replicate estimates around the true value.

    Example
    -------

    >>> row = efficiency_row([0.5, 0.7], 0.5, "exp", 0.5, 100)
    >>> round(row.bias, 6), round(row.se, 6), round(row.rmse ** 2, 6)
    (0.1, 0.1, 0.02)
    """
    row = EfficiencyRow(
        model=model,
        censoring_rate=censoring_rate,
        n=n,
        beta0=beta0,
        true_jc=true_jc,
        replicates=len(estimates),
        failures=dict(failures or {}),
    )
    if not estimates:
        return row

    values = np.asarray(estimates, dtype=float)
    errors = values - true_jc
    row.mean = float(values.mean())
    row.bias = float(row.mean - true_jc)
    row.se = float(values.std(ddof=0))
    row.rmse = float(math.sqrt(np.mean(errors ** 2)))
    row.median_abs_error = float(np.median(np.abs(errors)))
    return row


def _horizon(config: RunConfig, ds: Dataset) -> float:
    if config.horizon is not None:
        return config.horizon

    return evaluation_horizon(ds, config.quantile)


def _require_dataset(config: RunConfig) -> Dataset:
    if not config.dataset:
        raise ValueError(f"No dataset given for {config.command}")

    return read_dataset(config.dataset)


def load_model(config: RunConfig, ds: Dataset) -> RiskModel:
    """Closed-form model, saved model, or a model fit on ``ds``."""
    if config.model_path:
        return CauseSpecificPH.from_file(config.model_path)
    if config.model == EXP_MODEL:
        return ExpModel()
    if config.model == CSC_MODEL:
        return config.fit_config().fit(ds)

    raise ValueError(f"Unknown model: {config.model}")


def _score(
    config: RunConfig, ds: Dataset, model: RiskModel, t: float
) -> MetricReport:
    """Uncensored estimator without censoring, weighted estimator otherwise."""
    if ds.has_censoring:
        return evaluate(
            ds,
            model,
            t,
            tie_credit=config.tie_credit,
            exclude_censored_comparators=config.exclude_censored_comparators,
        )

    return joint_concordance(ds, model, t, tie_credit=config.tie_credit)


# -----------------------------------------------------------------------------
# Commands
# -----------------------------------------------------------------------------


def cmd_evaluate(config: RunConfig) -> MetricReport:
    """Evaluate a model on a CSV dataset."""
    ds = _require_dataset(config)
    model = load_model(config, ds)
    t = _horizon(config, ds)
    report = _score(config, ds, model, t)

    if config.bootstrap > 0:
        report = with_bootstrap(
            report,
            ds,
            model,
            replicates=config.bootstrap,
            level=config.level,
            seed=derive_seed(config.seed, BOOTSTRAP_TASK),
        )

    return report


def cmd_fit(config: RunConfig) -> CauseSpecificPH:
    """Fit a cause-specific model on a CSV dataset."""
    ds = _require_dataset(config)
    return config.fit_config().fit(ds)


def cmd_simulate(config: RunConfig) -> SynthConfig:
    """Write a synthetic cohort to ``config.output`` as CSV."""
    if not config.output:
        raise ValueError("simulate needs an output path")

    base = SynthConfig(beta0=config.beta0)
    rate0 = (
        calibrate_censoring_rate(config.censoring_rate, base)
        if config.censoring_rate > 0
        else 0.0
    )
    synth_config = SynthConfig(
        beta0=config.beta0,
        rate0=rate0,
        n=config.n,
        seed=derive_seed(config.seed, SIMULATE_TASK),
    )
    write_dataset(generate(synth_config), config.output)
    _LOGGER.info("Wrote %s record(s) to %s", config.n, config.output)
    return synth_config


def _large_cohort(config: RunConfig) -> Dataset:
    return generate(
        SynthConfig(
            rate0=0.0, n=config.n_large, seed=derive_seed(config.seed, COHORT_TASK)
        )
    )


def _study_model(config: RunConfig, name: str) -> RiskModel:
    """Model evaluated on the large cohort (CSC is fit on a training cohort)."""
    if name == EXP_MODEL:
        return ExpModel()
    if name == CSC_MODEL:
        train = generate(
            SynthConfig(
                rate0=0.0, n=config.n_train, seed=derive_seed(config.seed, TRAIN_TASK)
            )
        )
        return config.fit_config().fit(train)

    raise ValueError(f"Unknown model: {name}")


def cmd_simulate_table2(config: RunConfig) -> ComparisonTable:
    """Compare models on a large uncensored cohort."""
    cohort = _large_cohort(config)
    t = _horizon(config, cohort)
    table = ComparisonTable(horizon=t, n=len(cohort))

    for name in config.models:
        report = joint_concordance(cohort, _study_model(config, name), t)
        table.rows.append(
            ComparisonRow(
                model=name,
                concordance_per_event=report.concordance_per_event,
                accuracy=report.accuracy,
                joint_concordance=report.joint_concordance,
                conditional_concordance=report.conditional_concordance,
                accuracy_star=report.accuracy_star,
            )
        )
        _LOGGER.info("%s: JC=%s", name, report.joint_concordance)

    return table


def cmd_simulate_table1(config: RunConfig) -> EfficiencyReport:
    """Replicate study of the weighted estimator against the large-cohort truth.

    The same replicate datasets are used for every model. CSC is refit on
    each replicate; its true value is that of a CSC fit on an independent
    training cohort.
    """
    if config.replicates < 2:
        raise ValueError(f"At least 2 replicates required, got {config.replicates}")

    cohort = _large_cohort(config)
    t = _horizon(config, cohort)
    truths = {
        name: true_metrics_mc(
            _study_model(config, name), horizon=t, cohort=cohort
        ).joint_concordance
        for name in config.models
    }
    report = EfficiencyReport(horizon=t)

    for rate_index, rate in enumerate(config.censoring_rates):
        base = SynthConfig(beta0=config.beta0)
        rate0 = calibrate_censoring_rate(rate, base) if rate > 0 else 0.0

        for size_index, size in enumerate(config.sizes):

            def replicate(
                index: int, key=(rate_index, size_index), size=size, rate0=rate0
            ):
                try:
                    ds = generate(
                        SynthConfig(
                            beta0=config.beta0,
                            rate0=rate0,
                            n=size,
                            seed=derive_seed(config.seed, REPLICATE_TASK, *key, index),
                        )
                    )
                except JointConcordanceError as error:
                    return {name: error.name for name in config.models}

                return {
                    name: _replicate_estimate(config, ds, name, t)
                    for name in config.models
                }

            indices = list(range(config.replicates))
            if config.workers > 1:
                with ThreadPoolExecutor(max_workers=config.workers) as executor:
                    outcomes = list(executor.map(replicate, indices))
            else:
                outcomes = [replicate(index) for index in indices]

            for name in config.models:
                estimates = [outcome[name] for outcome in outcomes]
                values = [value for value in estimates if isinstance(value, float)]
                failures: typing.Dict[str, int] = {}
                for value in estimates:
                    if isinstance(value, str):
                        failures[value] = failures.get(value, 0) + 1

                if failures:
                    _LOGGER.warning(
                        "%s at rate %s, n=%s: %s failed replicate(s)",
                        name,
                        rate,
                        size,
                        sum(failures.values()),
                    )

                row = efficiency_row(
                    values, truths[name], name, rate, size, config.beta0, failures
                )
                report.rows.append(row)
                _LOGGER.info(
                    "%s rate=%s n=%s: mean=%s rmse=%s",
                    name,
                    rate,
                    size,
                    row.mean,
                    row.rmse,
                )

    return report


def _replicate_estimate(
    config: RunConfig, ds: Dataset, name: str, t: float
) -> typing.Union[float, str]:
    """Weighted JC of one replicate, or the error name if it failed."""
    try:
        model = ExpModel() if name == EXP_MODEL else config.fit_config().fit(ds)
        return evaluate(
            ds,
            model,
            t,
            tie_credit=config.tie_credit,
            exclude_censored_comparators=config.exclude_censored_comparators,
        ).joint_concordance
    except JointConcordanceError as error:
        _LOGGER.debug("Replicate failed: %s", error)
        return error.name


def cmd_rank_variables(config: RunConfig) -> RankingComparison:
    """Rank covariates of a CSV dataset by each requested method."""
    ds = _require_dataset(config)
    t = _horizon(config, ds)
    comparison = RankingComparison(horizon=t)
    for method in config.methods:
        comparison.results.append(
            rank_variables(
                ds,
                t,
                method,
                fit_config=config.fit_config(),
                evaluation=config.evaluation,
                folds=config.folds,
                seed=derive_seed(config.seed, RANKING_TASK),
                workers=config.workers,
            )
        )

    return comparison


COMMANDS: typing.Dict[str, typing.Callable[[RunConfig], Report]] = {
    "evaluate": cmd_evaluate,
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "simulate-table1": cmd_simulate_table1,
    "simulate-table2": cmd_simulate_table2,
    "rank-variables": cmd_rank_variables,
}

# -----------------------------------------------------------------------------
# Output
# -----------------------------------------------------------------------------


def run_output(config: RunConfig, result: Report) -> RunOutput:
    """Wrap a result with the config that produced it."""
    return RunOutput(
        command=config.command,
        config=config,
        result_type=result.report_type(),
        result=result.to_dict(encode_json=False),
    )


def format_text(result: Report) -> str:
    """Aligned text rendering of a command result."""
    if isinstance(result, MetricReport):
        rows = []
        for name, value in result.values().items():
            interval = (result.bootstrap_ci or {}).get(name)
            rows.append(
                [
                    name,
                    value,
                    interval.lower if interval else None,
                    interval.upper if interval else None,
                ]
            )
        return format_table(["metric", "value", "lower", "upper"], rows)

    if isinstance(result, ComparisonTable):
        k = max((len(row.concordance_per_event) for row in result.rows), default=0)
        return format_table(
            ["model"]
            + [f"C{index}" for index in range(1, k + 1)]
            + ["A", "JC", "CC", "A*"],
            [
                [row.model]
                + list(row.concordance_per_event)
                + [
                    row.accuracy,
                    row.joint_concordance,
                    row.conditional_concordance,
                    row.accuracy_star,
                ]
                for row in result.rows
            ],
        )

    if isinstance(result, EfficiencyReport):
        return format_table(
            ["model", "censoring", "n", "true", "mean", "rmse", "se", "bias", "R"],
            [
                [
                    row.model,
                    row.censoring_rate,
                    row.n,
                    row.true_jc,
                    row.mean,
                    row.rmse,
                    row.se,
                    row.bias,
                    row.replicates,
                ]
                for row in result.rows
            ],
        )

    if isinstance(result, RankingComparison):
        return format_ranking_table(result.results)

    return format_table(
        ["field", "value"], [[key, value] for key, value in result.to_dict().items()]
    )
