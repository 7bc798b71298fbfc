"""Variable importance by backward elimination.

Each round refits the model without each remaining covariate and drops the
one whose removal changes the metric least (smallest absolute change).
Covariates dropped last are the most important.
"""
import logging
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .base import Report
from .core import Dataset
from .errors import FitFailure, JointConcordanceError
from .metrics import MetricReport, evaluate
from .models import FitConfig
from .utils import format_table, rng_for

_LOGGER = logging.getLogger(__name__)

STEPWISE_CR = "stepwise_cr"
STEPWISE_LUMPED = "stepwise_lumped"
STANDARDIZED_COEF = "standardized_coef"

IN_SAMPLE = "in-sample"
K_FOLD = "k-fold"

# -----------------------------------------------------------------------------


@dataclass
class RankingEntry(Report):
    """One covariate's place in a ranking."""

    covariate: str
    round: int
    """Elimination round (1 = dropped first)."""
    rank: int
    """Importance rank (1 = most important)."""
    metric: typing.Optional[float] = None
    """Metric after removal (importance score for coefficient rankings)."""
    delta: typing.Optional[float] = None
    """Metric after removal minus metric before."""


@dataclass
class RankingResult(Report):
    """Covariates ordered by importance."""

    method: str
    horizon: float
    entries: typing.List[RankingEntry] = field(default_factory=list)
    """Entries in elimination order."""
    baseline_metric: typing.Optional[float] = None
    """Metric with every covariate included."""
    evaluation: str = IN_SAMPLE
    failures: typing.List[typing.Dict[str, typing.Any]] = field(default_factory=list)
    """Candidate refits that failed (round, covariate, error, message)."""

    def ranking(self) -> typing.List[str]:
        """Covariate names, most important first."""
        return [entry.covariate for entry in sorted(self.entries, key=lambda e: e.rank)]


# -----------------------------------------------------------------------------


class _SubsetEvaluator:
    """Refit and score a model on a subset of covariates."""

    def __init__(
        self,
        ds: Dataset,
        t: float,
        fit_config: FitConfig,
        select: typing.Callable[[MetricReport], typing.Optional[float]],
        evaluation: str,
        folds: int,
        seed: int,
    ):
        if evaluation not in (IN_SAMPLE, K_FOLD):
            raise ValueError(f"Unknown evaluation: {evaluation}")
        if evaluation == K_FOLD and folds < 2:
            raise ValueError(f"At least 2 folds required, got {folds}")

        self.ds = ds
        self.t = t
        self.fit_config = fit_config
        self.select = select
        self.evaluation = evaluation
        self.fold_indices = np.array_split(
            rng_for(seed).permutation(len(ds)), max(folds, 1)
        )

    def __call__(self, names: typing.Sequence[str]) -> float:
        subset = self.ds.select(names)
        if self.evaluation == IN_SAMPLE:
            return self._score(subset, subset)

        scores = []
        for test in self.fold_indices:
            train = np.setdiff1d(np.arange(len(subset)), test)
            scores.append(
                self._score(subset.subset(train), subset.subset(np.sort(test)))
            )

        return float(np.mean(scores))

    def _score(self, train: Dataset, test: Dataset) -> float:
        model = self.fit_config.fit(train)
        value = self.select(evaluate(test, model, self.t))
        if value is None:
            raise FitFailure("Metric is undefined for this subset")

        return value


def _backward_elimination(
    ds: Dataset,
    t: float,
    method: str,
    evaluator: _SubsetEvaluator,
    workers: int,
) -> RankingResult:
    names = list(ds.covariate_names)
    d = len(names)
    result = RankingResult(
        method=method, horizon=float(t), evaluation=evaluator.evaluation
    )

    if d == 1:
        _LOGGER.warning("Only one covariate; ranking is trivial")
        result.entries.append(RankingEntry(covariate=names[0], round=1, rank=1))
        return result

    remaining = list(names)
    try:
        baseline = evaluator(remaining)
    except JointConcordanceError as error:
        raise FitFailure(
            f"Full model failed: {error.message}", subset=remaining, error=error.name
        ) from error

    result.baseline_metric = baseline

    def candidate(name: str) -> typing.Tuple[typing.Optional[float], typing.Any]:
        try:
            return evaluator([other for other in remaining if other != name]), None
        except JointConcordanceError as error:
            return None, error

    for round_number in range(1, d):
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                outcomes = list(executor.map(candidate, remaining))
        else:
            outcomes = [candidate(name) for name in remaining]

        changes = []
        for position, (name, (value, error)) in enumerate(zip(remaining, outcomes)):
            if error is not None:
                result.failures.append(
                    {
                        "round": round_number,
                        "covariate": name,
                        "error": error.name,
                        "message": error.message,
                    }
                )
                changes.append((float("inf"), position))
            else:
                changes.append((abs(value - baseline), position))

        _, position = min(changes)
        dropped = remaining.pop(position)
        value = outcomes[position][0]
        if value is None:
            raise FitFailure(
                f"Every candidate failed in round {round_number}",
                round=round_number,
                subset=remaining + [dropped],
            )

        result.entries.append(
            RankingEntry(
                covariate=dropped,
                round=round_number,
                rank=d - round_number + 1,
                metric=value,
                delta=value - baseline,
            )
        )
        _LOGGER.debug(
            "Round %s: dropped %s (metric=%s, delta=%s)",
            round_number,
            dropped,
            value,
            value - baseline,
        )
        baseline = value

    result.entries.append(RankingEntry(covariate=remaining[0], round=d, rank=1))
    return result


def stepwise_cr_rank(
    ds: Dataset,
    t: float,
    fit_config: typing.Optional[FitConfig] = None,
    evaluation: str = IN_SAMPLE,
    folds: int = 5,
    seed: int = 0,
    workers: int = 1,
) -> RankingResult:
    """Backward elimination of cause-specific models under weighted JC(t)."""
    evaluator = _SubsetEvaluator(
        ds,
        t,
        fit_config or FitConfig(),
        lambda report: report.joint_concordance,
        evaluation,
        folds,
        seed,
    )
    return _backward_elimination(ds, t, STEPWISE_CR, evaluator, workers)


def stepwise_lumped_rank(
    ds: Dataset,
    t: float,
    fit_config: typing.Optional[FitConfig] = None,
    evaluation: str = IN_SAMPLE,
    folds: int = 5,
    seed: int = 0,
    workers: int = 1,
) -> RankingResult:
    """Backward elimination of a single model with all events lumped, under C(t, 1)."""
    lumped = ds.lumped()
    evaluator = _SubsetEvaluator(
        lumped,
        t,
        fit_config or FitConfig(),
        lambda report: report.concordance_per_event[0],
        evaluation,
        folds,
        seed,
    )
    return _backward_elimination(lumped, t, STEPWISE_LUMPED, evaluator, workers)


def standardized_coef_rank(
    ds: Dataset, t: float, fit_config: typing.Optional[FitConfig] = None
) -> RankingResult:
    """Rank covariates by |beta * sd| of a lumped proportional-hazards fit.

    Ties keep covariate order.
    """
    try:
        model = (fit_config or FitConfig()).fit(ds.lumped())
    except JointConcordanceError as error:
        raise FitFailure(
            f"Lumped model failed: {error.message}", error=error.name
        ) from error

    importance = np.abs(np.asarray(model.coefficients[0]) * ds.covariates.std(axis=0))
    order = np.argsort(-importance, kind="mergesort")
    d = len(order)

    entries = [
        RankingEntry(
            covariate=ds.covariate_names[index],
            round=d - rank + 1,
            rank=rank,
            metric=float(importance[index]),
        )
        for rank, index in enumerate(order, start=1)
    ]
    entries.sort(key=lambda entry: entry.round)

    return RankingResult(method=STANDARDIZED_COEF, horizon=float(t), entries=entries)


def rank_variables(
    ds: Dataset,
    t: float,
    method: str,
    fit_config: typing.Optional[FitConfig] = None,
    evaluation: str = IN_SAMPLE,
    folds: int = 5,
    seed: int = 0,
    workers: int = 1,
) -> RankingResult:
    """Run a ranking method by name."""
    if method == STEPWISE_CR:
        return stepwise_cr_rank(ds, t, fit_config, evaluation, folds, seed, workers)
    if method == STEPWISE_LUMPED:
        return stepwise_lumped_rank(ds, t, fit_config, evaluation, folds, seed, workers)
    if method == STANDARDIZED_COEF:
        return standardized_coef_rank(ds, t, fit_config)

    raise ValueError(f"Unknown ranking method: {method}")


def format_ranking_table(results: typing.Sequence[RankingResult]) -> str:
    """Side-by-side table of rankings, most important first.

    Example
    -------

    >>> result = RankingResult(
    ...     method="stepwise_cr",
    ...     horizon=1.0,
    ...     entries=[
    ...         RankingEntry(covariate="x2", round=1, rank=2),
    ...         RankingEntry(covariate="x1", round=2, rank=1),
    ...     ],
    ... )
    >>> print(format_ranking_table([result]))
    rank  stepwise_cr
    1     x1
    2     x2
    """
    rankings = [result.ranking() for result in results]
    size = max((len(ranking) for ranking in rankings), default=0)
    rows = [
        [rank + 1]
        + [ranking[rank] if rank < len(ranking) else None for ranking in rankings]
        for rank in range(size)
    ]
    return format_table(["rank"] + [result.method for result in results], rows)
