"""Concordance, accuracy and joint concordance for competing risks.

Uncensored estimators count ordered pairs directly. Weighted estimators
reweight each pair by inverse censoring survival:

* pairs with T_i < T_j get 1 / (G(T_i-) G(T_i)),
* pairs with T_i > T_j and D_j != d get 1 / (G(T_i-) G(T_j)).

Pairs are tallied in O(n sqrt(n)) by scanning time-ordered subjects against
per-block sorted scores.
"""
import collections
import logging
import math
import typing
from dataclasses import dataclass, field

import numpy as np

from .base import Report
from .censoring import CensoringModel, fit_km_censoring
from .core import CENSORED, Dataset, RiskModel
from .errors import (
    CensoredRecords,
    DimensionMismatch,
    JointConcordanceError,
    NoComparablePairs,
    NoSubjectsBeforeHorizon,
    ZeroCensoringSurvival,
)

_LOGGER = logging.getLogger(__name__)

_MIN_BLOCK = 64
_CHUNK_ELEMENTS = 1 << 21

MetricSelector = typing.Union[
    str, typing.Callable[["MetricReport"], typing.Optional[float]]
]

# -----------------------------------------------------------------------------


@dataclass
class Interval(Report):
    """Percentile bootstrap confidence interval."""

    lower: float = 0.0
    upper: float = 0.0
    level: float = 0.95
    replicates: int = 0
    """Resamples that produced a value."""
    skipped: int = 0
    """Resamples skipped because the metric failed."""
    errors: typing.Dict[str, int] = field(default_factory=dict)
    """Count of skipped resamples by error name."""


@dataclass
class PairCounts(Report):
    """Numerator and denominator tallies behind a report (weighted sums when IPCW)."""

    joint_numerator: float = 0.0
    joint_denominator: float = 0.0
    correct_type_denominator: float = 0.0
    """Comparable pairs whose first subject has a correctly predicted type."""
    concordance_numerators: typing.List[float] = field(default_factory=list)
    concordance_denominators: typing.List[float] = field(default_factory=list)
    accuracy_numerator: float = 0.0
    accuracy_denominator: float = 0.0


@dataclass
class MetricReport(Report):
    """All metrics of one model at one horizon.

    ``joint_concordance == conditional_concordance * accuracy_star`` up to
    rounding, since both factors share the comparable-pair denominator.
    """

    horizon: float
    concordance_per_event: typing.List[typing.Optional[float]]
    """C(t, k) for k = 1..K (null when event k has no comparable pairs)."""
    accuracy: typing.Optional[float]
    """A(t), conditioned on an observed event by t."""
    joint_concordance: float
    conditional_concordance: typing.Optional[float]
    """Concordance among comparable pairs with a correct type prediction."""
    accuracy_star: float
    """Fraction of comparable pairs with a correct type prediction."""
    pair_counts: PairCounts
    bootstrap_ci: typing.Optional[typing.Dict[str, Interval]] = None
    weighted: bool = False
    tie_credit: bool = False
    exclude_censored_comparators: bool = False
    standard_error: typing.Optional[typing.Dict[str, float]] = None

    def metric(self, name: str) -> typing.Optional[float]:
        """Look up a metric by name.

        Names are ``joint_concordance``, ``accuracy``, ``accuracy_star``,
        ``conditional_concordance`` and ``concordance_<k>``.
        """
        if name.startswith("concordance_"):
            event_type = int(name[len("concordance_") :])
            if not 1 <= event_type <= len(self.concordance_per_event):
                raise ValueError(f"No concordance for event type {event_type}")
            return self.concordance_per_event[event_type - 1]

        if name not in metric_names(0):
            raise ValueError(f"Unknown metric: {name}")

        return getattr(self, name)

    def values(self) -> typing.Dict[str, typing.Optional[float]]:
        """All named metrics."""
        return {
            name: self.metric(name)
            for name in metric_names(len(self.concordance_per_event))
        }


def metric_names(n_event_types: int) -> typing.List[str]:
    """Names accepted by :meth:`MetricReport.metric`.

    Example
    -------

    >>> metric_names(2)
    ['joint_concordance', 'conditional_concordance', 'accuracy_star', 'accuracy', 'concordance_1', 'concordance_2']
    """
    return [
        "joint_concordance",
        "conditional_concordance",
        "accuracy_star",
        "accuracy",
    ] + [f"concordance_{k}" for k in range(1, n_event_types + 1)]


@dataclass
class PairIndicators:
    """Pair indicators for ordered pair (i, j) and event type d."""

    a_ij: int
    """T_i < T_j"""
    b_ij: int
    """T_i > T_j and D_j != d"""
    n_i: int
    """T_i <= t and D_i = d"""
    c_ij: int
    """T_i < T_j or D_j != d"""
    q_ij: int
    """M(X_i, t, d) > M(X_j, t, d) and M_c(X_i, t) = d"""


def pair_indicators(
    ds: Dataset, model: RiskModel, t: float, i: int, j: int, d: int
) -> PairIndicators:
    """Indicators of one ordered pair, evaluated directly from the records."""
    time_i, time_j = ds.times[i], ds.times[j]
    event_i, event_j = ds.events[i], ds.events[j]
    x_i, x_j = ds.covariates[i], ds.covariates[j]

    return PairIndicators(
        a_ij=int(time_i < time_j),
        b_ij=int(time_i > time_j and event_j != d),
        n_i=int(time_i <= t and event_i == d),
        c_ij=int(time_i < time_j or event_j != d),
        q_ij=int(
            model.risk(x_i, t, d) > model.risk(x_j, t, d)
            and model.predict_type(x_i, t) == d
        ),
    )


# -----------------------------------------------------------------------------
# Pair tallies
# -----------------------------------------------------------------------------


class _PrefixSums:
    """Weighted counts of scores below a threshold within a prefix of a fixed order."""

    def __init__(self, scores: np.ndarray, weights: np.ndarray):
        self.scores = scores
        self.weights = weights
        self.size = len(scores)
        self.block = max(_MIN_BLOCK, int(math.sqrt(self.size)))
        self.sorted_blocks: typing.List[typing.Tuple[np.ndarray, np.ndarray]] = []

        for start in range(0, self.size, self.block):
            block_scores = scores[start : start + self.block]
            order = np.argsort(block_scores, kind="mergesort")
            cumulative = np.concatenate(
                ([0.0], np.cumsum(weights[start : start + self.block][order]))
            )
            self.sorted_blocks.append((block_scores[order], cumulative))

    def below(
        self, ends: np.ndarray, thresholds: np.ndarray, inclusive: bool = False
    ) -> np.ndarray:
        """Sum of weights at positions < end with score < threshold.

        With ``inclusive`` the comparison is <=.
        """
        side = "right" if inclusive else "left"
        totals = np.zeros(len(ends))
        whole_blocks = ends // self.block

        # Whole blocks by binary search
        for index, (sorted_scores, cumulative) in enumerate(self.sorted_blocks):
            selected = whole_blocks > index
            if not selected.any():
                break
            positions = np.searchsorted(sorted_scores, thresholds[selected], side=side)
            totals[selected] += cumulative[positions]

        # Remainder of the last block by direct comparison
        starts = whole_blocks * self.block
        partial = np.flatnonzero(ends > starts)
        offsets = np.arange(self.block)
        step = max(1, _CHUNK_ELEMENTS // self.block)
        for begin in range(0, len(partial), step):
            queries = partial[begin : begin + step]
            positions = starts[queries, None] + offsets[None, :]
            valid = positions < ends[queries, None]
            positions = np.minimum(positions, self.size - 1)
            values = self.scores[positions]
            limit = thresholds[queries, None]
            compare = (values <= limit) if inclusive else (values < limit)
            totals[queries] += np.where(
                valid & compare, self.weights[positions], 0.0
            ).sum(axis=1)

        return totals

    def total_below(
        self, thresholds: np.ndarray, inclusive: bool = False
    ) -> np.ndarray:
        """Sum of weights over all positions with score below threshold."""
        return self.below(np.full(len(thresholds), self.size), thresholds, inclusive)


@dataclass
class _Tallies:
    concordant: np.ndarray
    comparable: np.ndarray
    joint: float
    correct: float


def _scores(
    ds: Dataset, model: RiskModel, t: float
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Risk matrix (n, K) and predicted types (n,)."""
    risks = np.asarray(model.risk_matrix(ds.covariates, t), dtype=float)
    if risks.shape != (len(ds), ds.n_event_types):
        raise DimensionMismatch(
            f"Model produced risks of shape {risks.shape} "
            f"for {len(ds)} record(s) and {ds.n_event_types} event type(s)"
        )

    if type(model).predict_types is RiskModel.predict_types:
        predicted = np.argmax(risks, axis=1) + 1
    else:
        predicted = np.asarray(model.predict_types(ds.covariates, t), dtype=int)

    return risks, predicted


def _inverse(values: np.ndarray) -> np.ndarray:
    """1 / values, with 0 where values are 0."""
    return np.divide(1.0, values, out=np.zeros_like(values), where=values > 0)


def _censoring_weights(
    g: CensoringModel, times: np.ndarray
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """G(T-) and G(T) at each observed time."""
    return (
        np.asarray(g.survival_before(times), dtype=float),
        np.asarray(g.survival_at(times), dtype=float),
    )


def _pair_tallies(
    ds: Dataset,
    risks: np.ndarray,
    predicted: np.ndarray,
    t: float,
    g: typing.Optional[CensoringModel],
    tie_credit: bool,
    exclude_censored_comparators: bool,
) -> _Tallies:
    n = len(ds)
    order = np.argsort(ds.times, kind="mergesort")
    times = ds.times[order]
    events = ds.events[order]
    risks = risks[order]
    predicted = predicted[order]
    lower = np.searchsorted(times, times, side="left")
    upper = np.searchsorted(times, times, side="right")
    ones = np.ones(n)

    if g is None:
        before = at = ones
    else:
        before, at = _censoring_weights(g, times)

    inverse_before = _inverse(before)
    inverse_at = _inverse(at)

    concordant = np.zeros(ds.n_event_types)
    comparable = np.zeros(ds.n_event_types)
    joint = 0.0
    correct = 0.0

    for d in range(1, ds.n_event_types + 1):
        rows = np.flatnonzero((events == d) & (times <= t))
        if len(rows) == 0:
            continue

        scores = risks[:, d - 1]
        thresholds = scores[rows]

        eligible = events != d
        if exclude_censored_comparators:
            eligible &= events != CENSORED

        # Uncensored pairs with tied times and different types are comparable
        ends = upper[rows] if g is None else lower[rows]

        if g is not None:
            _check_weights(d, rows, upper, ends, eligible, before, at, n)

        first = inverse_before[rows] * inverse_at[rows]
        second = inverse_before[rows]
        comparator = np.where(eligible, inverse_at, 0.0)

        later = _PrefixSums(scores, ones)
        later_count = n - upper[rows]
        later_below = later.total_below(thresholds) - later.below(
            upper[rows], thresholds
        )

        earlier = _PrefixSums(scores, comparator)
        earlier_total = np.concatenate(([0.0], np.cumsum(comparator)))[ends]
        earlier_below = earlier.below(ends, thresholds)

        if tie_credit:
            later_at_most = later.total_below(thresholds, True) - later.below(
                upper[rows], thresholds, True
            )
            earlier_at_most = earlier.below(ends, thresholds, True)
            later_below = later_below + 0.5 * (later_at_most - later_below)
            earlier_below = earlier_below + 0.5 * (earlier_at_most - earlier_below)

        numerators = first * later_below + second * earlier_below
        denominators = first * later_count + second * earlier_total
        hits = predicted[rows] == d

        concordant[d - 1] = numerators.sum()
        comparable[d - 1] = denominators.sum()
        joint += numerators[hits].sum()
        correct += denominators[hits].sum()

    return _Tallies(
        concordant=concordant, comparable=comparable, joint=joint, correct=correct
    )


def _check_weights(
    d: int,
    rows: np.ndarray,
    upper: np.ndarray,
    ends: np.ndarray,
    eligible: np.ndarray,
    before: np.ndarray,
    at: np.ndarray,
    n: int,
):
    """Raise if a weight needed for event d divides by zero."""
    if (before[rows] <= 0).any():
        raise ZeroCensoringSurvival(
            f"G(T-) is zero for a type-{d} event before the horizon", event_type=d
        )

    has_later = upper[rows] < n
    if (at[rows][has_later] <= 0).any():
        raise ZeroCensoringSurvival(
            f"G(T) is zero for a type-{d} event with later comparators", event_type=d
        )

    needed = eligible[: ends.max()]
    if (at[: ends.max()][needed] <= 0).any():
        raise ZeroCensoringSurvival(
            f"G(T) is zero for a comparator of a type-{d} event", event_type=d
        )


def _accuracy_tallies(
    ds: Dataset, predicted: np.ndarray, t: float, g: typing.Optional[CensoringModel]
) -> typing.Tuple[float, float]:
    rows = (ds.events != CENSORED) & (ds.times <= t)
    if g is None:
        weights = rows.astype(float)
    else:
        before = np.asarray(g.survival_before(ds.times), dtype=float)
        if (before[rows] <= 0).any():
            raise ZeroCensoringSurvival("G(T-) is zero for an event before the horizon")
        weights = np.where(rows, _inverse(before), 0.0)

    hits = predicted == ds.events
    return float(weights[hits].sum()), float(weights.sum())


def _require_uncensored(ds: Dataset):
    if ds.has_censoring:
        raise CensoredRecords(
            "Uncensored estimator given censored records; use a weighted estimator",
            censored=int((ds.events == CENSORED).sum()),
        )


def _require_event_type(ds: Dataset, k: int):
    if not 1 <= k <= ds.n_event_types:
        raise ValueError(f"Event type must be in 1..{ds.n_event_types}, got {k}")


def _ratio(numerator: float, denominator: float) -> typing.Optional[float]:
    if denominator <= 0:
        return None

    return float(numerator / denominator)


def _build_report(
    ds: Dataset,
    model: RiskModel,
    t: float,
    g: typing.Optional[CensoringModel],
    tie_credit: bool,
    exclude_censored_comparators: bool,
) -> MetricReport:
    risks, predicted = _scores(ds, model, t)
    tallies = _pair_tallies(
        ds, risks, predicted, t, g, tie_credit, exclude_censored_comparators
    )
    accuracy_numerator, accuracy_denominator = _accuracy_tallies(ds, predicted, t, g)

    denominator = float(tallies.comparable.sum())
    if denominator <= 0:
        raise NoComparablePairs(f"No comparable pairs at horizon {t}", horizon=t)

    report = MetricReport(
        horizon=float(t),
        concordance_per_event=[
            _ratio(numerator, count)
            for numerator, count in zip(tallies.concordant, tallies.comparable)
        ],
        accuracy=_ratio(accuracy_numerator, accuracy_denominator),
        joint_concordance=float(tallies.joint / denominator),
        conditional_concordance=_ratio(tallies.joint, tallies.correct),
        accuracy_star=float(tallies.correct / denominator),
        pair_counts=PairCounts(
            joint_numerator=float(tallies.joint),
            joint_denominator=denominator,
            correct_type_denominator=float(tallies.correct),
            concordance_numerators=[float(value) for value in tallies.concordant],
            concordance_denominators=[float(value) for value in tallies.comparable],
            accuracy_numerator=accuracy_numerator,
            accuracy_denominator=accuracy_denominator,
        ),
        weighted=g is not None,
        tie_credit=tie_credit,
        exclude_censored_comparators=exclude_censored_comparators,
    )

    _LOGGER.debug(
        "JC(%s) = %s over %s comparable pair weight(s)",
        t,
        report.joint_concordance,
        denominator,
    )
    return report


# -----------------------------------------------------------------------------
# Uncensored estimators
# -----------------------------------------------------------------------------


def concordance(
    ds: Dataset, model: RiskModel, t: float, k: int, tie_credit: bool = False
) -> float:
    """Time-dependent concordance C(t, k) on uncensored data."""
    _require_uncensored(ds)
    _require_event_type(ds, k)
    risks, predicted = _scores(ds, model, t)
    tallies = _pair_tallies(ds, risks, predicted, t, None, tie_credit, False)

    value = _ratio(tallies.concordant[k - 1], tallies.comparable[k - 1])
    if value is None:
        raise NoComparablePairs(f"No comparable pairs for event type {k}", event_type=k)

    return value


def accuracy(ds: Dataset, model: RiskModel, t: float) -> float:
    """Type-prediction accuracy A(t) among subjects with an event by t."""
    _require_uncensored(ds)
    _, predicted = _scores(ds, model, t)
    value = _ratio(*_accuracy_tallies(ds, predicted, t, None))
    if value is None:
        raise NoSubjectsBeforeHorizon(f"No events by horizon {t}", horizon=t)

    return value


def joint_concordance(
    ds: Dataset, model: RiskModel, t: float, tie_credit: bool = False
) -> MetricReport:
    """Joint concordance JC(t) with its decomposition on uncensored data.

    Example
    -------

    >>> from jointconcordance.core import validate_dataset
    >>> from jointconcordance.models import ColumnScoreModel
    >>> ds = validate_dataset([
    ...     {"time": 1, "event": 1, "covariates": [0.9, 0.2]},
    ...     {"time": 2, "event": 2, "covariates": [0.1, 0.8]},
    ...     {"time": 3, "event": 1, "covariates": [0.05, 0.3]},
    ... ])
    >>> report = joint_concordance(ds, ColumnScoreModel(), 10.0)
    >>> report.pair_counts.joint_numerator, report.pair_counts.joint_denominator
    (4.0, 5.0)
    """
    _require_uncensored(ds)
    return _build_report(ds, model, t, None, tie_credit, False)


# -----------------------------------------------------------------------------
# Weighted (IPCW) estimators
# -----------------------------------------------------------------------------


def weighted_joint_concordance(
    ds: Dataset,
    model: RiskModel,
    g: CensoringModel,
    t: float,
    tie_credit: bool = False,
    exclude_censored_comparators: bool = False,
) -> MetricReport:
    """Inverse-probability-of-censoring weighted joint concordance."""
    return _build_report(ds, model, t, g, tie_credit, exclude_censored_comparators)


def weighted_concordance(
    ds: Dataset,
    model: RiskModel,
    g: CensoringModel,
    t: float,
    k: int,
    tie_credit: bool = False,
    exclude_censored_comparators: bool = False,
) -> float:
    """Inverse-probability-of-censoring weighted C(t, k)."""
    _require_event_type(ds, k)
    risks, predicted = _scores(ds, model, t)
    tallies = _pair_tallies(
        ds, risks, predicted, t, g, tie_credit, exclude_censored_comparators
    )

    value = _ratio(tallies.concordant[k - 1], tallies.comparable[k - 1])
    if value is None:
        raise NoComparablePairs(f"No comparable pairs for event type {k}", event_type=k)

    return value


def weighted_accuracy(
    ds: Dataset, model: RiskModel, g: CensoringModel, t: float
) -> float:
    """Accuracy weighted by 1 / G(T_i-)."""
    _, predicted = _scores(ds, model, t)
    value = _ratio(*_accuracy_tallies(ds, predicted, t, g))
    if value is None:
        raise NoSubjectsBeforeHorizon(f"No events by horizon {t}", horizon=t)

    return value


def evaluate(
    ds: Dataset,
    model: RiskModel,
    t: float,
    tie_credit: bool = False,
    exclude_censored_comparators: bool = False,
) -> MetricReport:
    """Weighted report with a Kaplan-Meier censoring model fit on ``ds``."""
    return weighted_joint_concordance(
        ds,
        model,
        fit_km_censoring(ds),
        t,
        tie_credit=tie_credit,
        exclude_censored_comparators=exclude_censored_comparators,
    )


# -----------------------------------------------------------------------------
# Bootstrap
# -----------------------------------------------------------------------------


def bootstrap_ci(
    ds: Dataset,
    model: RiskModel,
    t: float,
    metric: MetricSelector = "joint_concordance",
    replicates: int = 200,
    level: float = 0.95,
    seed: int = 0,
    weighted: bool = True,
    tie_credit: bool = False,
    exclude_censored_comparators: bool = False,
) -> Interval:
    """Percentile bootstrap interval over resampled subjects.

    The censoring model is refit on every resample. Resamples whose metric
    fails (for example with :class:`NoComparablePairs`) are skipped and
    counted by error name.
    """
    if replicates < 100:
        raise ValueError(
            f"At least 100 bootstrap replicates required, got {replicates}"
        )
    if not 0 < level < 1:
        raise ValueError(f"Level must be in (0, 1), got {level}")

    select = metric if callable(metric) else (lambda report: report.metric(metric))
    rng = np.random.default_rng(seed)
    values: typing.List[float] = []
    errors: typing.Dict[str, int] = collections.Counter()

    for _ in range(replicates):
        indices = rng.integers(0, len(ds), size=len(ds))
        try:
            sample = ds.subset(indices)
            if weighted:
                report = evaluate(
                    sample,
                    model,
                    t,
                    tie_credit=tie_credit,
                    exclude_censored_comparators=exclude_censored_comparators,
                )
            else:
                report = joint_concordance(sample, model, t, tie_credit=tie_credit)
            value = select(report)
        except JointConcordanceError as error:
            errors[error.name] += 1
            continue

        if value is None:
            errors["UndefinedMetric"] += 1
            continue

        values.append(value)

    skipped = sum(errors.values())
    if skipped:
        _LOGGER.warning("Skipped %s of %s bootstrap resample(s)", skipped, replicates)

    if not values:
        raise NoComparablePairs("Every bootstrap resample failed", errors=dict(errors))

    lower, upper = np.quantile(values, [(1 - level) / 2, (1 + level) / 2])
    return Interval(
        lower=float(lower),
        upper=float(upper),
        level=level,
        replicates=len(values),
        skipped=skipped,
        errors=dict(errors),
    )


def with_bootstrap(
    report: MetricReport,
    ds: Dataset,
    model: RiskModel,
    replicates: int = 200,
    level: float = 0.95,
    seed: int = 0,
    metrics: typing.Optional[typing.Sequence[str]] = None,
) -> MetricReport:
    """Attach bootstrap intervals for each metric to a report."""
    names = metrics or [
        name for name, value in report.values().items() if value is not None
    ]
    report.bootstrap_ci = {
        name: bootstrap_ci(
            ds,
            model,
            report.horizon,
            metric=name,
            replicates=replicates,
            level=level,
            seed=seed,
            weighted=report.weighted,
            tie_credit=report.tie_credit,
            exclude_censored_comparators=report.exclude_censored_comparators,
        )
        for name in names
    }
    return report
