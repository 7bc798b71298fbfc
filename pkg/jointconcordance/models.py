"""Built-in risk models.

* :class:`ExpModel` has fixed closed-form scores for a scalar covariate.
* :class:`ColumnScoreModel` and its subclasses read scores straight from
  covariate columns (uniform-score witnesses of non-expressibility).
* :class:`CauseSpecificPH` is a cause-specific proportional-hazards
  regression whose risk is the predicted cumulative incidence.
"""
import logging
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .base import Report
from .core import Dataset, EventLabel, RiskModel, require_dimension
from .errors import (
    InsufficientEvents,
    MonotoneLikelihoodDivergence,
    NonConvergence,
)

_LOGGER = logging.getLogger(__name__)

_CHUNK_ELEMENTS = 1 << 21

# -----------------------------------------------------------------------------
# Closed-form models
# -----------------------------------------------------------------------------


class ExpModel(RiskModel):
    """M(x, t, 1) = exp(x) and M(x, t, 2) = 2 exp(-|x|), independent of t."""

    n_event_types = 2

    def risk_matrix(self, covariates: np.ndarray, t: float) -> np.ndarray:
        covariates = np.asarray(covariates, dtype=float)
        require_dimension(covariates, 1, "EXP model")
        x = covariates[:, 0]
        return np.column_stack((np.exp(x), 2.0 * np.exp(-np.abs(x))))


def exp_model_risks(x: typing.Any, t: float, d: int) -> float:
    """EXP model risk of a scalar covariate.

    Example
    -------

    >>> exp_model_risks(0.0, 1.0, 1), exp_model_risks(0.0, 1.0, 2)
    (1.0, 2.0)
    """
    return ExpModel().risk(np.atleast_1d(x), t, d)


def exp_model_type(x: typing.Any, t: float) -> EventLabel:
    """EXP model predicted event type (argmax of the two risks).

    Example
    -------

    >>> exp_model_type(0.0, 1.0), exp_model_type(float(np.log(4.0)), 1.0)
    (2, 1)
    """
    return ExpModel().predict_type(np.atleast_1d(x), t)


class ColumnScoreModel(RiskModel):
    """Risk for event type k is covariate column ``columns[k - 1]``."""

    def __init__(
        self,
        columns: typing.Optional[typing.Sequence[int]] = None,
        n_event_types: int = 2,
    ):
        if columns is None:
            columns = range(n_event_types)
        self.columns = list(columns)
        self.n_event_types = len(self.columns)

    def risk_matrix(self, covariates: np.ndarray, t: float) -> np.ndarray:
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim != 2 or covariates.shape[1] <= max(self.columns):
            require_dimension(covariates, max(self.columns) + 1, "Score model")

        return covariates[:, self.columns]


class IndependentScoreModel(ColumnScoreModel):
    """Independent uniform score per event type (one covariate column each)."""


class AntitheticScoreModel(RiskModel):
    """Event 1 risk is a uniform score U; event 2 risk is 1 - U."""

    n_event_types = 2

    def __init__(self, column: int = 0):
        self.column = column

    def risk_matrix(self, covariates: np.ndarray, t: float) -> np.ndarray:
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim != 2 or covariates.shape[1] <= self.column:
            require_dimension(covariates, self.column + 1, "Antithetic score model")

        scores = covariates[:, self.column]
        return np.column_stack((scores, 1.0 - scores))


# -----------------------------------------------------------------------------
# Cause-specific proportional hazards
# -----------------------------------------------------------------------------


@dataclass
class FitConfig(Report):
    """Settings for :func:`fit_cause_specific`."""

    max_iter: int = 100
    tol: float = 1e-8
    """Score max-norm per event, or Newton decrement, at which fitting stops."""
    max_linear_predictor: float = 30.0
    """Largest allowed |beta' (x - mean)| on training data."""
    workers: int = 1
    """Event types fit concurrently when > 1."""

    def fit(self, ds: Dataset) -> "CauseSpecificPH":
        """Fit a cause-specific model with these settings."""
        return fit_cause_specific(
            ds,
            max_iter=self.max_iter,
            tol=self.tol,
            max_linear_predictor=self.max_linear_predictor,
            workers=self.workers,
        )


@dataclass
class CauseSpecificPH(Report, RiskModel):
    """Fitted cause-specific proportional-hazards model.

    Risk for event k is the cumulative incidence

        F_k(t | x) = sum_{s <= t} S(s- | x) exp(beta_k' (x - mean)) dL_k(s)

    with S the all-cause survival built from every cause-specific hazard.
    When the summed hazard increments at a time exceed 1 they are scaled to
    sum to 1, so that sum_k F_k <= 1.
    """

    coefficients: typing.List[typing.List[float]] = field(default_factory=list)
    """beta_k per event type (K x d)."""
    means: typing.List[float] = field(default_factory=list)
    """Training covariate means used for centering."""
    baseline_times: typing.List[typing.List[float]] = field(default_factory=list)
    """Distinct event times of type k."""
    baseline_hazard: typing.List[typing.List[float]] = field(default_factory=list)
    """Breslow cumulative baseline hazard of type k at ``baseline_times[k]``."""
    covariate_names: typing.List[str] = field(default_factory=list)
    n_event_types: int = 2
    log_likelihood: typing.List[float] = field(default_factory=list)
    """Maximized log partial likelihood per event type."""
    iterations: typing.List[int] = field(default_factory=list)

    def __post_init__(self):
        self._beta = np.asarray(self.coefficients, dtype=float).reshape(
            self.n_event_types, len(self.means)
        )
        self._means = np.asarray(self.means, dtype=float)

        # Union of event times with per-type hazard increments
        all_times = [np.asarray(times, dtype=float) for times in self.baseline_times]
        self._grid = (
            np.unique(np.concatenate(all_times)) if all_times else np.zeros(0)
        )
        self._increments = np.zeros((len(self._grid), self.n_event_types))
        for k, (times, cumulative) in enumerate(zip(all_times, self.baseline_hazard)):
            steps = np.diff(np.concatenate(([0.0], cumulative)))
            self._increments[np.searchsorted(self._grid, times), k] = steps

    @property
    def dimension(self) -> int:
        """Number of covariates d."""
        return len(self.means)

    def linear_predictors(self, covariates: np.ndarray) -> np.ndarray:
        """beta_k' (x - mean) of shape (n, K)."""
        covariates = np.asarray(covariates, dtype=float)
        require_dimension(covariates, self.dimension, "CSC model")
        return (covariates - self._means) @ self._beta.T

    def cumulative_hazard(self, k: int, t: float) -> float:
        """Breslow baseline cumulative hazard of event k at t."""
        position = np.searchsorted(self.baseline_times[k - 1], t, side="right")
        if position == 0:
            return 0.0

        return float(self.baseline_hazard[k - 1][position - 1])

    def risk_matrix(self, covariates: np.ndarray, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError(f"Time must be nonnegative, got {t}")

        predictors = self.linear_predictors(covariates)
        n = len(predictors)
        steps = int(np.searchsorted(self._grid, t, side="right"))
        risks = np.zeros((n, self.n_event_types))
        if steps == 0:
            return risks

        increments = self._increments[:steps]
        chunk = max(1, _CHUNK_ELEMENTS // steps)
        for begin in range(0, n, chunk):
            scores = np.exp(predictors[begin : begin + chunk])
            total = scores @ increments.T
            scale = np.where(total > 1.0, 1.0 / np.where(total > 1.0, total, 1.0), 1.0)
            survival = np.cumprod(1.0 - total * scale, axis=1)
            survival_before = np.concatenate(
                (np.ones((len(scores), 1)), survival[:, :-1]), axis=1
            )
            risks[begin : begin + chunk] = scores * (
                (survival_before * scale) @ increments
            )

        return risks


def csc_risk(m: CauseSpecificPH, x: typing.Sequence[float], t: float, k: int) -> float:
    """Predicted cumulative incidence F_k(t | x)."""
    if t < 0:
        raise ValueError(f"Time must be nonnegative, got {t}")

    return m.risk(x, t, k)


# -----------------------------------------------------------------------------


class _LikelihoodTerms(typing.NamedTuple):
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def _risk_set_sums(sorted_times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Sum of values over {j : T_j >= T_i} for each i (times sorted ascending)."""
    suffix = np.cumsum(values[::-1], axis=0)[::-1]
    return suffix[np.searchsorted(sorted_times, sorted_times, side="left")]


def _likelihood_terms(
    covariates: np.ndarray, times: np.ndarray, is_event: np.ndarray, beta: np.ndarray
) -> _LikelihoodTerms:
    """Breslow log partial likelihood with score and Hessian (times sorted)."""
    predictors = covariates @ beta
    shift = predictors.max()
    scores = np.exp(predictors - shift)

    s0 = _risk_set_sums(times, scores)
    s1 = _risk_set_sums(times, scores[:, None] * covariates)
    s2 = _risk_set_sums(
        times, scores[:, None, None] * covariates[:, :, None] * covariates[:, None, :]
    )

    s0 = s0[is_event]
    mean = s1[is_event] / s0[:, None]
    value = float(np.sum(predictors[is_event] - shift - np.log(s0)))
    gradient = np.sum(covariates[is_event] - mean, axis=0)
    hessian = -np.sum(
        s2[is_event] / s0[:, None, None] - mean[:, :, None] * mean[:, None, :], axis=0
    )

    return _LikelihoodTerms(value=value, gradient=gradient, hessian=hessian)


def _sorted_arrays(
    ds: Dataset, event_type: int
) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    order = np.argsort(ds.times, kind="mergesort")
    return ds.covariates[order], ds.times[order], ds.events[order] == event_type


def partial_log_likelihood(ds: Dataset, beta: typing.Any, event_type: int) -> float:
    """Breslow log partial likelihood of event type ``event_type`` at ``beta``.

    Other event types and censoring are treated as censored.
    """
    covariates, times, is_event = _sorted_arrays(ds, event_type)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    return _likelihood_terms(covariates, times, is_event, beta).value


def partial_likelihood_gradient(
    ds: Dataset, beta: typing.Any, event_type: int
) -> np.ndarray:
    """Score vector of :func:`partial_log_likelihood`."""
    covariates, times, is_event = _sorted_arrays(ds, event_type)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    return _likelihood_terms(covariates, times, is_event, beta).gradient


class _EventFit(typing.NamedTuple):
    beta: np.ndarray
    log_likelihood: float
    iterations: int
    baseline_times: np.ndarray
    baseline_hazard: np.ndarray


def _score_norm(terms: _LikelihoodTerms) -> float:
    return float(np.max(np.abs(terms.gradient), initial=0.0))


def _fit_event(
    centered: np.ndarray,
    times: np.ndarray,
    events: np.ndarray,
    event_type: int,
    max_iter: int,
    tol: float,
    max_linear_predictor: float,
) -> _EventFit:
    """Damped Newton maximization of one cause-specific partial likelihood.

    Stops when the score max-norm falls below ``tol`` per event, or after a
    step whose Newton decrement is below ``tol``.
    """
    is_event = events == event_type
    scale = max(1.0, float(is_event.sum()))
    beta = np.zeros(centered.shape[1])
    terms = _likelihood_terms(centered, times, is_event, beta)
    iterations = 0

    while _score_norm(terms) >= tol * scale:
        if iterations >= max_iter:
            raise NonConvergence(
                f"Event type {event_type} did not converge in {max_iter} iteration(s)",
                event_type=event_type,
                gradient=_score_norm(terms),
            )

        iterations += 1
        step = np.linalg.lstsq(-terms.hessian, terms.gradient, rcond=None)[0]
        decrement = float(terms.gradient @ step) / 2

        # Halve until the likelihood increases
        for _ in range(60):
            candidate = beta + step
            candidate_terms = _likelihood_terms(centered, times, is_event, candidate)
            if candidate_terms.value > terms.value:
                break
            step = step / 2
        else:
            if decrement < tol or _score_norm(terms) < np.sqrt(tol) * scale:
                # Likelihood flat to rounding
                _LOGGER.debug(
                    "Event type %s: stalled with score %s at iteration %s",
                    event_type,
                    _score_norm(terms),
                    iterations,
                )
                break

            raise NonConvergence(
                f"Event type {event_type}: no improving step at iteration {iterations}",
                event_type=event_type,
                gradient=_score_norm(terms),
            )

        beta, terms = candidate, candidate_terms

        spread = float(np.max(np.abs(centered @ beta), initial=0.0))
        if spread > max_linear_predictor:
            raise MonotoneLikelihoodDivergence(
                f"Coefficients for event type {event_type} diverge "
                f"(linear predictor {spread:.1f})",
                event_type=event_type,
                coefficients=[float(value) for value in beta],
            )

        _LOGGER.debug(
            "Event type %s iteration %s: log-likelihood=%s",
            event_type,
            iterations,
            terms.value,
        )

        if decrement < tol:
            break

    # Breslow baseline hazard at distinct event times
    scores = np.exp(centered @ beta)
    at_risk = _risk_set_sums(times, scores)
    event_times, counts = np.unique(times[is_event], return_counts=True)
    positions = np.searchsorted(times, event_times, side="left")
    increments = counts / at_risk[positions]

    return _EventFit(
        beta=beta,
        log_likelihood=terms.value,
        iterations=iterations,
        baseline_times=event_times,
        baseline_hazard=np.cumsum(increments),
    )


def fit_cause_specific(
    ds: Dataset,
    max_iter: int = 100,
    tol: float = 1e-8,
    max_linear_predictor: float = 30.0,
    workers: int = 1,
) -> CauseSpecificPH:
    """Fit one proportional-hazards model per event type.

    Each fit treats the other event types and censoring as censored, uses
    Breslow ties and centered covariates, and is maximized by damped Newton
    iteration.
    """
    d = ds.dimension
    counts = np.bincount(ds.events, minlength=ds.n_event_types + 1)
    for event_type in range(1, ds.n_event_types + 1):
        if counts[event_type] < d + 1:
            raise InsufficientEvents(event_type, int(counts[event_type]), d + 1)

    means = ds.covariates.mean(axis=0)
    order = np.argsort(ds.times, kind="mergesort")
    centered = ds.covariates[order] - means
    times = ds.times[order]
    events = ds.events[order]

    def fit_one(event_type: int) -> _EventFit:
        return _fit_event(
            centered, times, events, event_type, max_iter, tol, max_linear_predictor
        )

    event_types = list(range(1, ds.n_event_types + 1))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            fits = list(executor.map(fit_one, event_types))
    else:
        fits = [fit_one(event_type) for event_type in event_types]

    model = CauseSpecificPH(
        coefficients=[[float(value) for value in fit.beta] for fit in fits],
        means=[float(value) for value in means],
        baseline_times=[[float(value) for value in fit.baseline_times] for fit in fits],
        baseline_hazard=[
            [float(value) for value in fit.baseline_hazard] for fit in fits
        ],
        covariate_names=list(ds.covariate_names),
        n_event_types=ds.n_event_types,
        log_likelihood=[fit.log_likelihood for fit in fits],
        iterations=[fit.iterations for fit in fits],
    )

    total = model.risk_matrix(ds.covariates, float(ds.times.max())).sum(axis=1)
    if (total > 1.0 + 1e-9).any():
        _LOGGER.warning(
            "Cumulative incidences sum to %s on training data", float(total.max())
        )

    _LOGGER.debug(
        "Fit cause-specific model on %s record(s): coefficients=%s",
        len(ds),
        model.coefficients,
    )
    return model
