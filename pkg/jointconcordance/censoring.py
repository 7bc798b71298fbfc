"""Censoring survival G(t) = Pr(C > t) by reverse Kaplan-Meier."""
import logging
import typing
from dataclasses import dataclass, field

import numpy as np

from .base import Report
from .core import CENSORED, Dataset
from .errors import EmptyDataset

_LOGGER = logging.getLogger(__name__)

TimeLike = typing.Union[float, typing.Sequence[float], np.ndarray]

# -----------------------------------------------------------------------------


@dataclass
class CensoringModel(Report):
    """Estimated censoring survival as a right-continuous step function.

    G(t) = 1 before the first jump; ``survival_values[i]`` holds G(t) on
    ``[jump_times[i], jump_times[i + 1])``.

    Example
    -------

    >>> g = CensoringModel(jump_times=[2.0, 4.0], survival_values=[0.5, 0.0])
    >>> g.survival_at(2.0), g.survival_before(2.0)
    (0.5, 1.0)
    """

    jump_times: typing.List[float] = field(default_factory=list)
    """Sorted distinct times where censoring events occur."""
    survival_values: typing.List[float] = field(default_factory=list)
    """G(t) immediately after each jump."""

    def __post_init__(self):
        self._times = np.asarray(self.jump_times, dtype=float)
        self._values = np.concatenate(([1.0], np.asarray(self.survival_values, float)))

    def survival_at(self, t: TimeLike) -> typing.Any:
        """Right-continuous G(t)."""
        positions = np.searchsorted(self._times, t, side="right")
        return _unwrap(self._values[positions])

    def survival_before(self, t: TimeLike) -> typing.Any:
        """Left limit G(t-)."""
        positions = np.searchsorted(self._times, t, side="left")
        return _unwrap(self._values[positions])


def _unwrap(values: np.ndarray) -> typing.Any:
    if np.ndim(values) == 0:
        return float(values)

    return values


# -----------------------------------------------------------------------------


def fit_km_censoring(ds: Dataset) -> CensoringModel:
    """Fit the product-limit estimator with censoring as the event.

    At each distinct censoring time t with c censorings and r subjects at risk
    (observed time >= t, so true events tied at t stay at risk), the running
    product is multiplied by (1 - c / r).

    Example
    -------

    >>> from jointconcordance.core import validate_dataset
    >>> ds = validate_dataset([
    ...     {"time": t, "event": e, "covariates": [0.0]}
    ...     for t, e in [(1, 1), (2, 0), (3, 1), (4, 0)]
    ... ])
    >>> g = fit_km_censoring(ds)
    >>> g.jump_times, [round(v, 4) for v in g.survival_values]
    ([2.0, 4.0], [0.6667, 0.0])
    """
    if len(ds) == 0:
        raise EmptyDataset("Cannot fit censoring model without records")

    sorted_times = np.sort(ds.times)
    censored_times, censored_counts = np.unique(
        ds.times[ds.events == CENSORED], return_counts=True
    )
    at_risk = len(sorted_times) - np.searchsorted(
        sorted_times, censored_times, side="left"
    )
    survival = np.cumprod(1.0 - censored_counts / at_risk)

    _LOGGER.debug(
        "Fit censoring model with %s jump(s) on %s record(s)",
        len(censored_times),
        len(ds),
    )
    return CensoringModel(
        jump_times=[float(t) for t in censored_times],
        survival_values=[float(value) for value in survival],
    )


def survival_at(g: CensoringModel, t: TimeLike) -> typing.Any:
    """Evaluate G(t) (right-continuous)."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("Time must be nonnegative")

    return g.survival_at(t)


def survival_before(g: CensoringModel, t: TimeLike) -> typing.Any:
    """Evaluate the left limit G(t-)."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("Time must be nonnegative")

    return g.survival_before(t)
