"""Errors raised by joint-concordance operations.

Errors are grouped by the command-line exit code they map to: data errors
exit with ``2`` and numerical failures with ``3``. Usage errors are plain
:class:`ValueError` (exit code ``1``).
"""
import typing

USAGE_EXIT_CODE = 1
DATA_EXIT_CODE = 2
NUMERICAL_EXIT_CODE = 3


class JointConcordanceError(Exception):
    """Base class for all errors with a machine-readable name."""

    exit_code: int = DATA_EXIT_CODE

    def __init__(self, message: str = "", **details: typing.Any):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.details: typing.Dict[str, typing.Any] = details

    @property
    def name(self) -> str:
        """Machine-readable error name."""
        return self.__class__.__name__


# -----------------------------------------------------------------------------
# Data errors
# -----------------------------------------------------------------------------


class DataError(JointConcordanceError):
    """Input data violates an invariant."""

    exit_code = DATA_EXIT_CODE


class EmptyDataset(DataError):
    """Fewer than two records."""


class NegativeTime(DataError):
    """Observed time is negative."""


class InvalidTime(DataError):
    """Observed time is not a finite number."""


class MissingCovariate(DataError):
    """A covariate value is missing."""


class InconsistentDimension(DataError):
    """Records disagree on the covariate dimension."""


class InvalidEventLabel(DataError):
    """Event label is not a nonnegative integer code."""


class NoEventsOfType(DataError):
    """No record has a given event type."""

    def __init__(self, event_type: int, message: str = ""):
        super().__init__(
            message or f"No events of type {event_type}", event_type=event_type
        )
        self.event_type = event_type


class DimensionMismatch(DataError):
    """Covariates do not have the dimension a model requires."""


class CensoredRecords(DataError):
    """Uncensored estimator given censored records."""


class InsufficientEvents(DataError):
    """Too few events of a type to fit a regression."""

    def __init__(self, event_type: int, events: int, required: int):
        super().__init__(
            f"Event type {event_type} has {events} event(s), {required} required",
            event_type=event_type,
            events=events,
            required=required,
        )
        self.event_type = event_type


class NoComparablePairs(DataError):
    """Metric denominator is zero."""


class NoSubjectsBeforeHorizon(DataError):
    """No subject has an observed event by the horizon."""


# -----------------------------------------------------------------------------
# Numerical errors
# -----------------------------------------------------------------------------


class NumericalError(JointConcordanceError):
    """Numerical procedure failed."""

    exit_code = NUMERICAL_EXIT_CODE


class ZeroCensoringSurvival(NumericalError):
    """A needed censoring weight divides by zero."""


class NonConvergence(NumericalError):
    """Iterative fit did not converge."""


class MonotoneLikelihoodDivergence(NumericalError):
    """Partial likelihood has no finite maximizer."""


class BracketingFailure(NumericalError):
    """Root could not be bracketed."""


class QuadratureNonConvergence(NumericalError):
    """Quadrature did not reach its error target."""


class FitFailure(NumericalError):
    """Model could not be fit for a covariate subset."""
