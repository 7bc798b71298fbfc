"""Domain types, dataset validation and the risk-model abstraction."""
import logging
import typing
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    InconsistentDimension,
    InvalidEventLabel,
    InvalidTime,
    MissingCovariate,
    NegativeTime,
    NoEventsOfType,
)

_LOGGER = logging.getLogger(__name__)

EventLabel = typing.NewType("EventLabel", int)
"""Event code: ``0`` is censored, ``k >= 1`` is a competing event type."""

CENSORED = EventLabel(0)

RawRecord = typing.Mapping[str, typing.Any]
"""Parsed input row with keys ``id``, ``time``, ``event`` and ``covariates``."""

# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class SurvivalRecord:
    """One subject: covariates, observed time and observed event."""

    id: str
    """Opaque subject identifier."""
    covariates: typing.Tuple[float, ...]
    """Covariate vector of length d."""
    time: float
    """Observed time, the minimum of event and censoring time."""
    event: EventLabel
    """Observed event code (0 when censored)."""

    @property
    def is_censored(self) -> bool:
        """True if no event was observed."""
        return self.event == CENSORED


@dataclass(frozen=True)
class Dataset:
    """Validated cohort of survival records.

    Arrays are read-only; use :func:`validate_dataset` or
    :meth:`Dataset.from_arrays` to construct one.
    """

    ids: typing.Tuple[str, ...]
    covariates: np.ndarray
    """Covariate matrix of shape (n, d)."""
    times: np.ndarray
    """Observed times of shape (n,)."""
    events: np.ndarray
    """Observed event codes of shape (n,)."""
    covariate_names: typing.Tuple[str, ...]
    n_event_types: int

    @classmethod
    def from_arrays(
        cls,
        covariates: typing.Any,
        times: typing.Any,
        events: typing.Any,
        covariate_names: typing.Optional[typing.Sequence[str]] = None,
        ids: typing.Optional[typing.Sequence[str]] = None,
        n_event_types: typing.Optional[int] = None,
    ) -> "Dataset":
        """Validate arrays and build a dataset."""
        times = np.array(times, dtype=float).reshape(-1)
        n = len(times)
        if n < 2:
            raise EmptyDataset(f"At least 2 records required, got {n}", records=n)

        covariates = np.array(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(n, -1)
        if covariates.ndim != 2 or covariates.shape[0] != n:
            raise InconsistentDimension(
                "Covariate matrix does not match the number of records"
            )

        if np.isnan(covariates).any():
            row = int(np.flatnonzero(np.isnan(covariates).any(axis=1))[0])
            raise MissingCovariate(f"Missing covariate in record {row}", record=row)

        if not np.isfinite(times).all():
            row = int(np.flatnonzero(~np.isfinite(times))[0])
            raise InvalidTime(f"Time is not finite in record {row}", record=row)
        if (times < 0).any():
            row = int(np.flatnonzero(times < 0)[0])
            raise NegativeTime(f"Negative time in record {row}", record=row)

        raw_events = np.asarray(events, dtype=float).reshape(-1)
        if len(raw_events) != n:
            raise InconsistentDimension("Event column does not match times")
        bad = ~np.isfinite(raw_events) | (raw_events < 0)
        bad |= raw_events != np.round(raw_events)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise InvalidEventLabel(
                f"Event label is not a nonnegative integer in record {row}", record=row
            )
        events = raw_events.astype(int)

        observed_max = int(events.max())
        if n_event_types is None:
            n_event_types = max(observed_max, 1)
        if observed_max > n_event_types:
            raise InvalidEventLabel(
                f"Event code {observed_max} exceeds {n_event_types} event types"
            )

        counts = np.bincount(events, minlength=n_event_types + 1)
        for event_type in range(1, n_event_types + 1):
            if counts[event_type] == 0:
                raise NoEventsOfType(event_type)

        d = covariates.shape[1]
        if covariate_names is None:
            covariate_names = [f"x{index + 1}" for index in range(d)]
        if len(covariate_names) != d:
            raise InconsistentDimension(
                f"{len(covariate_names)} covariate name(s) for dimension {d}"
            )

        if ids is None:
            ids = [str(index) for index in range(n)]
        if len(ids) != n:
            raise InconsistentDimension("Record ids do not match the number of records")

        for array in (covariates, times, events):
            array.flags.writeable = False

        return cls(
            ids=tuple(str(record_id) for record_id in ids),
            covariates=covariates,
            times=times,
            events=events,
            covariate_names=tuple(covariate_names),
            n_event_types=int(n_event_types),
        )

    # -------------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented

        return (
            self.ids == other.ids
            and self.covariate_names == other.covariate_names
            and self.n_event_types == other.n_event_types
            and np.array_equal(self.covariates, other.covariates)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.events, other.events)
        )

    def __hash__(self) -> int:
        return hash((self.ids, self.covariate_names, self.n_event_types))

    @property
    def records(self) -> typing.List[SurvivalRecord]:
        """Records in input order."""
        return [
            SurvivalRecord(
                id=self.ids[index],
                covariates=tuple(float(value) for value in self.covariates[index]),
                time=float(self.times[index]),
                event=EventLabel(int(self.events[index])),
            )
            for index in range(len(self))
        ]

    @property
    def dimension(self) -> int:
        """Number of covariates d."""
        return self.covariates.shape[1]

    @property
    def censored_fraction(self) -> float:
        """Fraction of records with event code 0."""
        return float(np.mean(self.events == CENSORED))

    @property
    def has_censoring(self) -> bool:
        """True if any record is censored."""
        return bool((self.events == CENSORED).any())

    def subset(self, indices: typing.Any) -> "Dataset":
        """Dataset of the given rows (repeats allowed), revalidated."""
        indices = np.asarray(indices, dtype=int)
        return Dataset.from_arrays(
            self.covariates[indices],
            self.times[indices],
            self.events[indices],
            covariate_names=self.covariate_names,
            ids=[self.ids[index] for index in indices],
            n_event_types=self.n_event_types,
        )

    def select(self, names: typing.Sequence[str]) -> "Dataset":
        """Dataset restricted to the named covariates, in the given order."""
        columns = [self.covariate_names.index(name) for name in names]
        return Dataset.from_arrays(
            self.covariates[:, columns],
            self.times,
            self.events,
            covariate_names=list(names),
            ids=self.ids,
            n_event_types=self.n_event_types,
        )

    def lumped(self) -> "Dataset":
        """Dataset with every event type recoded to a single type 1."""
        return Dataset.from_arrays(
            self.covariates,
            self.times,
            np.where(self.events == CENSORED, CENSORED, 1),
            covariate_names=self.covariate_names,
            ids=self.ids,
            n_event_types=1,
        )

    def to_raw_records(self) -> typing.List[typing.Dict[str, typing.Any]]:
        """Serialize to the raw row form accepted by :func:`validate_dataset`."""
        return [
            {
                "id": record.id,
                "time": record.time,
                "event": int(record.event),
                "covariates": list(record.covariates),
            }
            for record in self.records
        ]


# -----------------------------------------------------------------------------


def validate_dataset(
    raw_records: typing.Sequence[RawRecord],
    covariate_names: typing.Optional[typing.Sequence[str]] = None,
    n_event_types: typing.Optional[int] = None,
) -> Dataset:
    """Validate parsed rows and build a :class:`Dataset`.

    Records retain input order. The number of event types defaults to the
    largest event code present.

    Example
    -------

    >>> rows = [
    ...     {"id": "a", "time": 1.0, "event": 1, "covariates": [0.5]},
    ...     {"id": "b", "time": 2.0, "event": 2, "covariates": [0.1]},
    ...     {"id": "c", "time": 3.0, "event": 0, "covariates": [0.3]},
    ... ]
    >>> ds = validate_dataset(rows)
    >>> len(ds), ds.n_event_types
    (3, 2)
    """
    if len(raw_records) < 2:
        raise EmptyDataset(
            f"At least 2 records required, got {len(raw_records)}",
            records=len(raw_records),
        )

    dimensions = set()
    for index, row in enumerate(raw_records):
        covariates = row.get("covariates")
        if covariates is None:
            raise MissingCovariate(f"No covariates in record {index}", record=index)
        dimensions.add(len(covariates))
        for value in covariates:
            if value is None or (isinstance(value, str) and not value.strip()):
                raise MissingCovariate(
                    f"Missing covariate in record {index}", record=index
                )

        time = _parse_float(row.get("time"), InvalidTime, "time", index)
        if time < 0:
            raise NegativeTime(f"Negative time in record {index}", record=index)

    if len(dimensions) > 1:
        raise InconsistentDimension(
            f"Covariate dimensions differ: {sorted(dimensions)}",
            dimensions=sorted(dimensions),
        )

    dimension = dimensions.pop()
    covariates = np.array(
        [
            [
                _parse_float(value, MissingCovariate, "covariate", index)
                for value in row["covariates"]
            ]
            for index, row in enumerate(raw_records)
        ],
        dtype=float,
    ).reshape(len(raw_records), dimension)

    events = []
    for index, row in enumerate(raw_records):
        try:
            events.append(float(row["event"]))
        except (KeyError, TypeError, ValueError):
            raise InvalidEventLabel(
                f"Event label is not an integer code in record {index}", record=index
            )

    return Dataset.from_arrays(
        covariates,
        [
            _parse_float(row["time"], InvalidTime, "time", index)
            for index, row in enumerate(raw_records)
        ],
        events,
        covariate_names=covariate_names,
        ids=[str(row.get("id", index)) for index, row in enumerate(raw_records)],
        n_event_types=n_event_types,
    )


def _parse_float(
    value: typing.Any, error: typing.Type[Exception], what: str, index: int
) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise error(f"Invalid {what} {value!r} in record {index}", record=index)


def read_dataset(
    path: typing.Union[str, Path],
    event_labels: typing.Optional[typing.Mapping[str, int]] = None,
    n_event_types: typing.Optional[int] = None,
) -> Dataset:
    """Read a dataset from CSV (``id,time,event,<cov1>,...,<covd>``).

    String event labels are mapped through ``event_labels`` when given.
    """
    frame = pd.read_csv(
        path, dtype={"id": str}, encoding="utf-8", float_precision="round_trip"
    )
    missing = [column for column in ("id", "time", "event") if column not in frame]
    if missing:
        raise InconsistentDimension(f"Missing column(s): {', '.join(missing)}")

    covariate_names = [
        column for column in frame.columns if column not in ("id", "time", "event")
    ]
    events = frame["event"]
    if event_labels is not None:
        unknown = set(events.astype(str)) - set(event_labels)
        if unknown:
            raise InvalidEventLabel(f"Unmapped event label(s): {sorted(unknown)}")
        events = events.astype(str).map(event_labels)

    raw_records = [
        {
            "id": row_id,
            "time": time,
            "event": event,
            "covariates": [None if pd.isna(value) else value for value in values],
        }
        for row_id, time, event, values in zip(
            frame["id"],
            frame["time"],
            events,
            frame[covariate_names].itertuples(index=False, name=None),
        )
    ]

    _LOGGER.debug("Read %s record(s) from %s", len(raw_records), path)
    return validate_dataset(
        raw_records, covariate_names=covariate_names, n_event_types=n_event_types
    )


def write_dataset(ds: Dataset, path: typing.Union[str, Path]):
    """Write a dataset in the CSV format read by :func:`read_dataset`."""
    frame = pd.DataFrame(ds.covariates, columns=list(ds.covariate_names))
    frame.insert(0, "event", ds.events)
    frame.insert(0, "time", ds.times)
    frame.insert(0, "id", list(ds.ids))
    frame.to_csv(path, index=False, float_format="%.17g", encoding="utf-8")


def evaluation_horizon(ds: Dataset, quantile: float = 0.75) -> float:
    """Empirical quantile of observed times.

    Uses linear interpolation between order statistics (type 7).

    Example
    -------

    >>> ds = validate_dataset([
    ...     {"time": t, "event": 1 + i % 2, "covariates": [0.0]}
    ...     for i, t in enumerate([1, 2, 3, 4])
    ... ])
    >>> evaluation_horizon(ds, 0.75)
    3.25
    """
    if not 0 < quantile <= 1:
        raise ValueError(f"Quantile must be in (0, 1], got {quantile}")

    return float(np.quantile(ds.times, quantile))


# -----------------------------------------------------------------------------


class RiskModel(metaclass=ABCMeta):
    """Model producing a risk score M(x, t, d) and an event-type prediction.

    Subclasses implement :meth:`risk_matrix`, the vectorized score for every
    event type. Scores must be deterministic given (x, t, d).
    """

    n_event_types: int = 2

    @abstractmethod
    def risk_matrix(self, covariates: np.ndarray, t: float) -> np.ndarray:
        """Risk scores of shape (n, K) for covariates of shape (n, d)."""

    def predict_types(self, covariates: np.ndarray, t: float) -> np.ndarray:
        """Predicted event types of shape (n,).

        Argmax of the risk scores, ties broken toward the smallest event code.
        """
        return np.argmax(self.risk_matrix(covariates, t), axis=1) + 1

    def risk(self, x: typing.Sequence[float], t: float, d: int) -> float:
        """Risk score M(x, t, d) of one subject for event type d."""
        if not 1 <= d <= self.n_event_types:
            raise ValueError(f"Event type must be in 1..{self.n_event_types}, got {d}")

        return float(self.risk_matrix(_as_row(x), t)[0, d - 1])

    def predict_type(self, x: typing.Sequence[float], t: float) -> EventLabel:
        """Predicted event type M_c(x, t) of one subject."""
        return EventLabel(int(self.predict_types(_as_row(x), t)[0]))


def _as_row(x: typing.Any) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(1, -1)


def require_dimension(covariates: np.ndarray, dimension: int, model_name: str):
    """Raise :class:`DimensionMismatch` unless covariates have ``dimension`` columns."""
    if covariates.ndim != 2 or covariates.shape[1] != dimension:
        raise DimensionMismatch(
            f"{model_name} needs {dimension} covariate(s), got shape {covariates.shape}"
        )
