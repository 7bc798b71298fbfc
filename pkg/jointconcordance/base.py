"""Base class for serialized joint-concordance reports.

Every artifact written by this package (metric reports, fitted models,
configurations, study tables) is a dataclass deriving from :class:`Report`.
"""
import typing
from abc import ABCMeta
from pathlib import Path

from dataclasses_json import DataClassJsonMixin


class Report(DataClassJsonMixin, metaclass=ABCMeta):
    """Base class for JSON reports.

    All classes implementing serialized artifacts are subclasses of this class."""

    def payload(self, indent: typing.Optional[int] = None) -> str:
        """Get the JSON document for this report.

        Arguments
        ---------
        indent
            optional indentation passed to :func:`json.dumps`

        Returns
        -------
        str
            The report as a JSON string

        Example
        -------

        >>> from jointconcordance.metrics import Interval
        >>> Interval(lower=0.25, upper=0.5).payload()
        '{"lower": 0.25, "upper": 0.5, "level": 0.95, "replicates": 0, "skipped": 0, "errors": {}}'
        """
        return self.to_json(ensure_ascii=False, indent=indent)

    def write(self, path: typing.Union[str, Path], indent: typing.Optional[int] = 2):
        """Write the JSON document for this report to a file."""
        Path(path).write_text(self.payload(indent=indent) + "\n", encoding="utf-8")

    @classmethod
    def from_file(cls, path: typing.Union[str, Path]):
        """Load a report of this type from a JSON file."""
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def report_type(cls) -> str:
        """Get the name used to tag this report type in command output.

        Returns
        -------
        str
            The class name

        Example
        -------

        >>> from jointconcordance.censoring import CensoringModel
        >>> CensoringModel.report_type()
        'CensoringModel'
        """
        return cls.__name__
