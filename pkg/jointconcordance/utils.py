"""Utility methods for joint-concordance runs."""
import dataclasses
import typing

import numpy as np


def only_fields(
    cls, config_dict: typing.Dict[str, typing.Any]
) -> typing.Dict[str, typing.Any]:
    """Return a dict with only valid fields."""
    if dataclasses.is_dataclass(cls):
        field_names = set(f.name for f in dataclasses.fields(cls))
        valid_fields = set(config_dict.keys()).intersection(field_names)
        return {key: config_dict[key] for key in valid_fields}

    return config_dict


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent seed for a sub-task.

    The stream for ``(seed, *keys)`` is the first 32-bit word of a
    :class:`numpy.random.SeedSequence` entropy pool seeded with the whole key,
    so it does not depend on how many other sub-tasks exist.

    Example
    -------

    >>> derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    True
    >>> derive_seed(0, 1, 2) == derive_seed(0, 2, 1)
    False
    """
    sequence = np.random.SeedSequence([seed, *keys])
    return int(sequence.generate_state(1)[0])


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Get a PCG64 generator for ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def format_table(
    headers: typing.Sequence[str], rows: typing.Sequence[typing.Sequence[typing.Any]]
) -> str:
    """Format rows as aligned text columns.

    Floats are printed with 4 decimals and ``None`` as ``-``.

    Example
    -------

    >>> print(format_table(["model", "jc"], [["exp", 0.52], ["csc", None]]))
    model  jc
    exp    0.5200
    csc    -
    """
    cells = [list(headers)] + [[_cell(value) for value in row] for row in rows]
    widths = [max(len(row[column]) for row in cells) for column in range(len(headers))]
    return "\n".join(
        "  ".join(value.ljust(width) for value, width in zip(row, widths)).rstrip()
        for row in cells
    )


def _cell(value: typing.Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"

    return str(value)
