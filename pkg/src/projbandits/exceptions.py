"""Exception types raised by :mod:`projbandits`.

All of them derive from the closest builtin, so callers can catch either.
"""

from __future__ import annotations

import numpy as np


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A matrix that should be symmetric positive-definite could not be factorized."""


class DimensionMismatchError(ValueError):
    """Vector or matrix dimensions do not agree."""


class DegenerateSpectrumError(RuntimeError):
    """No positive eigengap exists, the subspace rank cannot be chosen."""


class RankOutOfRangeError(ValueError):
    """A requested projection rank is outside of ``[1, d]``."""


class DataError(Exception):
    """Base class for problems with user supplied data sets."""


class ParseError(DataError, ValueError):
    """A data file could not be parsed.

    Parameters
    ----------
    msg
        description of the problem.
    path
        file that failed to parse.
    line
        1-based line number in ``path``, if known.
    """

    def __init__(self, msg: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = path if path is not None else "<unknown>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {msg}")


class MissingGenreError(ParseError):
    """A movie lists a genre that is not part of the fixed vocabulary."""


class EmptyGroupError(DataError, RuntimeError):
    """A user group (or a single user) has too few rated movies to serve arms."""
