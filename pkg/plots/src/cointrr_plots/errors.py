"""Exception types for the figure-rendering package.

Everything raised deliberately derives from :class:`PlotsError` so the CLI can
catch one base class. The input CSVs come from a different process, so parse
failures carry row/column locations.
"""

from __future__ import annotations


class PlotsError(Exception):
    """Base class for all errors raised by this package."""


class SchemaMismatch(PlotsError, ValueError):
    """The CSV declares a schema version this package does not support."""


class ParseError(PlotsError, ValueError):
    """The CSV is missing, malformed, or lacks the columns a figure needs."""


class InvalidJob(PlotsError, ValueError):
    """A plot job names an unknown figure kind or carries bad style options."""
