"""Figure rendering for the versioned results.csv files of the cointrr CLI.

This package is deliberately decoupled from the estimation code: it consumes
only the ``# schema=v1`` CSV files and knows nothing about how they were
produced. See :mod:`cointrr_plots.figures` for the five figure kinds.
"""

from .errors import InvalidJob, ParseError, PlotsError, SchemaMismatch
from .figures import KINDS, PlotJob, build_figure, render

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "InvalidJob",
    "ParseError",
    "PlotJob",
    "PlotsError",
    "SchemaMismatch",
    "build_figure",
    "render",
    "__version__",
]
