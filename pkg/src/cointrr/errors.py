"""Exception types shared across the package.

Every error raised deliberately by this package derives from :class:`CointrrError`,
so callers can catch one base class at CLI boundaries. The concrete names mirror
the failure modes of the numerical contracts (definiteness, rank, sample length,
spectrum degeneracy, ...) rather than the call sites that raise them.
"""

from __future__ import annotations


class CointrrError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(CointrrError, ValueError):
    """Operands have incompatible or malformed dimensions."""


class NotPositiveDefinite(CointrrError, ValueError):
    """A matrix required to be symmetric positive definite is not."""


class RankDeficient(CointrrError, ValueError):
    """A matrix required to have full column rank is (numerically) rank deficient."""


class SingularQ(CointrrError, ValueError):
    """The coordinate-change matrix is numerically singular (the transversality
    condition between the error-correction directions fails)."""


class Unstable(CointrrError, ValueError):
    """The stationary block has a unit or explosive root; population quantities
    built from geometric series do not exist."""


class InvalidRank(CointrrError, ValueError):
    """A requested rank is outside the admissible range."""


class InvalidWeights(CointrrError, ValueError):
    """A weight vector violates the [0, 1] / nonincreasing contract."""


class TooShort(CointrrError, ValueError):
    """Not enough observations for the requested computation."""


class EigenvalueOutOfRange(CointrrError, ValueError):
    """A squared canonical correlation landed outside [0, 1)."""


class DegenerateSpectrum(CointrrError, ValueError):
    """Leading eigenvalues are too close together for projector-derivative
    formulas to be well conditioned."""


class InvalidSteps(CointrrError, ValueError):
    """Discretization step count below the supported minimum."""


class BootstrapFailed(CointrrError, RuntimeError):
    """Too many bootstrap replicates failed to produce a finite statistic."""


class ParseError(CointrrError, ValueError):
    """Malformed input file (CSV/JSON); message carries location when known."""


class InvalidConfig(CointrrError, ValueError):
    """Experiment configuration rejected (unknown keys, bad values)."""
