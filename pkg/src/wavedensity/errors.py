"""Exception hierarchy.

Configuration problems (bad sizes, bad names, inconsistent options) derive
from :class:`ConfigError`; failures detected while computing derive from
:class:`NumericError`.  The CLI maps the two families to exit codes 2 and 3.
"""


class WaveDensityError(Exception):
    """Base class for all package errors."""


class ConfigError(WaveDensityError, ValueError):
    """Invalid input or configuration."""


class SizingError(ConfigError):
    """Sample count is odd, too small, or too large for the requested operation."""


class NumericError(WaveDensityError, ArithmeticError):
    """A numerical invariant or precondition failed during computation."""


class SingularRootError(NumericError):
    """A root of s(x) = u coincides with a zero of S''."""


class ForbiddenValueError(NumericError):
    """A frequency lies in (or within the exclusion margin of) the set C."""


class RangeError(NumericError):
    """An interval is not covered by the spectral range."""


class DegenerateNeighborhoodError(NumericError):
    """A neighborhood contains no frequency bins."""


class NeighborhoodError(ConfigError):
    """Neighborhoods overlap, do not fit, or collide with the forbidden set."""


class QuadratureInfeasibleError(NumericError):
    """The phase-resolving quadrature step would need too many nodes."""
