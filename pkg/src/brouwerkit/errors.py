"""Exception hierarchy.

Every error raised on purpose by the toolkit derives from ``BrouwerkitError``
so the CLI can map it to an exit code.
"""


class BrouwerkitError(Exception):
    """Base class."""


class ConfigurationError(BrouwerkitError, ValueError):
    """Invalid parameters (degenerate extents, bad resolutions, unknown names)."""


class DomainError(BrouwerkitError, ValueError):
    """A ball or sphere does not fit inside the domain, or a region is empty."""


class TubeError(BrouwerkitError, ValueError):
    """A point lies outside the tubular neighbourhood of the boundary."""


class MarginError(BrouwerkitError, ValueError):
    """A finite-difference stencil would leave the domain."""


class BoundaryProximityError(BrouwerkitError, ValueError):
    """The query value is too close to the image of the boundary."""


class SupportError(BrouwerkitError, ValueError):
    """A test-function support meets the image of the boundary."""


class DegenerateError(BrouwerkitError, ValueError):
    """A curve passes through (or numerically touches) the query point."""


class AdmissibilityError(BrouwerkitError, ValueError):
    """A ball B_eps(x) with eps >= dist(x, boundary)."""


class ResolutionError(BrouwerkitError, ValueError):
    """Too few samples for a meaningful estimate."""


class NoDegreeError(BrouwerkitError, ValueError):
    """The boundary separation margin is below the configured floor."""
