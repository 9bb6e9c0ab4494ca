"""Exception types shared across the package."""


class RatlError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(RatlError):
    """A scenario/config file failed validation (CLI exits 1 on these)."""


class DegenerateGeometryError(RatlError):
    """Two distinct antennas resolved to the same physical position."""


class NearSingularError(RatlError):
    """A circuit matrix was too ill-conditioned to invert reliably."""


class DegenerateSymbolError(RatlError):
    """A symbol draw produced a vanishing passive-antenna current.

    The load formula divides by the per-antenna current; callers are
    expected to resample the symbol vector.
    """


class SearchSpaceError(RatlError):
    """A combinatorial sweep exceeded its enumeration guard."""


class RankDeficientError(RatlError):
    """Channel matrix had insufficient rank for the requested precoder."""
