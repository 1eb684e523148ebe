"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data or parameters violate a documented contract."""


class UnknownAirportError(ValidationError, KeyError):
    """An airport id was not found in the graph."""

    def __str__(self):
        return ValueError.__str__(self)


class InsufficientDataError(ValueError):
    """Not enough (or too degenerate) data for a statistical fit."""


class CacheError(RuntimeError):
    """Base class for distance cache problems."""


class StaleCacheError(CacheError):
    """A cache file was built for a different lambda, graph or mapping."""


class CacheVersionError(CacheError):
    """A cache file was written by an incompatible format version."""


class MissingCacheError(CacheError):
    """No distance cache exists for the requested configuration."""
