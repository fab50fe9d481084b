"""Exception types shared across the solver."""


class GridSizeError(ValueError):
    """Grid too small for the five-point interface stencils."""


class DimensionError(ValueError):
    """Array shapes incompatible with the grids or with each other."""


class DomainError(ValueError):
    """Invalid parameter domain (nonpositive weights, bad tolerances...)."""


class UnsupportedDomainError(ValueError):
    """Operation requires a periodic domain."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


class SnapshotError(RuntimeError):
    """Corrupt, truncated or version-incompatible snapshot file."""


class RankOverflowError(RuntimeError):
    """Solution rank exceeded the configured cap."""
