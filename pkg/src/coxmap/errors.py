"""Exception and warning types shared across the package.

Errors are raised eagerly at construction / call time so that bad inputs
never propagate into the numerical core.  Warning categories are ordinary
``UserWarning`` subclasses and can be silenced or promoted with the standard
``warnings`` machinery.
"""


class CoxmapError(Exception):
    """Base class for all package errors."""


# ---------------------------------------------------------------------------
# geometry


class InvalidWindowError(CoxmapError):
    """Polygon window is malformed (open ring, self-intersection, bad orientation)."""


class DegenerateWindowError(CoxmapError):
    """Window has (near-)zero area or zero extent along an axis."""


class PointOutsideWindowError(CoxmapError):
    """A point pattern location falls outside the observation window."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"point {index} lies outside the observation window")


class TimeOutsideRangeError(CoxmapError):
    """An event time falls outside the pattern's time interval."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"event time {index} lies outside the time interval")


class InvalidCellwidthError(CoxmapError):
    """Cell width must be a positive finite number (or valid grid size)."""


class TimeIndexError(CoxmapError):
    """A discrete time index falls outside the discretised time range."""


# ---------------------------------------------------------------------------
# intensity


class EmptyPatternError(CoxmapError):
    """Operation requires at least one event."""


class InvalidBandwidthError(CoxmapError):
    """Kernel bandwidth / adjustment must be positive."""


class DegenerateTimeWindowError(CoxmapError):
    """Time interval has zero or negative length."""


class ZeroIntensityError(CoxmapError):
    """Intensity is identically zero and cannot be rescaled."""


# ---------------------------------------------------------------------------
# covariance / embedding


class InvalidParameterError(CoxmapError):
    """A model parameter is outside its admissible range."""


class NegativeDistanceError(CoxmapError):
    """Spatial distance must be non-negative."""


class NegativeLagError(CoxmapError):
    """Time lag must be non-negative."""


class EmbeddingNotPSDError(CoxmapError):
    """Circulant embedding has a materially negative eigenvalue."""

    def __init__(self, min_eigenvalue, tolerance, message=None):
        self.min_eigenvalue = min_eigenvalue
        self.tolerance = tolerance
        super().__init__(
            message
            or f"embedding eigenvalue {min_eigenvalue:.6g} below tolerance {-tolerance:.6g}; "
            "refine the grid or shrink the spatial scale"
        )


class DimensionMismatchError(CoxmapError):
    """Array shapes are inconsistent with the grid or with each other."""


# ---------------------------------------------------------------------------
# estimation


class TooFewEventsError(CoxmapError):
    """Not enough events to form the requested summary statistic."""


class SeriesTooShortError(CoxmapError):
    """Count series too short (or degenerate) for the requested lags."""


# ---------------------------------------------------------------------------
# inference


class NonFiniteTargetError(CoxmapError):
    """Log target evaluated to NaN at the current (not proposed) state."""


# ---------------------------------------------------------------------------
# storage


class StoreExistsError(CoxmapError):
    """Refusing to overwrite an existing sample store."""


class StoreCapacityError(CoxmapError):
    """Sample store is full."""


class StoreCorruptError(CoxmapError):
    """Sample store failed an integrity check (bad magic, short file, ...)."""


class StoreIndexError(CoxmapError):
    """Extraction range is outside the stored extent."""


class EmptyIntersectionError(CoxmapError):
    """Polygon selects no grid cells."""


class InsufficientSamplesError(CoxmapError):
    """Store holds no samples (or fewer than required)."""


class DiskSpaceDeclinedError(CoxmapError):
    """Projected store size was not confirmed by the caller."""

    def __init__(self, projected_bytes, message=None):
        self.projected_bytes = projected_bytes
        mib = projected_bytes / 2**20
        super().__init__(
            message
            or f"store would occupy approximately {mib:.1f} MiB on disk; "
            "pass force=True (or confirm interactively) to proceed"
        )


# ---------------------------------------------------------------------------
# cli / configuration


class ConfigError(CoxmapError):
    """Project configuration file missing a required entry."""


class FileFormatError(CoxmapError):
    """An input file does not match its documented format."""


# ---------------------------------------------------------------------------
# warnings


class CellwidthWarning(UserWarning):
    """Cell width is coarse relative to the spatial correlation scale."""


class ArgminOnBoundaryWarning(UserWarning):
    """A fitted parameter landed on the edge of its search range."""


class NonFiniteProposalWarning(UserWarning):
    """MALA proposals evaluated to a non-finite target and were rejected."""
