"""Exception hierarchy shared by every radmap module."""


class RadmapError(Exception):
    """Base class for all radmap errors."""


class ConfigError(RadmapError, ValueError):
    """A configuration value or document is invalid."""


class FormatError(RadmapError, ValueError):
    """An on-disk record violates its format or invariants."""


class ExtrapolationError(RadmapError, ValueError):
    """A pose was requested outside the odometry time span."""

    def __init__(self, t: float, lo: float, hi: float):
        self.t = t
        super().__init__(f"t={t:.6f} s outside odometry span [{lo:.6f}, {hi:.6f}] s")


class AlignmentError(RadmapError, ValueError):
    """Two rasters do not share dims, origin and resolution."""


class EmptyInputError(RadmapError, ValueError):
    """An operation that needs data received none."""


class GenerationError(RadmapError):
    """The simulator could not produce a dataset."""
