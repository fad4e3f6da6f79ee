"""Exception hierarchy for the pixelaoa toolkit.

Each category maps to a distinct CLI exit code (see cli.py), so callers
can tell flag problems, file problems, data-validation problems and
numerical breakdowns apart.
"""


class PixelAoAError(Exception):
    """Base class for all toolkit errors."""


class LayoutError(PixelAoAError):
    """Degenerate or inconsistent port layout (zero ports, coincident ports...)."""


class GridError(PixelAoAError):
    """Angle grid construction or alignment problem (step does not divide spans,
    off-grid angle, area boundary not on a grid line)."""


class ConfigError(PixelAoAError):
    """Invalid geometry configuration (duplicate / out-of-range feed indices,
    non-binary connection vector, bad feed-network parameters)."""


class DatasetFormatError(PixelAoAError):
    """Dataset or codebook file does not parse, or misses required fields."""


class DimensionMismatchError(DatasetFormatError):
    """Declared sizes disagree with the stored array payload."""


class DatasetValidationError(PixelAoAError):
    """Physical-consistency invariant violated on load with strict validation."""


class ReciprocityError(DatasetValidationError):
    """Impedance matrix is not symmetric within tolerance."""


class PassivityError(DatasetValidationError):
    """Re{Z} has a significantly negative eigenvalue."""


class FinitenessError(DatasetValidationError):
    """Non-finite pattern or impedance entries."""


class NumericalError(PixelAoAError):
    """A linear system was singular or hopelessly ill-conditioned."""


class NonPhysicalConfigError(NumericalError):
    """A configuration produced a non-positive accepted power; its efficiency
    is undefined and the optimizer scores it +inf."""


class ScheduleError(PixelAoAError):
    """Subdivision schedule does not tile the requested space on the grid."""


class CoverageError(PixelAoAError):
    """Angle outside the space covered by a codebook."""


class EstimationError(PixelAoAError):
    """ML search had no usable candidate angles."""
