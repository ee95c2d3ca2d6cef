"""Exception hierarchy shared across the engine.

The CLI maps these onto distinct exit codes: data problems (malformed
files, inconsistent manifests, invalid galleries) are recoverable user
errors, numerical problems (zero-norm vectors, non-finite values,
solver non-convergence) usually indicate unusable feature data.
"""


class TrackReidError(Exception):
    """Base class for all engine errors."""


class DataError(TrackReidError):
    """Malformed or inconsistent input data (files, manifests, galleries)."""


class FeatureFormatError(DataError):
    """Binary feature file violates the LRF1 format contract."""


class ManifestError(DataError):
    """Track manifest is malformed or inconsistent with the feature file."""


class DimensionMismatchError(DataError):
    """Operands do not share the latent-space dimension."""


class NumericalError(TrackReidError):
    """Numerically invalid operation on otherwise well-formed data."""


class ZeroNormError(NumericalError):
    """A vector that must be normalized has zero (or non-finite) norm."""


class ConvergenceError(NumericalError):
    """An iterative solver exhausted its iteration budget."""
