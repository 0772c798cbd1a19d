"""Exception hierarchy for the toolkit.

All domain errors subclass ValueError so that callers which only care about
"bad input" can keep catching ValueError.
"""


class GhzFidelityError(ValueError):
    """Base class for every error raised by this package."""


class InvalidStateError(GhzFidelityError):
    """A matrix violates the density-matrix invariants (Hermitian, trace 1, PSD)."""


class DimensionError(GhzFidelityError):
    """Dimension mismatch between operands, or a register larger than supported."""


class InvalidLabelError(GhzFidelityError):
    """Malformed bit string, GHZ label, rotation mask or measurement setting."""


class NoiseModelError(GhzFidelityError):
    """Inadmissible noise parameters or an unknown noise kind."""


class ConfigError(GhzFidelityError):
    """Bad configuration value, unknown key or unknown sweep parameter."""
