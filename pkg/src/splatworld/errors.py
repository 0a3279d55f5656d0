"""Exception types shared across the engine."""


class SplatWorldError(Exception):
    """Base class for all engine errors."""


class BehindCamera(SplatWorldError):
    """Point lies behind the camera's near clip plane."""


class DegenerateMatrix(SplatWorldError):
    """Matrix is too close to singular for a stable polar decomposition."""


class NonFiniteState(SplatWorldError):
    """Simulation state contains NaN or infinity; the step was rolled back."""


class UnknownBody(SplatWorldError):
    """Referenced body id does not exist or is not kinematic."""


class DimensionMismatch(SplatWorldError):
    """Array shapes do not agree."""


class ShapeMismatch(DimensionMismatch):
    """Optimizer parameter/gradient/state shapes do not agree."""


class EmptyObject(SplatWorldError):
    """Object initialization pruned every Gaussian."""


class NoViews(SplatWorldError):
    """Fewer than two calibrated views were provided."""


class NoObservations(SplatWorldError):
    """At least one observation image is required."""


class NoGaussians(SplatWorldError):
    """Query tracking requires a non-empty Gaussian set."""


class EmptyRecord(SplatWorldError):
    """Metric computation on an empty trajectory record."""


class ConfigError(SplatWorldError):
    """Invalid scenario or run configuration."""
