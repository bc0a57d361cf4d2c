"""Exception types shared across the toolkit."""


class AofuseError(Exception):
    """Base class for all toolkit errors."""


class BehindCameraError(AofuseError):
    """Point has non-positive depth in the camera frame."""


class OutOfBoundsError(AofuseError):
    """Pixel coordinate outside the sensor."""


class DegenerateError(AofuseError):
    """Geometric configuration too close to a singularity."""


class RangeOutOfBoundsError(AofuseError):
    """Requested range outside [r_min, r_max]."""


class BadConfigError(AofuseError):
    """Invalid configuration value."""


class BadDatasetError(AofuseError):
    """Dataset directory missing or inconsistent."""


class LengthMismatchError(AofuseError):
    """Paired sequences of unequal length."""


class EmptyBatchError(AofuseError):
    """A loss term received no samples."""


class ShapeMismatchError(AofuseError):
    """Parameter and gradient shapes disagree."""


class NonFiniteGradientError(AofuseError):
    """A gradient buffer contains NaN or Inf."""


class RankDeficientError(AofuseError):
    """Constraint matrix numerically rank-deficient."""


class EmptyMeshError(AofuseError):
    """Level-set extraction found no surface."""


class EmptySurfaceError(AofuseError):
    """Metric computation received an empty surface."""
