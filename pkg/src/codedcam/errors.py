"""Exception types shared across the toolkit."""


class CodedCamError(Exception):
    """Base class for toolkit errors."""


class ConfigError(CodedCamError):
    """Invalid configuration file or parameter value."""


class DatasetError(CodedCamError):
    """Dataset layout or file problem."""


class PoseEstimationError(CodedCamError):
    """Relative pose could not be estimated (too few correspondences/inliers)."""


class AssociationError(CodedCamError):
    """No trajectory poses could be associated in time."""


class AlignmentError(CodedCamError):
    """Rigid alignment failed (too few pairs or degenerate geometry)."""
