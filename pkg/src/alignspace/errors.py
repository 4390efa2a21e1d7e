"""Exception and warning types shared across the toolkit."""


class AlignspaceError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(AlignspaceError):
    """Input violates a documented precondition or schema."""


class TensorFormatError(ValidationError):
    """On-disk tensor bytes do not match the NFT1 layout."""


class NonFiniteError(ValidationError):
    """A value is NaN or infinite; carries the flat index of the offender."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class ConfigurationError(ValidationError):
    """Parameters are internally inconsistent (e.g. TR exceeds kernel support)."""


class EstimabilityError(ValidationError):
    """A statistical model term cannot be estimated from the given design."""


class DegenerateTrajectory(AlignspaceError):
    """Trajectory too short for an operator fit; callers fall back to the depth mean."""


class ZeroDynamics(AlignspaceError):
    """Centered snapshots are numerically zero; callers fall back to the depth mean."""


class DegeneracyWarning(UserWarning):
    """A numerically degenerate case was handled by a documented fallback."""


class RankDeficiencyWarning(DegeneracyWarning):
    """Unregularized least squares hit a rank-deficient design; minimum-norm fit returned."""
