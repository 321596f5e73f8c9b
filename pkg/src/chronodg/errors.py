"""Exception types raised across the package."""


class ChronoDGError(Exception):
    """Base class for all errors raised by chronodg."""


class SingularMatrix(ChronoDGError):
    pass


class Defective(ChronoDGError):
    """No basis of eigenvectors exists within tolerance."""


class DegenerateStep(ChronoDGError):
    pass


class Unsupported(ChronoDGError):
    pass


class SingularStageSystem(ChronoDGError):
    pass


class PoleHit(ChronoDGError):
    pass


class SingularImplicitBlock(ChronoDGError):
    pass


class ZeroAlphaZero(ChronoDGError):
    """The constant term of the slab determinant vanishes."""


class SingularSlab(ChronoDGError):
    pass


class ModeUnavailable(ChronoDGError):
    pass


class SingularK(ChronoDGError):
    pass


class DuplicateNodes(ChronoDGError):
    pass


class NonPositiveError(ChronoDGError):
    pass


class UnstableRun(ChronoDGError):
    """A convergence run produced errors above the blow-up threshold.

    The completed report is attached so callers can still emit it.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
