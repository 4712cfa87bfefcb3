"""Exception types shared across the package."""


class NetcritError(Exception):
    """Base class for all package errors."""


class SingularMatrix(NetcritError):
    """A linear solve hit a pivot too small relative to the matrix scale."""


class NoConvergence(NetcritError):
    """An iterative numerical routine exhausted its iteration budget."""


class DimensionMismatch(NetcritError):
    """A point or vector has the wrong length for the ambient variable count."""


class ShapeMismatch(NetcritError):
    """Training data does not conform to the architecture."""


class RankOutOfRange(NetcritError):
    """A rank bound outside 1..width was requested."""


class NonSquareLayer(NetcritError):
    """Residual reparameterization requires equal layer widths."""


class NotWidthOne(NetcritError):
    """The width-1 closed-form decomposition needs all layer widths equal to 1."""


class NonSquareSystem(NetcritError):
    """A start system requires equally many equations and variables."""


class SingularJacobian(NetcritError):
    """Newton refinement hit a numerically singular Jacobian."""


class IncompleteBreakup(NetcritError):
    """Monodromy grouping did not certify within the loop budget.

    The best partition found so far is attached as ``partition``.
    """

    def __init__(self, message, partition=None):
        super().__init__(message)
        self.partition = partition


class MembershipIndeterminate(NetcritError):
    """A membership test could not reach a verdict (tracking failures)."""


class ConfigError(NetcritError):
    """A run configuration failed validation."""


class ArchiveError(NetcritError):
    """An archive file is malformed or has an unsupported version."""
