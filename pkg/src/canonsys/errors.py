"""Typed failures raised across the package."""


class CanonsysError(Exception):
    """Base class for every error raised by the library."""


class ConfigError(CanonsysError):
    """Invalid run configuration."""


class UnknownId(CanonsysError):
    pass


class InvalidParams(CanonsysError):
    pass


class PoleAtNonpositiveInteger(CanonsysError):
    pass


class DomainError(CanonsysError):
    pass


class NoOracle(CanonsysError):
    pass


class NoClosedForm(CanonsysError):
    pass


class NotInner(CanonsysError):
    pass


class StripTooNarrow(CanonsysError):
    pass


class DeltaOffGrid(CanonsysError):
    pass


class GridMismatch(CanonsysError):
    pass


class NearSingular(CanonsysError):
    """The compression has norm too close to one for a stable solve."""


class ResidualCheckFailed(CanonsysError):
    pass


class K3Violation(CanonsysError):
    """A diagonal value Phi(t,t) or Psi(t,t) vanishes."""


class K7Violation(CanonsysError):
    """Re(Phi conj Psi) is not positive at the diagonal."""


class DegenerateDiagonal(CanonsysError):
    pass


class DeltaAtDiagonal(CanonsysError):
    pass


class TailNotDecayed(CanonsysError):
    pass


class OscillationUnderResolved(CanonsysError):
    pass


class StepSizeTooCoarse(CanonsysError):
    pass


class DivisionByZero(CanonsysError):
    pass


class DiagonalSingularity(CanonsysError):
    pass


class MethodNotApplicable(CanonsysError):
    pass
