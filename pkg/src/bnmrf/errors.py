"""Exception hierarchy shared by all modules."""


class BNMError(Exception):
    """Base class for every error raised by this package."""


class NumericalFailure(BNMError):
    """A numerical step broke down (non-convergence, singular system)."""


class NonPositiveArgument(BNMError, ValueError):
    pass


class DomainError(BNMError, ValueError):
    pass


class CoincidentPoints(BNMError, ValueError):
    pass


class InvalidResolution(BNMError, ValueError):
    pass


class EmptyPointSet(BNMError, ValueError):
    pass


class InvalidOrder(BNMError, ValueError):
    pass


class TargetNotOnPanel(BNMError, ValueError):
    pass


class DegenerateTriangle(BNMError, ValueError):
    pass


class InvalidConfig(BNMError, ValueError):
    pass


class DimensionMismatch(BNMError, ValueError):
    pass


class UntaggedPanel(BNMError, ValueError):
    pass


class WrongOrientation(BNMError, ValueError):
    pass


class NonDirichletPanel(BNMError, ValueError):
    pass


class ZeroCouplingParameter(BNMError, ValueError):
    pass


class NumericalBreakdown(NumericalFailure):
    pass


class SingularSystem(NumericalFailure):
    pass


class PointOnBoundary(BNMError, ValueError):
    pass


class ZeroReference(BNMError, ValueError):
    pass


class InsideSphere(BNMError, ValueError):
    pass


class OriginEvaluation(BNMError, ValueError):
    pass


class MeshFormatError(BNMError, ValueError):
    pass
