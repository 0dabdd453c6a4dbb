"""Exception hierarchy shared by all opsym modules."""


class OpsymError(Exception):
    """Base class for every error raised by opsym."""


class ZeroVector(OpsymError, ValueError):
    pass


class DimensionMismatch(OpsymError, ValueError):
    pass


class NotNormalized(OpsymError, ValueError):
    pass


class InvalidBipartition(OpsymError, ValueError):
    pass


class InvalidSubsystem(OpsymError, ValueError):
    pass


class NotPositive(OpsymError, ValueError):
    pass


class DomainError(OpsymError, ValueError):
    pass


class NotFullyEntangled(OpsymError, ValueError):
    """Schmidt rank is below the dimension of the acting subsystem."""


class WrongOrientation(OpsymError, ValueError):
    """The acting subsystem is larger than the replicating one."""


class NonSquare(OpsymError, ValueError):
    pass


class NotUnitary(OpsymError, ValueError):
    pass


class SingularExpansion(OpsymError, ValueError):
    pass


class OptimizerFailure(OpsymError, RuntimeError):
    """No restart converged; ``best`` holds the best value found anyway."""

    def __init__(self, message, best=float("nan")):
        super().__init__(message)
        self.best = best
