"""Exception hierarchy shared by all modules."""


class IncompatError(Exception):
    """Base class for every error raised by this package."""


class ParameterOutOfRange(IncompatError, ValueError):
    pass


class TOutOfRange(ParameterOutOfRange):
    pass


class RankOutOfRange(ParameterOutOfRange):
    pass


class AncillaTooSmall(ParameterOutOfRange):
    pass


class DimensionMismatch(IncompatError, ValueError):
    pass


class NonHermitian(IncompatError, ValueError):
    pass


class NegativeEffect(IncompatError, ValueError):
    def __init__(self, index, worst_eigenvalue):
        self.index = index
        self.worst_eigenvalue = float(worst_eigenvalue)
        super().__init__(
            f"effect {index} has eigenvalue {self.worst_eigenvalue:.3e} below the PSD floor"
        )


class NotNormalized(IncompatError, ValueError):
    def __init__(self, deviation):
        self.deviation = float(deviation)
        super().__init__(f"effects do not sum to identity: max |sum - I| = {self.deviation:.3e}")


class NotDichotomic(IncompatError, ValueError):
    pass


class GTooLarge(IncompatError, ValueError):
    pass


class ProblemTooLarge(IncompatError, ValueError):
    pass


class SolverFailure(IncompatError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NoNontrivialAngle(IncompatError, ValueError):
    pass


class SinZero(IncompatError, ValueError):
    pass


class QuadratureFailure(IncompatError, RuntimeError):
    pass


class ConfigInvalid(IncompatError, ValueError):
    pass
