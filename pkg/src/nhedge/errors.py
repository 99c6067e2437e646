"""Exception hierarchy shared by the numerical modules."""


class NHEdgeError(Exception):
    """Base class for all library errors."""


class InvalidGeometryError(NHEdgeError, ValueError):
    pass


class SingularEvaluationError(NHEdgeError, ValueError):
    """Kernel evaluated at a coincident point or lattice translate."""


class SingularQuasiPeriodicityError(NHEdgeError, ValueError):
    """Quasi-static quasiperiodic kernel requested at alpha = 0."""


class AccuracyError(NHEdgeError, ArithmeticError):
    """A numerical target tolerance was not met.

    ``residual`` carries the achieved error estimate when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AssemblyError(NHEdgeError, ArithmeticError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class DegenerateBandError(NHEdgeError, ArithmeticError):
    """Band gap closes (exceptional point or crossing) on the sampled grid."""


class ExceptionalPointError(DegenerateBandError):
    pass


class GaugeUndefinedError(NHEdgeError, ArithmeticError):
    pass


class IllConditionedLoopError(NHEdgeError, ArithmeticError):
    pass


class SingularWindingError(NHEdgeError, ValueError):
    pass


class SingularMatrixError(NHEdgeError, ArithmeticError):
    pass


class NoFlatBandError(NHEdgeError, LookupError):
    """Neither defect eigenvalue branch is constant in alpha."""


class InconsistentRootsError(NHEdgeError, ArithmeticError):
    pass


class NotFoundError(NHEdgeError, LookupError):
    pass


class ConfigError(NHEdgeError, ValueError):
    pass
