"""Exception hierarchy shared by the numerical modules."""


class AcousticError(Exception):
    """Base class for all package errors."""


class HorizonSingular(AcousticError):
    """A null-coordinate integrand diverges inside the requested range."""


class QuadratureNonConvergent(AcousticError):
    """An adaptive quadrature failed to reach the requested tolerance."""


class ZeroCoupling(AcousticError):
    """The bath coupling vanishes, so the decoherence time is infinite."""


class OutOfRegime(AcousticError):
    """A perturbative closed form was asked for outside its validity range."""


class NoRoot(AcousticError):
    """The decoherence condition is never met below the search horizon.

    ``lower_bound`` holds the largest time that was checked.
    """

    def __init__(self, message, lower_bound=None):
        super().__init__(message)
        self.lower_bound = lower_bound


class StepFailure(AcousticError):
    """The characteristic integrator could not advance."""


class NonConvergentSum(AcousticError):
    """A mode sum did not converge under grid refinement."""


class DegenerateMode(AcousticError):
    """The closed-system single-mode correlation is numerically zero."""


class CovarianceNotPSD(AcousticError):
    """A noise covariance matrix has significantly negative eigenvalues."""


class ConfigError(AcousticError):
    """Invalid or unknown configuration entry."""
