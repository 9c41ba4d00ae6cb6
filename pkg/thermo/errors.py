"""Exception hierarchy for the thermo package.

Every error carries the process exit code the CLI maps it to.
"""


class ThermoError(Exception):
    """Base class for all thermo-scope errors."""

    exit_code = 1


class ConfigError(ThermoError, ValueError):
    """Invalid model, alphabet or command configuration."""

    exit_code = 2


class AlphabetError(ConfigError):
    """Malformed alphabet or transition table."""

    pass


class DimensionMismatch(ConfigError):
    """Parameter vector does not match the potential dimension."""

    pass


class NumericalError(ThermoError):
    """A numerical procedure failed or its hypotheses do not hold."""

    exit_code = 3


class NotMixing(NumericalError):
    """No boolean power of the transition table up to the cap is full."""

    pass


class NoConvergence(NumericalError):
    """An iterative solver hit its iteration budget."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class NonSimpleLeading(NumericalError):
    """The leading eigenvalue is not separated from the rest of the spectrum."""

    pass


class AmbiguousBoundary(NumericalError):
    """The radial slope test could not classify an entropy evaluation."""

    pass


class DegenerateMaximum(NumericalError):
    """A maximizer has a singular Hessian where non-degeneracy is required."""

    pass


class DepthUnsupported(NumericalError):
    """Potential depth not supported by the requested method."""

    pass


class Unsupported(NumericalError):
    """The requested computation is not defined for this model."""

    pass


class LowESS(NumericalError):
    """Importance sampling collapsed below the effective sample size floor."""

    def __init__(self, message: str, ess: float):
        super().__init__(message)
        self.ess = ess


class LaplaceHypothesisError(NumericalError):
    """n * b_n**alpha is too small for the Laplace tail asymptotics."""

    pass


class CapExceeded(ThermoError):
    """An enumeration or dynamic-programming table exceeds its size cap."""

    exit_code = 4
