"""Exception types raised by the tiebreak library."""


class TiebreakError(Exception):
    """Base class for library errors."""


class SingularInformation(TiebreakError):
    """The information matrix is not numerically positive definite."""


class Infeasible(TiebreakError):
    """The constraint set admits no probability vector."""

    def __init__(self, message: str, certificate: str = ""):
        super().__init__(message)
        self.certificate = certificate


class NonConvergence(TiebreakError):
    """An iterative routine stopped before meeting its tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class MaxIterations(NonConvergence):
    """The solver hit its iteration cap."""


class NonIntegerBudget(TiebreakError):
    """A stratum's treated count p*k is not an integer."""


class HeterogeneousStratum(TiebreakError):
    """Treatment probabilities differ within a single stratum."""


class TooLarge(TiebreakError):
    """Problem too large for exhaustive search."""


class ZeroVariance(TiebreakError):
    """A covariate column has zero variance and cannot be standardized."""


class SchemaError(TiebreakError):
    """Input file does not follow the expected layout."""


class ConfigError(TiebreakError):
    """Run configuration is invalid."""
