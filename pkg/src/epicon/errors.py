"""Exception and warning types raised by epicon."""


class EpiconError(Exception):
    """Base class for all epicon errors."""


class UnknownPreset(EpiconError, KeyError):
    pass


class ParseError(EpiconError, ValueError):
    pass


class ValidationError(EpiconError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class GridMismatch(EpiconError, ValueError):
    pass


class NonFiniteState(EpiconError, ArithmeticError):
    pass


class ExponentNotSuperlinear(EpiconError, ValueError):
    pass


class ExponentNotLinear(EpiconError, ValueError):
    pass


class NotSIR(EpiconError, ValueError):
    """Raised by n = 1, rho = 0 formulas when called on another model."""


class DegenerateDenominator(EpiconError, ZeroDivisionError):
    pass


class NonconvexNu(EpiconError, ValueError):
    pass


class LinearCostUnsupported(EpiconError, ValueError):
    pass


class SearchSpaceTooLarge(EpiconError, ValueError):
    pass


class NoLinearComponents(EpiconError, ValueError):
    pass


class NotApplicable(EpiconError):
    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


class MaxItersExceeded(RuntimeWarning):
    """Warned (not raised) when a solver stops at max_iters; the best
    iterate is still returned with ``converged=False``."""
