"""Exception types raised by the simulators and the fitting engine."""


class CqedError(Exception):
    """Base class for package errors."""


class OutOfRangeError(CqedError, ValueError):
    """An input lies outside the domain where a model is valid."""


class NoFeatureError(CqedError):
    """A trace contains no dip or peak that could be fitted."""


class InsufficientSpanError(CqedError, ValueError):
    """A reference trace does not cover the requested frequency span."""


class ZeroBackgroundError(CqedError, ZeroDivisionError):
    """A background trace has a vanishing sample."""


class EigensolverError(CqedError):
    """The sparse eigensolver failed to converge."""

    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


class GridConvergenceError(CqedError):
    """Doubling the grid moved an eigenvalue by more than the tolerance."""

    def __init__(self, msg, shifts=None):
        super().__init__(msg)
        self.shifts = shifts


class FitError(CqedError):
    """Base class for fitting failures."""


class SingularJacobianError(FitError):
    """One or more parameters do not influence the residuals."""

    def __init__(self, params):
        self.params = list(params)
        super().__init__("unidentifiable parameters (zero Jacobian column): "
                         + ", ".join(self.params))


class ConfigError(CqedError, ValueError):
    """Configuration validation failed; carries every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
