"""Exception and warning classes shared across the package.

The CLI maps the three top-level families onto exit codes:
``ParameterError`` -> 2, ``DataError`` -> 3, ``NumericalError`` -> 4.
"""


class RobustGGMError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(RobustGGMError, ValueError):
    """A configuration value is outside its admissible range.

    Parameters
    ----------
    field : str
        Name of the offending field.
    message : str
        Human readable description.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ThresholdOrderError(ParameterError):
    """Lower trimming threshold exceeds the upper one."""

    def __init__(self, alpha, beta):
        self.alpha = alpha
        self.beta = beta
        super().__init__("alpha", f"alpha={alpha!r} exceeds beta={beta!r}")


class StateError(RobustGGMError, RuntimeError):
    """Operation not allowed in the estimator's current phase."""


class DataError(RobustGGMError, ValueError):
    """Malformed or non-finite input data."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(RobustGGMError, ArithmeticError):
    """A matrix factorization or inversion failed."""

    def __init__(self, message, lambda_min=None):
        self.lambda_min = lambda_min
        if lambda_min is not None:
            message = f"{message} (lambda_min={lambda_min:.3e})"
        super().__init__(message)


class PenaltyError(NumericalError):
    """The sparsity penalty is too small to keep the dual iterate positive definite."""

    def __init__(self, message, minimal_lambda=None, lambda_min=None):
        self.minimal_lambda = minimal_lambda
        if minimal_lambda is not None:
            message = f"{message}; minimal admissible lambda is {minimal_lambda:.6g}"
        super().__init__(message, lambda_min=lambda_min)


class TheoryWarning(UserWarning):
    """Parameters fall outside the range where the error guarantees hold."""


class NonContractiveWarning(TheoryWarning):
    """Step size and eigenvalue bounds give a contraction rate >= 1."""


class DegenerateBudgetWarning(UserWarning):
    """Corruption budget rounds down to zero cells."""
