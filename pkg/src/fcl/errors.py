"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` for bad input
(syntax, bounds, forbidden parameter values) and :class:`DomainError` for
numerical evaluation outside the region where a quantity is defined.  The
CLI maps them to exit codes 2 and 3.
"""


class FclError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(FclError):
    pass


class ParseError(ValidationError):
    def __init__(self, message: str, position: int | None = None, source: str | None = None):
        self.position = position
        self.source = source
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class DomainError(FclError, ArithmeticError):
    """Evaluation outside the domain of a field or formula."""


class ExpressionDomainError(DomainError):
    def __init__(self, message: str, subexpression: str):
        self.subexpression = subexpression
        super().__init__(f"{message} in '{subexpression}'")


class NotPositiveDefiniteError(DomainError):
    def __init__(self, minor: int, value: float):
        self.minor = minor
        self.value = value
        super().__init__(
            f"metric is not positive definite: leading minor of order {minor} is {value:.6g}")


class ConicDomainError(DomainError):
    """Direction outside the half-cone beta > eps_beta * alpha."""


class SingularityError(DomainError):
    pass


class EmptySampleError(DomainError):
    pass


class SampleEvaluationError(DomainError):
    def __init__(self, index: int, x, y, cause: Exception):
        self.index = index
        self.x = list(x)
        self.y = list(y)
        self.cause = cause
        super().__init__(f"sample {index} at x={self.x}, y={self.y}: {cause}")
