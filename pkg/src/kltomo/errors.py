class PreconditionError(ValueError):
    """Arguments fall outside the range where an operation is defined."""


class ConvergenceError(ArithmeticError):
    """A quadrature or expansion did not reach its requested accuracy."""


class CheckFailure(RuntimeError):
    """A numerical verification step produced a result that rules out the computation."""
