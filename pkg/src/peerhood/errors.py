"""Exception types raised by the library."""


class PeerhoodError(Exception):
    """Base class for library errors."""


class DegeneratePaymentError(PeerhoodError, ArithmeticError):
    """A report matched a peer inside a bin the public prior gives probability 0.

    This is the symptom of a partition space that is not bin-supported over
    the public prior.
    """


class SolverError(PeerhoodError, RuntimeError):
    """The apex solver failed to converge or its bracketing check failed."""

    def __init__(self, message, residuals=None, iterations=None):
        super().__init__(message)
        self.residuals = residuals
        self.iterations = iterations
