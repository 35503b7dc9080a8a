"""Exception types shared by the pipelines."""


class RCLError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(RCLError, ValueError):
    pass


class UnsupportedDimension(InvalidArgument):
    pass


class DegenerateBodyError(RCLError, ValueError):
    """The body has empty interior where a full-dimensional body is required."""


class DuplicatePointError(InvalidArgument):
    pass


class SolverError(RCLError, RuntimeError):
    """Raised when the equilibrium solver runs out of iterations.

    The best iterate and its KKT residual are kept so callers can inspect or
    salvage them.
    """

    def __init__(self, message, masses=None, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.masses = masses
        self.residual = residual
        self.iterations = iterations
