"""Exception hierarchy shared by all solvers.

The CLI maps these classes onto exit codes, so every failure raised by the
library belongs to exactly one of them.
"""


class ThinMagError(Exception):
    """Base class for all errors raised by thinmag."""


class InvalidArgument(ThinMagError, ValueError):
    pass


class InvalidGeometry(InvalidArgument):
    pass


class InvalidState(ThinMagError):
    pass


class AssemblyFailure(ThinMagError):
    def __init__(self, message, triangle_index=None):
        super().__init__(message)
        self.triangle_index = triangle_index


class SolverFailure(ThinMagError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepCollapse(SolverFailure):
    pass


class Diverged(SolverFailure):
    pass


class BudgetExceeded(ThinMagError):
    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending
