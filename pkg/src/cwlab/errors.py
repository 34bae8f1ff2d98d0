"""Exception hierarchy shared by all cwlab modules."""


class CwlabError(Exception):
    """Base class for all errors raised by cwlab."""


class DomainError(CwlabError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedRegimeError(CwlabError):
    """The requested quantity is undefined in this parameter regime
    (e.g. quasi-stationary objects at sub-critical temperature)."""


class DegenerateSpaceError(CwlabError):
    """The state space collapsed below the minimum usable size."""


class IrreducibilityError(CwlabError):
    """A chain that must be irreducible has a vanishing interior rate."""


class ConvergenceError(CwlabError):
    """An iterative solver exhausted its iteration budget.

    Carries the last residuals so callers can report how close the
    iteration got.
    """

    def __init__(self, message, resid_right=None, resid_left=None, iterations=None):
        super().__init__(message)
        self.resid_right = resid_right
        self.resid_left = resid_left
        self.iterations = iterations


class StarvationError(CwlabError):
    """All mass (or all Monte Carlo replicas) was killed before the
    requested time; the conditional quantity cannot be formed."""


class CouplingConstructionError(CwlabError):
    """A residual rate of the coupled process came out negative, meaning
    the rate envelope was violated at a visited state."""


class StepSizeError(CwlabError):
    """A fixed-step ODE integration failed its step-halving accuracy check."""


class CsvParseError(CwlabError):
    """A CSV file does not follow the expected schema."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number
