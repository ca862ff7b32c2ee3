"""Exception hierarchy shared across the package."""


class SurvElicitError(Exception):
    """Base class for all survelicit errors."""


class ValidationError(SurvElicitError, ValueError):
    """Invalid user input: bad parameters, malformed files, broken preconditions."""


class FitError(SurvElicitError, RuntimeError):
    """An optimizer failed to converge. Carries the best residual seen."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InfeasibleSpecError(SurvElicitError, RuntimeError):
    """Prior rejection rate too high to sample. Names the dominant constraint."""

    def __init__(self, message, worst_constraint=None, acceptance_rate=None):
        super().__init__(message)
        self.worst_constraint = worst_constraint
        self.acceptance_rate = acceptance_rate


class ZeroEvidenceError(SurvElicitError, RuntimeError):
    """Every prior draw had zero likelihood; the evidence estimate is 0."""


class UnsummarizableError(SurvElicitError, RuntimeError):
    """Too many draws had an undefined functional to report a summary."""
