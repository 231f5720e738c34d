"""Exception hierarchy shared by every module.

The CLI maps :class:`ValidationError` to exit code 2 and
:class:`ConvergenceError` to exit code 3.
"""


class WaveMultError(Exception):
    """Base class for all library errors."""


class ValidationError(WaveMultError, ValueError):
    """A precondition on inputs or configuration failed."""


class AliasingError(ValidationError):
    """A frequency-side construction exceeds the Nyquist guard."""


class GridMismatchError(ValidationError):
    """Two fields that must share a grid do not."""


class ConvergenceError(WaveMultError, ArithmeticError):
    """A numerical procedure failed its own convergence criterion.

    ``diagnostics`` carries whatever the failing routine measured.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
