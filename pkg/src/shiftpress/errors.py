"""Exception types shared across the package.

The CLI maps PreconditionError to exit code 2 and ConvergenceError to 3.
"""


class PreconditionError(ValueError):
    """An operation was called outside its stated domain."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance within its budget."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class EnumerationCapError(PreconditionError):
    """A word enumeration would exceed the configured cap."""
