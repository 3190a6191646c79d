"""Exception hierarchy shared by the library and the command line."""


class V2GError(Exception):
    """Base class for every error raised by this package."""


class InputError(V2GError, ValueError):
    """Malformed or inconsistent input (bad lengths, violated invariants, parse errors)."""


class SolverError(V2GError, RuntimeError):
    """A numerical solver failed to reach its tolerance.

    ``diagnostics`` carries whatever residual information the solver had
    when it gave up, so callers can report it without re-running.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class BudgetExceededError(InputError):
    """An exhaustive enumeration would exceed its configured size guard."""
