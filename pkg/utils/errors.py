"""Error hierarchy shared by every package.

Each error carries a stable machine-readable ``code`` and the process exit
status the command line maps it to. Packages subclass the three families
below next to the code that raises them.
"""

from __future__ import annotations


class SynthError(Exception):
    """Base class for every error the pipeline reports to its caller."""

    code = "ROOMSYNTH_ERROR"
    exit_status = 3

    def __init__(self, message: str, **context: object):
        super().__init__(message)
        self.message = message
        self.context = context

    def one_line(self) -> str:
        """Render as ``error=<CODE> <message>`` on a single line."""
        text = " ".join(self.message.split())
        return f"error={self.code} {text}"

    def within(self, where: str) -> "SynthError":
        """Prefix the message with the location the error surfaced in."""
        self.message = f"{where}: {self.message}"
        self.args = (self.message,)
        return self

    def __reduce__(self):
        # subclasses take extra constructor arguments; rebuild from state instead
        return _restore, (type(self), self.__dict__)


def _restore(cls: type, state: dict) -> SynthError:
    error = cls.__new__(cls)
    Exception.__init__(error, state.get("message", ""))
    error.__dict__.update(state)
    return error


class UsageError(SynthError):
    """Bad invocation or configuration."""

    code = "USAGE"
    exit_status = 1


class DataError(SynthError):
    """Input data or generated data that cannot be processed."""

    code = "DATA"
    exit_status = 2


class InvariantViolation(SynthError):
    """An internal consistency check failed."""

    code = "INVARIANT"
    exit_status = 3
