"""Exception taxonomy shared across the package.

Every anticipated failure is an MtpError subclass; the CLI maps MtpError to
exit code 1 (user/validation error) and anything else to exit code 2
(internal error).
"""


class MtpError(Exception):
    """Base class for all anticipated errors raised by this package."""


class ShapeError(MtpError):
    """Operands have incompatible shapes; the message names both shapes."""


class ConfigError(MtpError):
    """A configuration value violates its contract."""


class DataError(MtpError):
    """Input data violates its contract (bad labels, bad indices, ...)."""


class FormatError(MtpError):
    """A binary or text file does not match its documented layout."""


class ValidationError(MtpError):
    """A manifest failed validation. Carries the full list of problems."""

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"{len(self.problems)} validation problem(s):\n{lines}")


class ContractError(MtpError):
    """An API was called in a way its contract forbids."""
