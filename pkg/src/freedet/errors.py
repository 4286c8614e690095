"""Exception types shared across the toolkit."""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all freedet errors."""


class ValidationError(ToolkitError):
    """Input data violates a documented invariant."""


class ParseError(ValidationError):
    """A file could not be parsed; carries location context."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" [{loc}]"
        super().__init__(f"{message}{loc}")
        self.path = path
        self.line = line


class ReferentialIntegrityError(ValidationError):
    """A record references an id that does not exist."""


class ContractError(ToolkitError):
    """A caller or callback violated an API precondition."""


class InfeasibleError(ToolkitError):
    """The requested assignment problem has no feasible solution."""
