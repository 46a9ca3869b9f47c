"""Shared exception types for semnav."""

from __future__ import annotations

import typing as typ

if typ.TYPE_CHECKING:
    import pathlib


class SemnavError(RuntimeError):
    """Base error for semnav operations.

    Raised for requests that cannot be honoured as asked: invalid
    configuration, violated preconditions, unknown names. The CLI maps it to
    exit code 1.
    """


class OperationalError(SemnavError):
    """An operation could not run at all (unreadable input, non-finite loss).

    Distinct from a rejected request: the CLI exits 2 for these so scripts
    can tell "asked something invalid" from "could not complete".

    Attributes
    ----------
    operation:
        Stable identifier for the action that failed, such as
        ``"read-scene"`` or ``"ppo-update"``.
    resource:
        The affected input (a file path, an episode id) or ``None``.

    """

    def __init__(
        self,
        message: str,
        *,
        operation: str,
        resource: pathlib.Path | str | None = None,
    ) -> None:
        """Initialise with the human-readable message plus failure context."""
        super().__init__(message)
        self.operation = operation
        self.resource = resource


class ConfigError(SemnavError):
    """Raised when a run configuration is malformed or inconsistent."""

    def __init__(self, key: str, detail: str) -> None:
        """Initialise the error with the dotted key path and the problem."""
        super().__init__(f"invalid configuration at {key!r}: {detail}")
        self.key = key
        self.detail = detail
