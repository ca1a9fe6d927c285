"""Exception hierarchy shared by every layer of the bridge."""

from __future__ import annotations


class StatBridgeError(Exception):
    """Base class; the shell reports these as ``error: <message>``."""


class WorkspaceError(StatBridgeError):
    pass


class DatasetFormatError(WorkspaceError):
    pass


class GateError(StatBridgeError):
    pass


class GuestError(StatBridgeError):
    """Runtime failure inside the guest evaluator."""


class GuestSyntaxError(GuestError):
    def __init__(self, message: str, line: int = 0, col: int = 0) -> None:
        self.line = line
        self.col = col
        where = f" at line {line}, column {col}" if line else ""
        super().__init__(f"syntax: {message}{where}")
        self.bare_message = message


class IncompleteInput(GuestSyntaxError):
    """The source ended while the grammar still expected more tokens."""


class BridgeError(StatBridgeError):
    pass


class EnvError(StatBridgeError):
    pass


class ShellError(StatBridgeError):
    pass
