"""Exception hierarchy shared by every nlogflow module."""

from __future__ import annotations


class NlogflowError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(NlogflowError, ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)


class CycleError(NlogflowError):
    def __init__(self, cycle: list[str], what: str = "subclass"):
        self.cycle = list(cycle)
        super().__init__(f"{what} cycle: {' -> '.join(self.cycle)}")


class DanglingRef(NlogflowError):
    pass


class UnknownClass(NlogflowError, KeyError):
    def __str__(self) -> str:
        return f"unknown class {self.args[0]!r}"


class UnknownProperty(NlogflowError, KeyError):
    def __str__(self) -> str:
        return f"unknown property {self.args[0]!r}"


class UnknownType(NlogflowError, KeyError):
    def __str__(self) -> str:
        return f"unknown type {self.args[0]!r}"


class UnknownParameter(NlogflowError, KeyError):
    def __str__(self) -> str:
        return f"unknown parameter {self.args[0]!r}"


class DuplicateService(NlogflowError):
    pass


# -- ingest ------------------------------------------------------------------

class XmlError(NlogflowError):
    pass


class MalformedXml(XmlError):
    pass


class MissingOperation(NlogflowError):
    pass


class AmbiguousOperation(NlogflowError):
    pass


class UnsupportedConstruct(NlogflowError):
    def __init__(self, construct: str, where: str = ""):
        self.construct = construct
        suffix = f" in {where}" if where else ""
        super().__init__(f"unsupported XSD construct <{construct}>{suffix}")


class RecursiveType(NlogflowError, RecursionError):
    pass


class DuplicateLeafName(NlogflowError):
    pass


# -- execution -----------------------------------------------------------------

class ExecutionError(NlogflowError):
    """Errors that abort a workflow run."""


class MissingValue(ExecutionError):
    pass


class FaultReceived(ExecutionError):
    def __init__(self, message: str, detail: str = ""):
        self.detail = detail
        super().__init__(message)


class MissingMarkup(ExecutionError):
    def __init__(self, markups: list[str]):
        self.markups = list(markups)
        super().__init__(f"result lacks linked markup(s): {', '.join(self.markups)}")


class TransportError(ExecutionError):
    pass


class CheckFailed(ExecutionError):
    pass


class BindError(NlogflowError):
    pass
