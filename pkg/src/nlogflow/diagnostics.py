from __future__ import annotations

from dataclasses import asdict, dataclass

ERROR = "error"
INFO = "info"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    subject: str = ""
    severity: str = ERROR

    @property
    def is_error(self) -> bool:
        return self.severity == ERROR

    def as_dict(self) -> dict:
        return asdict(self)

    def __str__(self) -> str:
        subj = f" [{self.subject}]" if self.subject else ""
        return f"{self.severity}: {self.code}{subj}: {self.message}"


def has_errors(diagnostics) -> bool:
    return any(d.is_error for d in diagnostics)
