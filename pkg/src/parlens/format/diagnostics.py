from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int = 0
    col: int = 0
    code: str = "syntax"

    def to_json(self) -> dict:
        return {"severity": self.severity, "message": self.message, "line": self.line, "col": self.col}

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.severity}: {self.message}"


def error(message: str, line: int = 0, col: int = 0, code: str = "syntax") -> Diagnostic:
    return Diagnostic("error", message, line, col, code)


def warning(message: str, line: int = 0, col: int = 0, code: str = "warning") -> Diagnostic:
    return Diagnostic("warning", message, line, col, code)


class FormatError(ValueError):
    """A format source failed to parse or resolve."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.severity == "error"]
        super().__init__("; ".join(str(d) for d in errors) or "invalid format")


def render_diagnostics(diagnostics: list[Diagnostic]) -> str:
    """Plain text block suitable for feeding back into a repair prompt."""
    return "\n".join(str(d) for d in diagnostics)
