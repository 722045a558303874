"""Diagnostics reported while loading reward machines, hierarchies and layouts"""

# SPDX-License-Identifier: BSD-3-Clause

from dataclasses import dataclass
from typing import IO, Iterable, List, Optional

import click

__all__ = ["Diagnostic", "InvalidSpecError", "errors_in", "raise_on_errors"]

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    """A located loader message.

    ``code`` names the violated rule (for example ``cycle`` or
    ``unreachable-state``) so callers can tell error classes apart.

    """

    severity: str
    origin: str
    line: int
    column: int
    message: str
    code: str = ""

    @property
    def is_error(self) -> bool:
        return self.severity == ERROR

    def __str__(self) -> str:
        where = f"{self.origin}:{self.line}:{self.column}"
        return f"{self.severity}:{where}: {self.message}"


def error(
    origin: str, line: int, column: int, message: str, code: str = ""
) -> Diagnostic:
    return Diagnostic(ERROR, origin, line, column, message, code)


def warning(
    origin: str, line: int, column: int, message: str, code: str = ""
) -> Diagnostic:
    return Diagnostic(WARNING, origin, line, column, message, code)


def errors_in(diagnostics: Iterable[Diagnostic]) -> List[Diagnostic]:
    return [d for d in diagnostics if d.is_error]


class InvalidSpecError(click.ClickException):
    """Raised when an asset fails to load; carries all its diagnostics."""

    exit_code = 2

    def __init__(self, diagnostics: Iterable[Diagnostic]) -> None:
        self.diagnostics = list(diagnostics)
        first = next((d for d in self.diagnostics if d.is_error), None)
        super().__init__(str(first) if first is not None else "invalid input")

    def show(self, file: Optional[IO] = None) -> None:
        for diagnostic in self.diagnostics:
            click.echo(str(diagnostic), file=file, err=True)

    @property
    def codes(self) -> List[str]:
        return sorted({d.code for d in self.diagnostics if d.is_error})


def raise_on_errors(diagnostics: List[Diagnostic]) -> None:
    if errors_in(diagnostics):
        raise InvalidSpecError(diagnostics)
