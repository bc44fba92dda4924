"""
Exception hierarchy.

Module-specific errors subclass these and live next to the code that raises
them; the CLI maps the shared categories onto exit codes.
"""
from __future__ import annotations
from typing import Any, Optional


class ModexpError(RuntimeError):
    pass


class DomainError(ModexpError, ValueError):
    """Argument outside the domain of the operation."""


class ParseError(ModexpError, ValueError):
    pass


class BudgetExceeded(ModexpError):
    pass


class NonConvergence(ModexpError):
    """An iterative method stopped without meeting its certificate."""

    def __init__(self, message: str, diagnostics: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
