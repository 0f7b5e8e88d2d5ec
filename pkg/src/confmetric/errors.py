"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument violates a documented precondition."""


class ConeError(DomainError):
    """A vector lies outside the cone an operation needs.

    ``index`` is the first elementary symmetric function that failed to be
    positive (1-based), ``slack`` its value.
    """

    def __init__(self, message: str, index: int | None = None, slack: float | None = None):
        super().__init__(message)
        self.index = index
        self.slack = slack


class AdmissibilityError(DomainError):
    """A grid function leaves the cone at some node."""

    def __init__(self, message: str, node: int, slack: float):
        super().__init__(message)
        self.node = node
        self.slack = slack


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
