"""Exceptions shared across modules."""

from __future__ import annotations


class BudgetExceeded(Exception):
    """An exponential construction or oracle was refused; carries the size needed."""

    def __init__(self, message: str, required: int):
        super().__init__(message)
        self.required = required


class InstanceError(ValueError):
    """Malformed or unsupported instance input."""
