"""Exception types shared across the package."""

from __future__ import annotations


class DecoTreeError(Exception):
    """Base class for all package errors."""


class ParseError(DecoTreeError):
    """Malformed tree or preset text. ``position`` is a 0-based column."""

    def __init__(self, message: str, position: int, text: str = "") -> None:
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class NoiseProduct(DecoTreeError):
    """Two roots carrying a noise were multiplied."""


class KindMismatch(DecoTreeError):
    """Plus monomials built from different degree maps were multiplied."""


class BasisError(DecoTreeError):
    """A plus monomial cannot be expressed in the tilde basis."""


class BoundsTooLarge(DecoTreeError):
    """Enumeration would exceed the configured cap."""


class ConfigError(DecoTreeError):
    """Inconsistent or unreadable configuration."""


class UnknownTree(DecoTreeError):
    """A tree was requested that is not part of the relevant tree space."""
