"""
Exception hierarchy for the sieve laboratory.
The CLI maps these onto exit codes, so every precondition failure raises one of them.
"""


class SieveLabError(Exception):
    """Base class for all laboratory errors."""


class DomainError(SieveLabError, ValueError):
    """An input violates a mathematical precondition (n = 0, inadmissible tuple, ...)."""


class UnsupportedMethodError(DomainError):
    """A numerical method was requested outside the dimensions it supports."""


class ResourceError(SieveLabError):
    """A computation would exceed a configured size or memory cap."""
