"""Exception taxonomy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, NumericalError -> 3,
OutputError -> 4.  DomainError covers bad physical inputs to individual
operations (negative lengths, points inside metal, out-of-band targets).
"""

from __future__ import annotations


class DomainError(ValueError):
    """An operation was called with physically invalid input."""


class ConfigError(ValueError):
    """Configuration text is malformed, has unknown keys, or violates invariants."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge or produced an invalid result."""


class BistableOperatingPoint(NumericalError):
    """The driven-cavity fixed point oscillates between two states.

    Physical near quench: the superconducting branch wants high stored energy,
    which breaks pairs and collapses the branch.  Carries both iterates so the
    sweep engine can record the collapsed (normal) one.
    """

    def __init__(self, message: str, iterate_a=None, iterate_b=None):
        super().__init__(message)
        self.iterate_a = iterate_a
        self.iterate_b = iterate_b


class OutputError(OSError):
    """Refusing to overwrite existing output, or other file I/O failure."""
