"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
NumericsError (and subclasses) -> 3, I/O problems -> 4.
"""


class KvicsekError(Exception):
    """Base class for all package errors."""


class ConfigError(KvicsekError):
    """Invalid configuration: unknown preset, malformed config file, bad flag."""


class NumericsError(KvicsekError):
    """A numerical assertion built into a solver failed (NaN, drift, ...)."""


class StepSizeError(NumericsError):
    """Explicit sub-step advanced with a time step violating its guard."""


class SandwichViolation(NumericsError):
    """The hypocoercivity comparison bounds failed; signals a convention bug."""
