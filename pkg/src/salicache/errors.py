"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, FileFormatError and
OSError -> 2, InvariantViolation (and anything unexpected) -> 3.
"""


class SaliCacheError(Exception):
    """Base class for all package errors."""


class ConfigError(SaliCacheError):
    """Invalid configuration: bad thresholds, empty method list, unknown scenario."""


class FileFormatError(SaliCacheError):
    """An input file exists but does not parse (bad PPM header, malformed manifest)."""


class InvariantViolation(SaliCacheError):
    """An internal consistency check failed; indicates a bug, not bad input."""
