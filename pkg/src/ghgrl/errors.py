"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage errors -> 1, DataError -> 2,
BackendError -> 3.
"""


class GhgrlError(Exception):
    """Base class for all package-specific errors."""


class DataError(GhgrlError):
    """Invalid or inconsistent input data (files, graphs, shapes)."""


class BackendError(GhgrlError):
    """A remote or mock backend failed after exhausting retries."""
