"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: UsageError -> 2, ResourceError and
NumericalError -> 3. Anything else is a bug and escapes as a traceback.
"""


class RwreError(Exception):
    """Base class for expected failures."""


class UsageError(RwreError):
    """Caller violated a precondition (bad law, bad flag, wrong regime)."""


class ResourceError(RwreError):
    """A declared budget was exceeded (vertex cap, atom cap, retry cap)."""


class NumericalError(RwreError):
    """An iterative method failed to converge within its sweep budget."""
