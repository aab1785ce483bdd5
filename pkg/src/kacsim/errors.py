"""Exception types shared across the package."""


class KacsimError(Exception):
    """Base class for all package errors."""


class KernelSpecError(KacsimError, ValueError):
    """A kernel or law specification is malformed (not a hypothesis failure)."""


class DomainError(KacsimError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ClassificationError(KacsimError, ValueError):
    """An initial law does not satisfy the requested tail hypothesis."""


class UnsupportedError(KacsimError, NotImplementedError):
    """The requested combination of inputs is not supported."""


class StateError(KacsimError, RuntimeError):
    """An object is not in a state that allows the operation."""


class InsufficientDataError(KacsimError, ValueError):
    pass


class CostLimitError(KacsimError, RuntimeError):
    """The expected cost of a simulation exceeds the configured cap."""


class DegenerateError(KacsimError, ValueError):
    """The weights vanish identically, so the fixed-point map is trivial."""
