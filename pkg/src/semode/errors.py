"""Exception types shared across the package."""


class SemodeError(Exception):
    """Base class for all package-specific errors."""


class StructuralError(SemodeError, ValueError):
    """A motif sequence or property layout is malformed (wrong lengths,
    illegal adjacency, illegal motif/transition pairing)."""


class DomainError(SemodeError, ValueError):
    """A numeric value violates its domain constraint (ordering, sign,
    open-interval bound)."""


class NumericError(SemodeError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class AmbiguityError(SemodeError, ValueError):
    """Shape extraction hit a region it cannot classify, e.g. a straight
    line whose curvature sign is undefined."""


class DegenerateInputError(SemodeError, ValueError):
    """Input that makes a linear system singular (coincident transition
    times and similar)."""


class ConvergenceError(SemodeError, RuntimeError):
    """An iterative routine failed to reach its target accuracy."""
