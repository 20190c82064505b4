"""Exception types shared across the package."""


class HvdError(Exception):
    """Base class for all package-specific errors."""


class InputFormatError(HvdError):
    """Malformed instance file or unparsable literal."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateInput(HvdError):
    """Input violates the general-position assumptions.

    Carries the witness points so callers can report exactly which
    coordinates caused the failure.
    """

    def __init__(self, message, witnesses=()):
        super().__init__(message)
        self.witnesses = tuple(witnesses)

    def __str__(self):
        base = super().__str__()
        if self.witnesses:
            pts = "; ".join(f"({p[0]}, {p[1]})" for p in self.witnesses)
            return f"{base} [witnesses: {pts}]"
        return base


class CollinearInput(DegenerateInput):
    """Three collinear points where a proper triangle is required."""


class DegenerateOverlap(DegenerateInput):
    """A query segment lies entirely on the bisector it is tested against."""


class TieOnBoundary(DegenerateInput):
    """A query point is exactly equidistant at a decision site."""


class SharedPoint(DegenerateInput):
    """Two clusters of one family share a point."""


class DuplicateId(HvdError):
    """Two clusters of one family carry the same identifier."""


class PreconditionViolated(HvdError):
    """A documented caller contract was broken (internal consistency check)."""
