"""Exception types shared across the package.

Plain ``ValueError`` is used for malformed arguments (non-permutations,
out-of-range indices, bad shapes).  The classes below mark failures that
carry domain meaning and that callers may want to catch selectively.
"""


class PclIndexError(Exception):
    """Base class for domain-level failures."""


class StructureError(PclIndexError):
    """A set system violates accessibility/augmentability mid-algorithm."""


class AssumptionError(PclIndexError):
    """Model parameters violate a regularity assumption required here."""


class DegeneracyError(PclIndexError):
    """A recursion hit a nonpositive denominator it cannot recover from."""


class UnsupportedModelError(PclIndexError):
    """The model lies outside the scope of the requested computation."""


class InfeasibleTargetError(PclIndexError):
    """A constrained-control target is outside the achievable range."""


class InternalConsistencyError(PclIndexError):
    """Two computation paths that must agree did not; indicates a bug
    or a silently violated precondition, never user error."""
