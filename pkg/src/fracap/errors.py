"""Exception taxonomy shared across the library.

Every error raised on a supported code path derives from :class:`FracapError`
so callers (and the CLI) can distinguish bad inputs from genuine numerical
failures.
"""

from __future__ import annotations


class FracapError(Exception):
    """Base class for all library-specific errors."""


class ConfigError(FracapError):
    """Malformed or schema-violating configuration input."""


# ---------------------------------------------------------------------------
# shape construction / sampling
# ---------------------------------------------------------------------------

class InvalidSpec(ConfigError):
    """Shape description is empty, unbounded, tangent to the floor, or
    otherwise outside the supported class."""


class InvalidTransform(ConfigError):
    """Transform would leave the supported class (e.g. vertical translation)."""


class SamplingFailure(FracapError):
    """Boundary sampling produced points inconsistent with the indicator."""


class EmptySlice(FracapError):
    """Requested horizontal cross-section does not meet the set."""


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

class NotOnBoundary(FracapError):
    """Evaluation point failed the boundary membership probe."""


class Overlap(FracapError):
    """Interaction integral requested for overlapping sets."""


# ---------------------------------------------------------------------------
# field post-processing
# ---------------------------------------------------------------------------

class StepTooSmall(FracapError):
    """Finite-difference step fell below the resolution floor."""


class InsufficientPairs(FracapError):
    """No admissible same-height point pairs for the deficit estimate."""


class DegenerateDirection(FracapError):
    """Moving-plane predicate never fails along the requested direction."""


class UnsupportedFamily(FracapError):
    """Perturbation family cannot be realized analytically."""


class NonConstantAngle(FracapError):
    """Contact angle is absent or varies along the contact line."""
