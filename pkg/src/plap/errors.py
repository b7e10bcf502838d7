"""Exception hierarchy for plap.

Every error raised by the library derives from :class:`PlapError`. Solver
loops attach the simulation time at which a step failed via the ``time``
attribute before re-raising.
"""

from __future__ import annotations


class PlapError(Exception):
    """Base class for all plap errors."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


# ---------------------------------------------------------------------------
# initial data / state construction
# ---------------------------------------------------------------------------

class BadRadius(PlapError):
    """Initial front radius is not strictly positive."""


class NonConcaveData(PlapError):
    """Tabulated initial profile violates concavity or positivity."""


class NonConvexPolygon(PlapError):
    """Marker polygon has a reflex (or degenerate) vertex."""


class ResolutionTooCoarse(PlapError):
    """Grid spacing does not resolve the domain (fewer than 16 cells across)."""


class OutsideDomain(PlapError):
    """Sample point lies outside the closed positivity set."""


# ---------------------------------------------------------------------------
# operator evaluation
# ---------------------------------------------------------------------------

class DegeneratePoint(PlapError):
    """Pointwise operator undefined: epsilon = 0 at a vanishing gradient."""


class IncompleteStencil(PlapError):
    """Divergence-form stencil needs at least two cells of margin."""


class SupportViolation(PlapError):
    """Test-function support crosses the free boundary or the time window."""


# ---------------------------------------------------------------------------
# hodograph strip
# ---------------------------------------------------------------------------

class NonMonotone(PlapError):
    """Profile gradient degenerates inside the boundary strip; inversion fails."""


class StripTooWide(PlapError):
    """Requested strip width d >= min(r_in, m/2)."""


class WrongBranch(PlapError):
    """Strip RHS evaluated off the front-side branch (h_y >= 0)."""


class GradientBoundViolated(PlapError):
    """Transformed-gradient constraint g1^2 >= 1 + |g'|^2 violated."""


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

class CflViolation(PlapError):
    """Explicit step exceeds the stability budget."""


class NegativeHeight(PlapError):
    """A height dropped below the -1e-12 clamp tolerance."""


class FrontCollapsed(PlapError):
    """Front radius or polygon collapsed below a representable size."""


class DegenerateFront(PlapError):
    """One-sided front gradient fell below the non-degeneracy guard."""


class StencilFailure(PlapError):
    """No fully-interior interpolation window within reach of a marker."""


class ConvexityLost(PlapError):
    """A marker polygon acquired a reflex vertex (negative cross product)."""

    def __init__(self, message: str, vertex: int | None = None, time: float | None = None):
        super().__init__(message, time)
        self.vertex = vertex


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

class InitialNestingViolated(PlapError):
    """Comparison pair does not satisfy the initial ordering hypothesis."""


class NotStrictlyNegative(PlapError):
    """Initial data admits no strictly negative subsolution constant."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

class ConfigError(PlapError):
    """Base class for configuration problems (exit code 4)."""


class ParseError(ConfigError):
    """Config file is not valid JSON."""


class SchemaError(ConfigError):
    """Unknown or missing config key; message carries the key path."""


class RangeError(ConfigError):
    """Config value outside its admissible range; message names the key."""
