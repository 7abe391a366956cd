"""Exception hierarchy shared across the engine.

Every error that can cross a module boundary derives from EngineError so
callers (CLI, HTTP service) can map failures onto exit codes / response
codes without inspecting messages.
"""


class EngineError(Exception):
    """Base class for all engine failures."""

    code = "ENGINE_ERROR"


class ValidationError(EngineError):
    """Malformed input: bad schema, unknown variable, out-of-domain value,
    unparseable file, violated precondition."""

    code = "VALIDATION"


class ConditioningOnNull(EngineError):
    """A conditional probability was requested against an event with zero
    empirical mass and no smoothing to fall back on."""

    code = "CONDITIONING_ON_NULL"


class NotIdentifiable(EngineError):
    """The requested causal quantity cannot be identified from data with
    the available graph (no admissible adjustment set, or an inadmissible
    context/adjustment was supplied)."""

    code = "NOT_IDENTIFIABLE"


class ProtocolError(EngineError):
    """A black-box backend misbehaved: process died, reply malformed,
    prediction outside the declared outcome domain, or timeout."""

    code = "PROTOCOL"


class FitError(EngineError):
    """Model fitting failed (non-convergence, degenerate outcome column)."""

    code = "FIT"
