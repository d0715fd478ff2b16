"""Exception hierarchy shared across the package."""

from __future__ import annotations


class LatpatError(Exception):
    """Base class for all latpat errors."""


class ConfigError(LatpatError):
    """Invalid configuration document or CLI option.

    ``pointer`` is a dotted key path into the offending document
    (e.g. ``model.stages[0].direction``); ``line`` is set when the
    underlying parser reports one.
    """

    def __init__(self, message, pointer=None, line=None):
        self.pointer = pointer
        self.line = line
        prefix = ""
        if pointer is not None:
            prefix = f"{pointer}: "
        if line is not None:
            prefix = f"line {line}: " + prefix
        super().__init__(prefix + message)


# -- graph construction -------------------------------------------------

class GraphError(LatpatError):
    pass


class DisconnectedGraphError(GraphError):
    pass


class SelfLoopError(GraphError):
    pass


class IndexOutOfRangeError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class EdgeListFormatError(GraphError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotBipartiteError(GraphError):
    pass


# -- numerics ------------------------------------------------------------

class EigenSolverFailure(LatpatError):
    pass


class NoConvergenceError(LatpatError):
    pass


class NotHurwitzError(LatpatError):
    """A state Jacobian has an eigenvalue with nonnegative real part."""


class SingularJacobianError(LatpatError):
    """The state Jacobian is singular at the evaluation point."""


class NoBracketError(LatpatError):
    """Scalar fixed-point bisection lost its sign bracket (non-monotone map)."""


class FixedPointIterationError(LatpatError):
    """Multi-input fixed-point search did not converge; carries the iterate trace."""

    def __init__(self, message, trace=()):
        self.trace = tuple(trace)
        super().__init__(message)


class MemoryGuardError(LatpatError):
    """Dense assembly refused because the problem exceeds the supported scale."""


# -- monotonicity certification ------------------------------------------

class CertificationError(LatpatError):
    pass


class ParityConflictError(CertificationError):
    """Two sampled points force opposite parities for the same sign variable pair."""

    def __init__(self, message, entry=None, witnesses=()):
        self.entry = entry
        self.witnesses = tuple(witnesses)
        super().__init__(message)


class GaugeViolationError(CertificationError):
    """No sign assignment reaches the required input/output orthant gauge."""


class MixedSignError(CertificationError):
    """A partial derivative is not strictly one-signed on the sampled domain."""

    def __init__(self, message, entry=None, witnesses=()):
        self.entry = entry
        self.witnesses = tuple(witnesses)
        super().__init__(message)


# -- simulation ------------------------------------------------------------

class DomainViolationError(LatpatError):
    """A trajectory left the invariant state domain beyond the projection slack."""


class StepFailureError(LatpatError):
    """The adaptive integrator could not meet the error tolerance at minimum step."""
