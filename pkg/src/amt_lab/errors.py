"""Exception hierarchy shared by every amt_lab module."""


class AMTError(Exception):
    """Base class; the CLI maps these to a nonzero exit and a JSON error."""

    kind = "error"

    def to_dict(self):
        return {"error": self.kind, "message": str(self)}


class ParameterError(AMTError, ValueError):
    """A configuration value is missing, malformed or out of range."""

    kind = "parameter"

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field

    def to_dict(self):
        d = super().to_dict()
        d["field"] = self.field
        return d


class InfeasibleScenarioError(AMTError):
    kind = "infeasible-scenario"


class WrongPhaseError(AMTError):
    kind = "wrong-phase"


class DegenerateGeometryError(AMTError):
    kind = "degenerate-geometry"


class ModelInconsistencyError(AMTError):
    kind = "model-inconsistency"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PhaseError(AMTError):
    """A phase solver failed inside simulate_landing; wraps the cause."""

    kind = "phase"

    def __init__(self, phase_index, cause):
        super().__init__(f"phase {phase_index}: {cause}")
        self.phase_index = phase_index
        self.cause = cause

    def to_dict(self):
        d = self.cause.to_dict() if isinstance(self.cause, AMTError) else super().to_dict()
        d["phase"] = self.phase_index
        return d


class NoSolutionError(AMTError):
    kind = "no-solution"

    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable

    def to_dict(self):
        d = super().to_dict()
        if self.achievable is not None:
            d["achievable"] = list(self.achievable)
        return d


class DivergenceError(AMTError):
    kind = "divergence"

    def __init__(self, time):
        super().__init__(f"simulation diverged at t={time:.6g} s")
        self.time = time


class SimulationTimeout(AMTError):
    """Raised when the oracle does not settle; carries the partial result."""

    kind = "timeout"

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class IncompleteLandingError(AMTError):
    kind = "incomplete-landing"
