"""Exception types shared across the solver stack."""


class PintocError(Exception):
    """Base class for all library errors."""


class DimensionError(PintocError):
    """A vector or matrix does not have the declared shape."""


class DivergenceError(PintocError):
    """A dynamics rollout produced a non-finite state."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite state at rollout step {step}")


class InfeasibleError(PintocError):
    """A barrier term was evaluated at a point outside the strict interior."""

    def __init__(self, stage: int, component: int, value: float,
                 message: str | None = None):
        self.stage = stage
        self.component = component
        self.value = value
        super().__init__(
            message
            or f"constraint component {component} at stage {stage} is not strictly "
               f"satisfied (value {value:.6g} >= 0)"
        )


class DefinitenessError(PintocError):
    """A matrix required to be positive definite failed to factorize."""

    def __init__(self, stage: int, what: str):
        self.stage = stage
        self.what = what
        super().__init__(f"{what} is not positive definite at stage {stage}")


class ConditioningError(PintocError):
    """A linear system inside an associative combine was singular."""


class SolverStalledError(PintocError):
    """Regularization grew past its ceiling without producing a usable step."""


class DerivativeCheckError(PintocError):
    """An analytic derivative disagrees with its finite-difference estimate."""


class EmptySequenceError(PintocError):
    """An operation that needs at least one element received none."""
