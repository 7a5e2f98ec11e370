"""Exception taxonomy shared across the package."""


class LagloopError(Exception):
    """Base class for all package-specific errors."""


class InvalidParams(LagloopError):
    """Input parameters violate a documented precondition."""


class PotentialSchemaError(InvalidParams):
    """A potential file failed schema or invariant validation."""


class TailLoss(LagloopError):
    """Truncation discarded more coefficient mass than the tolerance allows."""

    def __init__(self, message, lost=None):
        super().__init__(message)
        self.lost = lost


class AliasError(LagloopError):
    """Grid samples carry spectral content beyond the requested degree."""

    def __init__(self, message, tail_mass=None):
        super().__init__(message)
        self.tail_mass = tail_mass


class SingularInput(LagloopError):
    """Loop is numerically singular at some circle point."""


class NoConvergence(LagloopError):
    """An iterative solver exhausted its budget."""


class OutsideBigCell(LagloopError):
    """Birkhoff system numerically singular, input near the small cells."""

    def __init__(self, message, conditioning=None):
        super().__init__(message)
        self.conditioning = conditioning


class Resonant(LagloopError):
    """An ad-operator divisor fell below the resonance threshold."""


class OnBranchCut(LagloopError):
    """Evaluation point lies on the logarithm branch cut."""


class OutOfDomain(LagloopError):
    """Evaluation point lies outside the potential's disk of definition."""


class PoleOnPath(LagloopError):
    """Integration path passes through a pole or leaves the domain."""


class StepUnderflow(LagloopError):
    """Adaptive step size shrank below the resolvable minimum."""


class BoundarySample(LagloopError):
    """Finite-difference stencil does not fit inside the sampled domain."""
