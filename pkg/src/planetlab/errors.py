"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class DomainError(ValueError):
    """Input lies outside the set where an operation is defined."""


class ChartSingularityError(DomainError):
    """A chart is evaluated too close to its singular set.

    ``body`` is the 1-based planet index when the singularity belongs to a
    single orbit; ``node`` names the vanishing node for the P* chart.
    """

    def __init__(self, message: str, body: int | None = None, node: str | None = None):
        super().__init__(message)
        self.body = body
        self.node = node


class CollisionError(DomainError):
    """Two bodies (or a body and the sun) came closer than the collision radius."""


class QuadratureError(RuntimeError):
    """Torus quadrature failed to reach its tolerance at the node cap."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class StepError(RuntimeError):
    """Implicit integrator stage equations did not converge."""
