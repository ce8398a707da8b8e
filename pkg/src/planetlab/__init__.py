"""Canonical charts, secular averages and Diophantine budgets for the planetary (1+n)-body problem."""

from .errors import ChartSingularityError, CollisionError, DomainError, QuadratureError, StepError
from .planetary_system import CartesianState, hamiltonian, perturbation
from .sampling import make_rng
from .two_body import EllipseElements, SystemMasses

__version__ = "0.1.0"

__all__ = [
    "CartesianState",
    "ChartSingularityError",
    "CollisionError",
    "DomainError",
    "EllipseElements",
    "QuadratureError",
    "StepError",
    "SystemMasses",
    "hamiltonian",
    "make_rng",
    "perturbation",
]
