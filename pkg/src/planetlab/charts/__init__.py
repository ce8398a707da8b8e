"""Canonical charts: Delaunay, Poincare and the rotation-reduced P* chart."""

from .atlas import CHARTS, Chart, jacobian, round_trip_error, symplecticity_defect
from .delaunay import DelaunayCoords, from_delaunay, to_delaunay
from .poincare import PoincareCoords, from_poincare, rotate_poincare, to_poincare
from .pstar import PStarCoords, from_pstar, planar_reduction, reflect_pstar, to_pstar

__all__ = [
    "CHARTS",
    "Chart",
    "DelaunayCoords",
    "PStarCoords",
    "PoincareCoords",
    "from_delaunay",
    "from_poincare",
    "from_pstar",
    "jacobian",
    "planar_reduction",
    "reflect_pstar",
    "rotate_poincare",
    "round_trip_error",
    "symplecticity_defect",
    "to_delaunay",
    "to_poincare",
    "to_pstar",
]
