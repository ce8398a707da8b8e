"""Uniform array view of the charts and the chart-level verification tools."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import DomainError
from ..planetary_system import CartesianState
from ..two_body import SystemMasses
from .delaunay import DelaunayCoords, from_delaunay, to_delaunay
from .geometry import TWO_PI
from .poincare import PoincareCoords, from_poincare, rotate_poincare, to_poincare
from .pstar import PStarCoords, from_pstar, reflect_pstar, to_pstar

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Chart:
    """A canonical chart seen as ``array <-> CartesianState``.

    Arrays are ordered ``(coordinates..., momenta...)`` so that the symplectic
    form is ``sum d(momentum) ^ d(coordinate)`` in both charts. ``angle_mask``
    flags the entries that live on the circle.
    """

    name: str
    forward: Callable[[CartesianState, SystemMasses], np.ndarray]
    inverse: Callable[[np.ndarray, SystemMasses], CartesianState]
    angle_mask: Callable[[int], np.ndarray]


def _mask(n_blocks_angle):
    def mask(n):
        m = np.zeros(6 * n, dtype=bool)
        m[: n_blocks_angle * n] = True
        return m

    return mask


CARTESIAN = Chart(
    "cartesian",
    lambda s, m: s.flat(),
    lambda z, m: CartesianState.from_flat(z),
    _mask(0),
)
DELAUNAY = Chart(
    "delaunay",
    lambda s, m: to_delaunay(s, m).to_array(),
    lambda z, m: from_delaunay(DelaunayCoords.from_array(z), m),
    _mask(3),
)
POINCARE = Chart(
    "poincare",
    lambda s, m: to_poincare(s, m).to_array(),
    lambda z, m: from_poincare(PoincareCoords.from_array(z), m),
    _mask(1),
)
PSTAR = Chart(
    "pstar",
    lambda s, m: to_pstar(s, m).to_array(),
    lambda z, m: from_pstar(PStarCoords.from_array(z), m),
    _mask(3),
)
CHARTS = {c.name: c for c in (CARTESIAN, DELAUNAY, POINCARE, PSTAR)}


def symplectic_matrix(dim: int) -> np.ndarray:
    half = dim // 2
    omega = np.zeros((dim, dim))
    omega[:half, half:] = -np.eye(half)
    omega[half:, :half] = np.eye(half)
    return omega


def jacobian(chart: Chart, z0, masses: SystemMasses, h_rel: float = 1e-3, levels: int = 24) -> np.ndarray:
    """Central-difference Jacobian of ``chart.inverse`` at ``z0`` with per-column step selection.

    Each column uses the fourth-order stencil at steps ``h_rel * scale / 2**j``
    (``scale`` is ``1`` for angles and the coordinate magnitude for momenta,
    steps are powers of two). The estimate whose neighbour at the next level
    agrees best is kept, which balances truncation near the chart boundary
    against rounding. Levels whose stencil leaves the chart are skipped.
    """
    z0 = np.asarray(z0, dtype=float)
    n = z0.size // 6
    angles = chart.angle_mask(n)
    scale = np.where(angles, 1.0, np.maximum(np.abs(z0), 1e-3 * np.max(np.abs(z0[~angles]), initial=1.0)))
    base = 2.0 ** np.round(np.log2(h_rel * scale))

    def at(k, offset):
        z = z0.copy()
        z[k] += offset
        return chart.inverse(z, masses).flat()

    def stencil(k, h):
        try:
            d1 = at(k, h) - at(k, -h)
            d2 = at(k, 2 * h) - at(k, -2 * h)
        except DomainError:
            return None
        return (8 * d1 - d2) / (12 * h)

    cols = []
    for k in range(z0.size):
        best, best_gap, since_best, prev = None, np.inf, 0, None
        for j in range(levels):
            est = stencil(k, base[k] * 0.5**j)
            if est is not None and prev is not None:
                gap = np.max(np.abs(est - prev))
                if gap < best_gap:
                    best, best_gap, since_best = est, gap, 0
                else:
                    since_best += 1
                    if since_best >= 2:
                        break
            prev = est
        if best is None:
            raise DomainError(f"no admissible difference step for coordinate {k}")
        cols.append(best)
    return np.stack(cols, axis=1)


def symplecticity_defect(chart: Chart, state: CartesianState, masses: SystemMasses, h_rel: float = 1e-3) -> float:
    """``max |J^T Omega J - Omega|`` for the chart-to-Cartesian map at ``state``."""
    J = jacobian(chart, chart.forward(state, masses), masses, h_rel)
    omega = symplectic_matrix(J.shape[0])
    return float(np.max(np.abs(J.T @ omega @ J - omega)))


def symplecticity_test(chart: Chart | str, points, masses: SystemMasses, h_rel: float = 1e-3):
    """Maximum symplecticity defect over ``points``; points outside the chart are skipped.

    Returns ``(max_defect, skipped)`` where ``skipped`` lists ``(index, reason)``.
    """
    chart = CHARTS[chart] if isinstance(chart, str) else chart
    worst = 0.0
    skipped = []
    for k, state in enumerate(points):
        try:
            worst = max(worst, symplecticity_defect(chart, state, masses, h_rel))
        except DomainError as exc:
            log.info("skipping point %d: %s", k, exc)
            skipped.append((k, str(exc)))
    return worst, skipped


def round_trip_error(chart: Chart | str, state: CartesianState, masses: SystemMasses) -> float:
    """Relative error of ``inverse(forward(state))`` in the max norm, per block (x, y)."""
    chart = CHARTS[chart] if isinstance(chart, str) else chart
    back = chart.inverse(chart.forward(state, masses), masses)
    ex = np.max(np.abs(back.x - state.x)) / np.max(np.abs(state.x))
    ey = np.max(np.abs(back.y - state.y)) / np.max(np.abs(state.y))
    return float(max(ex, ey))


def coordinate_round_trip_error(chart: Chart | str, z, masses: SystemMasses) -> float:
    """``forward(inverse(z))`` versus ``z``: relative for momenta, circular for angles."""
    chart = CHARTS[chart] if isinstance(chart, str) else chart
    z = np.asarray(z, dtype=float)
    back = chart.forward(chart.inverse(z, masses), masses)
    angles = chart.angle_mask(z.size // 6)
    d = np.abs(back - z)
    d[angles] = np.minimum(np.mod(d[angles], TWO_PI), TWO_PI - np.mod(d[angles], TWO_PI))
    scale = np.where(angles, 1.0, np.max(np.abs(z[~angles])))
    return float(np.max(d / scale))


def reflect_state(state: CartesianState) -> CartesianState:
    """``(y2, x2) -> (-y2, -x2)`` for every body."""
    R = np.diag([1.0, -1.0, 1.0])
    return state.transformed(R)


def apply_reflection(coords: PStarCoords) -> PStarCoords:
    return reflect_pstar(coords)


@dataclass(frozen=True)
class DalembertReport:
    parity_defects: tuple[float, float, float]
    equilibrium_gradient: float
    rotation_defect: float

    @property
    def max_parity(self) -> float:
        return max(self.parity_defects)


def dalembert_parity_test(secular, Lambda, zs, h: float = 1e-4, rotations=None) -> DalembertReport:
    """Check the parities of a secular function ``secular(Lambda, z)`` in Poincare variables.

    ``z = (eta, xi, p, q)``. Sign patterns checked:
    ``(eta,-xi,-p,q)``, ``(-eta,xi,p,-q)``, ``(eta,xi,-p,-q)``. Also reports the
    central-difference gradient at ``z = 0`` and the invariance under the
    rotation action ``(eta, xi), (p, q) -> R(-g)`` for the angles in ``rotations``.
    """
    Lambda = np.asarray(Lambda, dtype=float)
    n = Lambda.size
    patterns = [
        np.concatenate([np.ones(n), -np.ones(n), -np.ones(n), np.ones(n)]),
        np.concatenate([-np.ones(n), np.ones(n), np.ones(n), -np.ones(n)]),
        np.concatenate([np.ones(n), np.ones(n), -np.ones(n), -np.ones(n)]),
    ]
    defects = [0.0, 0.0, 0.0]
    rot_defect = 0.0
    rotations = [] if rotations is None else rotations
    for z in zs:
        z = np.asarray(z, dtype=float)
        f0 = secular(Lambda, z)
        for k, sign in enumerate(patterns):
            defects[k] = max(defects[k], abs(secular(Lambda, sign * z) - f0))
        for g in rotations:
            rz = rotate_poincare(PoincareCoords.from_z(Lambda, z), g).z
            rot_defect = max(rot_defect, abs(secular(Lambda, rz) - f0))
    grad = np.empty(4 * n)
    for k in range(4 * n):
        e = np.zeros(4 * n)
        e[k] = h
        grad[k] = (secular(Lambda, e) - secular(Lambda, -e)) / (2 * h)
    return DalembertReport(tuple(defects), float(np.linalg.norm(grad)), rot_defect)
