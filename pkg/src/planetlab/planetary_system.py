"""Heliocentric Hamiltonian of the planetary (1+n)-body problem.

    H = sum_i (|y_i|^2/(2 mm_i) - mm_i MM_i/|x_i|)
        + mu * sum_{i<j} (y_i . y_j / m0 - m_i m_j / |x_i - x_j|)

The first sum is the Keplerian part, the pair sums are the indirect
(momentum coupling) and direct (Newtonian) parts of the perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CollisionError
from .two_body import SystemMasses


@dataclass(frozen=True, eq=False)
class CartesianState:
    """Heliocentric momenta ``y`` and positions ``x``, both of shape ``(n, 3)``."""

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1, 3)
        x = np.array(self.x, dtype=float).reshape(-1, 3)
        if y.shape != x.shape:
            raise ValueError(f"momenta {y.shape} and positions {x.shape} differ in shape")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def flat(self) -> np.ndarray:
        """Phase-space vector ``(x_flat, y_flat)``, positions first."""
        return np.concatenate([self.x.ravel(), self.y.ravel()])

    @classmethod
    def from_flat(cls, z) -> "CartesianState":
        z = np.asarray(z, dtype=float)
        half = z.size // 2
        return cls(y=z[half:].reshape(-1, 3), x=z[:half].reshape(-1, 3))

    def angular_momentum(self) -> np.ndarray:
        return np.cross(self.x, self.y).sum(axis=0)

    def transformed(self, Ry, Rx=None) -> "CartesianState":
        """Apply linear maps to every momentum (``Ry``) and position (``Rx``)."""
        Rx = Ry if Rx is None else Rx
        return CartesianState(y=self.y @ np.asarray(Ry).T, x=self.x @ np.asarray(Rx).T)


@dataclass(frozen=True)
class HamiltonianValue:
    total: float
    keplerian: float
    direct: float
    indirect: float


def default_collision_radius(state: CartesianState, masses: SystemMasses) -> float:
    """``1e-8`` times the smallest osculating semi-major axis (or distance if unbound)."""
    mm = masses.reduced_m
    MM = masses.reduced_M
    r = np.linalg.norm(state.x, axis=1)
    energy = np.einsum("ij,ij->i", state.y, state.y) / (2 * mm) - mm * MM / r
    with np.errstate(divide="ignore"):
        a = np.where(energy < 0, -mm * MM / (2 * energy), r)
    return 1e-8 * float(np.min(a))


def _pair_separations(x):
    i, j = np.triu_indices(x.shape[0], k=1)
    d = x[i] - x[j]
    return i, j, d, np.linalg.norm(d, axis=1)


def _check_collisions(x, r, dist, radius):
    if np.any(r < radius):
        body = int(np.argmin(r)) + 1
        raise CollisionError(f"body {body} within {radius:.3e} of the sun")
    if dist.size and np.any(dist < radius):
        raise CollisionError(f"planet pair closer than {radius:.3e}")


def evaluate(state: CartesianState, masses: SystemMasses, collision_radius: float | None = None) -> HamiltonianValue:
    """Energy split into Keplerian, direct and indirect parts."""
    y, x = state.y, state.x
    mm = masses.reduced_m
    MM = masses.reduced_M
    m = np.asarray(masses.m)
    if collision_radius is None:
        collision_radius = default_collision_radius(state, masses)
    r = np.linalg.norm(x, axis=1)
    i, j, _, dist = _pair_separations(x)
    _check_collisions(x, r, dist, collision_radius)
    keplerian = float(np.sum(np.einsum("ij,ij->i", y, y) / (2 * mm) - mm * MM / r))
    indirect = float(np.sum(np.einsum("ij,ij->i", y[i], y[j]))) / masses.m0
    direct = -float(np.sum(m[i] * m[j] / dist))
    total = keplerian + masses.mu * (direct + indirect)
    return HamiltonianValue(total=total, keplerian=keplerian, direct=direct, indirect=indirect)


def hamiltonian(state: CartesianState, masses: SystemMasses) -> float:
    return evaluate(state, masses).total


def perturbation(state: CartesianState, masses: SystemMasses) -> float:
    """``direct + indirect``, the function multiplying ``mu``."""
    v = evaluate(state, masses)
    return v.direct + v.indirect


def gradient(state: CartesianState, masses: SystemMasses, collision_radius: float | None = None):
    """Analytic ``(dH/dy, dH/dx)``, each of shape ``(n, 3)``."""
    y, x = state.y, state.x
    mm = masses.reduced_m
    MM = masses.reduced_M
    m = np.asarray(masses.m)
    if collision_radius is None:
        collision_radius = default_collision_radius(state, masses)
    r = np.linalg.norm(x, axis=1)
    i, j, d, dist = _pair_separations(x)
    _check_collisions(x, r, dist, collision_radius)

    ysum = y.sum(axis=0)
    dHdy = y / mm[:, None] + masses.mu * (ysum[None, :] - y) / masses.m0

    dHdx = (mm * MM / r**3)[:, None] * x
    pair = (m[i] * m[j] / dist**3)[:, None] * d
    coupling = np.zeros_like(x)
    np.add.at(coupling, i, pair)
    np.add.at(coupling, j, -pair)
    dHdx = dHdx + masses.mu * coupling
    return dHdy, dHdx
