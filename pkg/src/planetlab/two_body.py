"""Keplerian two-body machinery.

Units: gravitational constant G = 1. Planet ``i`` (0-based) has reduced mass
``mm[i] = m0*m_i/(m0 + mu*m_i)`` and attracting mass ``MM[i] = m0 + mu*m_i``,
so that its two-body energy is ``|y|^2/(2 mm) - mm MM/|x|`` and its Delaunay
action is ``Lambda = mm*sqrt(MM*a)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SystemMasses:
    """Sun mass ``m0``, perturbation scale ``mu`` and planet mass factors ``m``."""

    m: tuple[float, ...]
    mu: float = 1e-3
    m0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(float(v) for v in np.atleast_1d(self.m)))
        if self.m0 <= 0:
            raise DomainError(f"sun mass must be positive, got {self.m0}")
        if self.mu < 0:
            raise DomainError(f"mu must be non-negative, got {self.mu}")
        if any(v <= 0 for v in self.m):
            raise DomainError(f"planet mass factors must be positive, got {self.m}")

    @property
    def n(self) -> int:
        return len(self.m)

    @property
    def reduced_m(self) -> np.ndarray:
        m = np.asarray(self.m)
        return self.m0 * m / (self.m0 + self.mu * m)

    @property
    def reduced_M(self) -> np.ndarray:
        return self.m0 + self.mu * np.asarray(self.m)


@dataclass(frozen=True, eq=False)
class EllipseElements:
    """One Keplerian ellipse with a point on it.

    ``P`` is the unit perihelion direction, ``N`` the unit normal of the
    orbital plane (motion is counterclockwise around ``N``) and ``ell`` the
    mean anomaly.
    """

    a: float
    e: float
    P: np.ndarray = field(repr=False)
    N: np.ndarray = field(repr=False)
    ell: float = 0.0

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        N = np.asarray(self.N, dtype=float)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "N", N)
        if not self.a > 0:
            raise DomainError(f"semi-major axis must be positive, got {self.a}")
        if not 0.0 <= self.e < 1.0:
            raise DomainError(f"eccentricity must lie in [0, 1), got {self.e}")
        if abs(np.linalg.norm(P) - 1) > 1e-9 or abs(np.linalg.norm(N) - 1) > 1e-9:
            raise DomainError("perihelion direction and plane normal must be unit vectors")
        if abs(P @ N) > 1e-9:
            raise DomainError("perihelion direction must lie in the orbital plane")

    @property
    def Q(self) -> np.ndarray:
        return np.cross(self.N, self.P)

    @property
    def area_total(self) -> float:
        return np.pi * self.a**2 * np.sqrt(1.0 - self.e**2)


def solve_kepler(ell, e, max_newton: int = 50):
    """Eccentric anomaly ``E`` with ``E - e sin E = ell (mod 2 pi)``.

    Vectorized over ``ell``. Newton iteration seeded at ``ell + e sin ell``;
    entries that have not converged after ``max_newton`` steps are finished
    by bisection. The result lies in ``[0, 2 pi)``.
    """
    e = float(e)
    if not 0.0 <= e < 1.0:
        raise DomainError(f"eccentricity must lie in [0, 1), got {e}")
    scalar = np.ndim(ell) == 0
    M = np.mod(np.asarray(ell, dtype=float), TWO_PI)
    M = np.where(M >= TWO_PI, 0.0, M)
    E = M + e * np.sin(M)
    for _ in range(max_newton):
        delta = (E - e * np.sin(E) - M) / (1.0 - e * np.cos(E))
        E = E - delta
        if np.all(np.abs(delta) <= 4e-16 * (1.0 + np.abs(E))):
            break
    bad = ~(np.abs(E - e * np.sin(E) - M) < 1e-13) | (E < 0) | (E >= TWO_PI)
    if np.any(bad):
        E = np.array(E, copy=True)
        E[bad] = _bisect_kepler(M[bad], e)
    E = np.mod(E, TWO_PI)
    E = np.where(E >= TWO_PI, 0.0, E)
    return float(E) if scalar else E


def _bisect_kepler(M, e):
    lo = np.zeros_like(M)
    hi = np.full_like(M, TWO_PI)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        f = mid - e * np.sin(mid) - M
        lo = np.where(f < 0, mid, lo)
        hi = np.where(f < 0, hi, mid)
    return 0.5 * (lo + hi)


def orbit_points(el: EllipseElements, E) -> np.ndarray:
    """Positions on the ellipse at eccentric anomalies ``E`` (shape ``(..., 3)``)."""
    E = np.asarray(E, dtype=float)
    beta = np.sqrt(1.0 - el.e**2)
    u = el.a * (np.cos(E) - el.e)
    v = el.a * beta * np.sin(E)
    return u[..., None] * el.P + v[..., None] * el.Q


def orbit_momenta(el: EllipseElements, E, reduced_m: float, reduced_M: float) -> np.ndarray:
    """Momenta ``mm*sqrt(MM/a^3) * dx/dell`` at eccentric anomalies ``E``."""
    E = np.asarray(E, dtype=float)
    beta = np.sqrt(1.0 - el.e**2)
    scale = reduced_m * np.sqrt(reduced_M / el.a**3) * el.a / (1.0 - el.e * np.cos(E))
    u = -np.sin(E) * scale
    v = beta * np.cos(E) * scale
    return u[..., None] * el.P + v[..., None] * el.Q


def elements_to_cartesian(el: EllipseElements, masses: SystemMasses, body_index: int):
    """Kepler map for one body: returns ``(y, x)``."""
    E = solve_kepler(el.ell, el.e)
    x = orbit_points(el, E)
    y = orbit_momenta(el, E, masses.reduced_m[body_index], masses.reduced_M[body_index])
    return y, x


def cartesian_to_elements(y, x, masses: SystemMasses, body_index: int) -> EllipseElements:
    """Inverse Kepler map for one body.

    Near-circular orbits are handled by recovering the perihelion from the
    true anomaly, so ``(P, ell)`` stay consistent with ``x`` even when the
    eccentricity is at round-off level.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    mm = masses.reduced_m[body_index]
    MM = masses.reduced_M[body_index]
    r = np.linalg.norm(x)
    if r == 0:
        raise DomainError(f"body {body_index + 1}: position at the origin")
    energy = y @ y / (2 * mm) - mm * MM / r
    if not energy < 0:
        raise DomainError(f"body {body_index + 1}: orbit is not bound (energy {energy:.3e})")
    C = np.cross(x, y)
    c = np.linalg.norm(C)
    if c <= 1e-14 * r * np.linalg.norm(y):
        raise DomainError(f"body {body_index + 1}: rectilinear orbit")
    a = -mm * MM / (2 * energy)
    N = C / c
    ecosE = 1.0 - r / a
    esinE = (x @ y) / (mm * np.sqrt(MM * a))
    e = np.hypot(ecosE, esinE)
    if e >= 1.0:
        raise DomainError(f"body {body_index + 1}: eccentricity {e} not below 1")
    E = np.arctan2(esinE, ecosE)
    f = np.arctan2(np.sqrt(1.0 - e * e) * np.sin(E), np.cos(E) - e)
    xhat = x / r
    P = np.cos(f) * xhat - np.sin(f) * np.cross(N, xhat)
    P = P - (P @ N) * N
    P /= np.linalg.norm(P)
    ell = np.mod(E - esinE, TWO_PI)
    ell = 0.0 if ell >= TWO_PI else ell
    return EllipseElements(a=a, e=e, P=P, N=N, ell=float(ell))


def angular_momentum(el: EllipseElements, masses: SystemMasses, body_index: int) -> np.ndarray:
    """``C = x cross y``, constant along the ellipse."""
    lam = lambda_from_a(el.a, masses, body_index)
    return lam * np.sqrt(1.0 - el.e**2) * el.N


def lambda_from_a(a, masses: SystemMasses, body_index: int):
    return masses.reduced_m[body_index] * np.sqrt(masses.reduced_M[body_index] * a)


def a_from_lambda(lam, masses: SystemMasses, body_index: int):
    mm = masses.reduced_m[body_index]
    return lam**2 / (mm**2 * masses.reduced_M[body_index])


def two_body_energy(y, x, masses: SystemMasses, body_index: int) -> float:
    y = np.asarray(y, dtype=float)
    mm = masses.reduced_m[body_index]
    return y @ y / (2 * mm) - mm * masses.reduced_M[body_index] / np.linalg.norm(x)


def keplerian_energy(Lambda, masses: SystemMasses) -> float:
    """Sum of the integrated two-body energies ``-mm^3 MM^2 / (2 Lambda^2)``."""
    Lambda = np.asarray(Lambda, dtype=float)
    if np.any(Lambda <= 0):
        raise DomainError("Lambda actions must be positive")
    mm = masses.reduced_m
    MM = masses.reduced_M
    return float(-np.sum(mm**3 * MM**2 / (2 * Lambda**2)))
