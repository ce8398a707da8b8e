"""Poincare chart: mean longitudes ``lam`` with ``Lambda`` and rectangular ``(eta, xi, p, q)``.

    eta - i xi = sqrt(2 (Lambda - Gamma)) exp(i varpi)
    p   - i q  = sqrt(2 (Gamma - H))      exp(i h)

with ``varpi`` the longitude of perihelion and ``h`` the longitude of the
node. Canonical pairs are ``(Lambda, lam)``, ``(eta, xi)``, ``(p, q)``.
Everything is computed from the eccentricity vector and the plane normal,
so circular or equatorial orbits are regular points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ChartSingularityError, DomainError
from ..planetary_system import CartesianState
from ..two_body import (
    EllipseElements,
    SystemMasses,
    a_from_lambda,
    cartesian_to_elements,
    elements_to_cartesian,
    lambda_from_a,
)
from .geometry import K_AXIS, align_to_k, wrap


@dataclass(frozen=True, eq=False)
class PoincareCoords:
    Lambda: np.ndarray
    lam: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    p: np.ndarray
    q: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.eta, self.xi, self.p, self.q])

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.lam, self.xi, self.q, self.Lambda, self.eta, self.p])

    @classmethod
    def from_array(cls, arr) -> "PoincareCoords":
        lam, xi, q, Lambda, eta, p = np.split(np.asarray(arr, dtype=float), 6)
        return cls(Lambda=Lambda, lam=lam, eta=eta, xi=xi, p=p, q=q)

    @classmethod
    def from_z(cls, Lambda, z, lam=None) -> "PoincareCoords":
        Lambda = np.asarray(Lambda, dtype=float)
        eta, xi, p, q = np.split(np.asarray(z, dtype=float), 4)
        lam = np.zeros_like(Lambda) if lam is None else np.asarray(lam, dtype=float)
        return cls(Lambda=Lambda, lam=lam, eta=eta, xi=xi, p=p, q=q)


def to_poincare(state: CartesianState, masses: SystemMasses) -> PoincareCoords:
    n = state.n
    out = {k: np.empty(n) for k in ("Lambda", "lam", "eta", "xi", "p", "q")}
    for i in range(n):
        el = cartesian_to_elements(state.y[i], state.x[i], masses, i)
        N = el.N
        if N[2] <= 0:
            raise ChartSingularityError(f"body {i + 1}: retrograde orbit is outside the Poincare chart", body=i + 1)
        L = lambda_from_a(el.a, masses, i)
        G = L * np.sqrt(1.0 - el.e**2)
        Pp = align_to_k(N) @ el.P
        varpi = np.arctan2(Pp[1], Pp[0])
        ecc_scale = el.e * np.sqrt(2.0 * L / (1.0 + np.sqrt(1.0 - el.e**2)))
        inc_scale = np.sqrt(2.0 * G / (1.0 + N[2]))
        out["Lambda"][i] = L
        out["lam"][i] = wrap(el.ell + varpi)
        out["eta"][i] = ecc_scale * np.cos(varpi)
        out["xi"][i] = -ecc_scale * np.sin(varpi)
        out["p"][i] = -inc_scale * N[1]
        out["q"][i] = -inc_scale * N[0]
    return PoincareCoords(**out)


def poincare_to_ellipses(coords: PoincareCoords, masses: SystemMasses) -> list[EllipseElements]:
    els = []
    for i in range(len(coords.Lambda)):
        L = coords.Lambda[i]
        if not L > 0:
            raise DomainError(f"body {i + 1}: Lambda must be positive")
        ecc_action = 0.5 * (coords.eta[i] ** 2 + coords.xi[i] ** 2)
        r = ecc_action / L
        if r >= 1.0:
            raise DomainError(f"body {i + 1}: eccentricity action exceeds Lambda")
        G = L - ecc_action
        e = np.sqrt(r * (2.0 - r))
        inc_action = 0.5 * (coords.p[i] ** 2 + coords.q[i] ** 2)
        s = inc_action / G
        if s >= 1.0:
            raise ChartSingularityError(f"body {i + 1}: inclination reaches pi/2", body=i + 1)
        # N = (sin i sin h, -sin i cos h, cos i) written through (p, q) directly
        cos_i = 1.0 - s
        t = np.sqrt((1.0 + cos_i) / (2.0 * G))
        N = np.array([-coords.q[i] * t, -coords.p[i] * t, cos_i])
        N /= np.linalg.norm(N)
        varpi = np.arctan2(-coords.xi[i], coords.eta[i])
        P = align_to_k(N).T @ np.array([np.cos(varpi), np.sin(varpi), 0.0])
        els.append(EllipseElements(a=a_from_lambda(L, masses, i), e=e, P=P, N=N, ell=float(wrap(coords.lam[i] - varpi))))
    return els


def from_poincare(coords: PoincareCoords, masses: SystemMasses) -> CartesianState:
    pairs = [elements_to_cartesian(el, masses, i) for i, el in enumerate(poincare_to_ellipses(coords, masses))]
    return CartesianState(y=[p[0] for p in pairs], x=[p[1] for p in pairs])


def rotate_poincare(coords: PoincareCoords, g: float) -> PoincareCoords:
    """Image of a rotation by ``g`` about ``k``: ``lam + g`` and rectangular pairs rotated by ``-g``."""
    c, s = np.cos(g), np.sin(g)
    return PoincareCoords(
        Lambda=coords.Lambda,
        lam=wrap(coords.lam + g),
        eta=c * coords.eta + s * coords.xi,
        xi=-s * coords.eta + c * coords.xi,
        p=c * coords.p + s * coords.q,
        q=-s * coords.p + c * coords.q,
    )
