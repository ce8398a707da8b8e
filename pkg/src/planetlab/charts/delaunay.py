"""Delaunay action-angle chart ``(Lambda, Gamma, H, ell, g, h)``."""

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
from .geometry import I_AXIS, K_AXIS, oriented_angle, wrap

E_MIN = 1e-3
I_MIN = 1e-3


@dataclass(frozen=True, eq=False)
class DelaunayCoords:
    Lambda: np.ndarray
    Gamma: np.ndarray
    H: np.ndarray
    ell: np.ndarray
    g: np.ndarray
    h: np.ndarray

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.ell, self.g, self.h, self.Lambda, self.Gamma, self.H])

    @classmethod
    def from_array(cls, z) -> "DelaunayCoords":
        ell, g, h, Lambda, Gamma, H = np.split(np.asarray(z, dtype=float), 6)
        return cls(Lambda=Lambda, Gamma=Gamma, H=H, ell=ell, g=g, h=h)


def to_delaunay(state: CartesianState, masses: SystemMasses, e_min: float = E_MIN, i_min: float = I_MIN) -> DelaunayCoords:
    n = state.n
    out = {k: np.empty(n) for k in ("Lambda", "Gamma", "H", "ell", "g", "h")}
    for i in range(n):
        el = cartesian_to_elements(state.y[i], state.x[i], masses, i)
        if el.e <= e_min:
            raise ChartSingularityError(f"body {i + 1}: eccentricity {el.e:.2e} at or below {e_min}", body=i + 1)
        C = np.cross(state.x[i], state.y[i])
        G = np.linalg.norm(C)
        incl = np.arccos(np.clip(C[2] / G, -1.0, 1.0))
        if not i_min < incl < np.pi - i_min:
            raise ChartSingularityError(f"body {i + 1}: inclination {incl:.2e} too close to the reference plane", body=i + 1)
        node = np.cross(K_AXIS, C)
        out["Lambda"][i] = lambda_from_a(el.a, masses, i)
        out["Gamma"][i] = G
        out["H"][i] = C[2]
        out["ell"][i] = el.ell
        out["g"][i] = oriented_angle(C, node, el.P)
        out["h"][i] = oriented_angle(K_AXIS, I_AXIS, node)
    return DelaunayCoords(**out)


def delaunay_to_ellipses(coords: DelaunayCoords, masses: SystemMasses) -> list[EllipseElements]:
    els = []
    for i in range(len(coords.Lambda)):
        L, G, H = coords.Lambda[i], coords.Gamma[i], coords.H[i]
        if not (L > 0 and L >= G > abs(H)):
            raise DomainError(f"body {i + 1}: actions violate Lambda >= Gamma > |H|")
        cos_i = H / G
        sin_i = np.sqrt((1.0 - cos_i) * (1.0 + cos_i))
        h, g = coords.h[i], coords.g[i]
        N = np.array([sin_i * np.sin(h), -sin_i * np.cos(h), cos_i])
        node = np.array([np.cos(h), np.sin(h), 0.0])
        P = np.cos(g) * node + np.sin(g) * np.cross(N, node)
        ratio = G / L
        e = np.sqrt((1.0 - ratio) * (1.0 + ratio))
        els.append(EllipseElements(a=a_from_lambda(L, masses, i), e=e, P=P, N=N, ell=float(wrap(coords.ell[i]))))
    return els


def from_delaunay(coords: DelaunayCoords, masses: SystemMasses) -> CartesianState:
    pairs = [elements_to_cartesian(el, masses, i) for i, el in enumerate(delaunay_to_ellipses(coords, masses))]
    return CartesianState(y=[p[0] for p in pairs], x=[p[1] for p in pairs])
