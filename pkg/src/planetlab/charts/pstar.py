"""P* chart ``(Lambda, chi, Theta, ell, kappa, vartheta)`` reducing rotations.

Built on the partial angular-momentum sums ``S[j] = C[j] + ... + C[n-1]``
(``S[0]`` is the total angular momentum) and the perihelion directions
``P[j]``. With 0-based indices, the nodes are

    nu[0] = k x S[0],   nn[j] = S[j] x P[j],   nu[j+1] = P[j] x S[j+1],   nn[n-1] = P[n-1]

and the coordinates

    chi[t]   = |S[t]|                   kappa[t] = angle_S[t](nu[t], nn[t])
    Theta[0] = S[0] . k                 vartheta[0] = angle_k(i, nu[0])
    Theta[t] = S[t] . P[t-1]            vartheta[t] = angle_P[t-1](nn[t-1], nu[t])   (t >= 1)

where ``angle_v(a, b)`` is measured counterclockwise around ``v``.
``(Theta[0], vartheta[0], chi[0])`` only depend on the total angular
momentum, so they are integrals of the planetary flow.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

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
from .geometry import I_AXIS, K_AXIS, TWO_PI, oriented_angle, rotate_about, unit, wrap

E_MIN = 1e-3
NU_MIN = 1e-3


@dataclass(frozen=True, eq=False)
class PStarCoords:
    Lambda: np.ndarray
    chi: np.ndarray
    Theta: np.ndarray
    ell: np.ndarray
    kappa: np.ndarray
    vartheta: np.ndarray

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.ell, self.kappa, self.vartheta, self.Lambda, self.chi, self.Theta])

    @classmethod
    def from_array(cls, z) -> "PStarCoords":
        ell, kappa, vartheta, Lambda, chi, Theta = np.split(np.asarray(z, dtype=float), 6)
        return cls(Lambda=Lambda, chi=chi, Theta=Theta, ell=ell, kappa=kappa, vartheta=vartheta)

    def with_value(self, name: str, index: int, value: float) -> "PStarCoords":
        """Copy with one coordinate replaced, e.g. ``with_value("kappa", 1, 0.3)``."""
        arr = np.array(getattr(self, name), dtype=float)
        arr[index] = value
        return replace(self, **{name: arr})


@dataclass(frozen=True, eq=False)
class AngularChain:
    """Angular momenta, their partial sums and the node vectors of the chart."""

    C: np.ndarray
    S: np.ndarray
    P: np.ndarray
    nu: np.ndarray
    nn: np.ndarray


def angular_chain(C, P) -> AngularChain:
    C = np.asarray(C, dtype=float)
    P = np.asarray(P, dtype=float)
    n = C.shape[0]
    S = np.cumsum(C[::-1], axis=0)[::-1]
    nu = np.empty_like(C)
    nn = np.empty_like(C)
    nu[0] = np.cross(K_AXIS, S[0])
    for j in range(n - 1):
        nn[j] = np.cross(S[j], P[j])
        nu[j + 1] = np.cross(P[j], S[j + 1])
    nn[n - 1] = P[n - 1]
    return AngularChain(C=C, S=S, P=P, nu=nu, nn=nn)


def _check_nodes(chain: AngularChain, nu_min: float):
    n = chain.C.shape[0]
    floor = np.sin(nu_min)

    def sine(a, b):
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0 or nb == 0:
            return 0.0
        return np.linalg.norm(np.cross(a, b)) / (na * nb)

    if sine(K_AXIS, chain.S[0]) <= floor:
        raise ChartSingularityError("node k x C vanishes: total angular momentum along k", node="nu1")
    for j in range(n - 1):
        if sine(chain.S[j], chain.P[j]) <= floor:
            raise ChartSingularityError(f"node S{j + 1} x P{j + 1} vanishes", body=j + 1, node=f"n{j + 1}")
        if sine(chain.P[j], chain.S[j + 1]) <= floor:
            raise ChartSingularityError(f"node P{j + 1} x S{j + 2} vanishes", body=j + 1, node=f"nu{j + 2}")


def chain_from_state(state: CartesianState, masses: SystemMasses, e_min: float = E_MIN):
    els = [cartesian_to_elements(state.y[i], state.x[i], masses, i) for i in range(state.n)]
    for i, el in enumerate(els):
        if el.e <= e_min:
            raise ChartSingularityError(f"body {i + 1}: eccentricity {el.e:.2e} at or below {e_min}", body=i + 1)
    C = np.cross(state.x, state.y)
    return angular_chain(C, [el.P for el in els]), els


def coords_from_chain(chain: AngularChain, Lambda, ell) -> PStarCoords:
    n = chain.C.shape[0]
    S, P, nu, nn = chain.S, chain.P, chain.nu, chain.nn
    chi = np.linalg.norm(S, axis=1)
    Theta = np.empty(n)
    kappa = np.empty(n)
    vartheta = np.empty(n)
    Theta[0] = S[0] @ K_AXIS
    vartheta[0] = oriented_angle(K_AXIS, I_AXIS, nu[0])
    for t in range(1, n):
        Theta[t] = S[t] @ P[t - 1]
        vartheta[t] = oriented_angle(P[t - 1], nn[t - 1], nu[t])
    for t in range(n):
        kappa[t] = oriented_angle(S[t], nu[t], nn[t])
    return PStarCoords(
        Lambda=np.asarray(Lambda, dtype=float),
        chi=chi,
        Theta=Theta,
        ell=wrap(np.asarray(ell, dtype=float)),
        kappa=kappa,
        vartheta=vartheta,
    )


def to_pstar(state: CartesianState, masses: SystemMasses, e_min: float = E_MIN, nu_min: float = NU_MIN) -> PStarCoords:
    chain, els = chain_from_state(state, masses, e_min)
    _check_nodes(chain, nu_min)
    Lambda = [lambda_from_a(el.a, masses, i) for i, el in enumerate(els)]
    return coords_from_chain(chain, Lambda, [el.ell for el in els])


def chain_from_coords(coords: PStarCoords) -> AngularChain:
    """Rebuild ``S`` and ``P`` from the outermost frame inwards.

    ``C`` is placed from ``(chi0, Theta0, vartheta0)``; then, for each ``t``,
    the node ``nn[t]`` is ``nu[t]`` turned by ``kappa[t]`` about ``S[t]``, the
    perihelion ``P[t]`` lies in the plane orthogonal to ``nn[t]`` at angle
    ``arccos(Theta[t+1]/chi[t])`` from ``S[t]`` (because ``P[t]`` is orthogonal
    to ``C[t] = S[t] - S[t+1]``), ``nu[t+1]`` is ``nn[t]`` turned by
    ``vartheta[t+1]`` about ``P[t]`` and ``S[t+1]`` follows from its length and
    projection on ``P[t]``. Node vectors of the returned chain are unit length.
    """
    chi, Theta, kappa, vartheta = coords.chi, coords.Theta, coords.kappa, coords.vartheta
    n = len(chi)
    S = np.empty((n, 3))
    P = np.empty((n, 3))
    nu = np.empty((n, 3))
    nn = np.empty((n, 3))

    rho = _transverse(chi[0], Theta[0], "chi0", "Theta0")
    zeta = vartheta[0]
    S[0] = [rho * np.sin(zeta), -rho * np.cos(zeta), Theta[0]]
    nu[0] = [np.cos(zeta), np.sin(zeta), 0.0]
    for t in range(n - 1):
        s_hat = S[t] / chi[t]
        n_hat = rotate_about(s_hat, nu[t], kappa[t])
        cos_b = Theta[t + 1] / chi[t]
        sin_b = _transverse(1.0, cos_b, f"chi{t}", f"Theta{t + 1}")
        P[t] = cos_b * s_hat + sin_b * np.cross(n_hat, s_hat)
        nu_next = np.cos(vartheta[t + 1]) * n_hat + np.sin(vartheta[t + 1]) * np.cross(P[t], n_hat)
        rho = _transverse(chi[t + 1], Theta[t + 1], f"chi{t + 1}", f"Theta{t + 1}")
        S[t + 1] = Theta[t + 1] * P[t] + rho * np.cross(nu_next, P[t])
        nn[t] = n_hat
        nu[t + 1] = nu_next
    P[n - 1] = rotate_about(S[n - 1] / chi[n - 1], nu[n - 1], kappa[n - 1])
    nn[n - 1] = P[n - 1]
    C = S.copy()
    C[:-1] -= S[1:]
    return AngularChain(C=C, S=S, P=P, nu=nu, nn=nn)


def _transverse(length, projection, length_name, projection_name):
    if not length > 0:
        raise DomainError(f"{length_name} must be positive")
    r = (length - projection) * (length + projection)
    if not r > 0:
        raise ChartSingularityError(f"|{projection_name}| must be below {length_name}", node=projection_name)
    return np.sqrt(r)


def pstar_to_ellipses(coords: PStarCoords, masses: SystemMasses) -> list[EllipseElements]:
    chain = chain_from_coords(coords)
    els = []
    for i in range(len(coords.Lambda)):
        L = coords.Lambda[i]
        c = np.linalg.norm(chain.C[i])
        ratio = c / L
        if not 0 < ratio < 1:
            raise DomainError(f"body {i + 1}: |C| = {c:.6g} is not below Lambda = {L:.6g}")
        N = chain.C[i] / c
        P = chain.P[i] - (chain.P[i] @ N) * N
        els.append(
            EllipseElements(
                a=a_from_lambda(L, masses, i),
                e=np.sqrt((1.0 - ratio) * (1.0 + ratio)),
                P=unit(P),
                N=N,
                ell=float(wrap(coords.ell[i])),
            )
        )
    return els


def from_pstar(coords: PStarCoords, masses: SystemMasses) -> CartesianState:
    pairs = [elements_to_cartesian(el, masses, i) for i, el in enumerate(pstar_to_ellipses(coords, masses))]
    return CartesianState(y=[p[0] for p in pairs], x=[p[1] for p in pairs])


def reflect_pstar(coords: PStarCoords) -> PStarCoords:
    """Image of ``(y2, x2) -> (-y2, -x2)``: ``Theta -> -Theta``, ``vartheta -> -vartheta``."""
    return replace(coords, Theta=-coords.Theta, vartheta=wrap(TWO_PI - coords.vartheta))


def c_length_from_coords(coords: PStarCoords, j: int) -> float:
    """``|C[j]|`` for ``0 <= j < n-1`` from ``(chi, Theta, vartheta)`` alone."""
    chi, Theta, vt = coords.chi, coords.Theta, coords.vartheta
    a, b, th = chi[j], chi[j + 1], Theta[j + 1]
    sq = a * a + b * b - 2 * th * th + 2 * np.sqrt((b * b - th * th) * (a * a - th * th)) * np.cos(vt[j + 1])
    return float(np.sqrt(sq))


def planar_reduction(state: CartesianState, masses: SystemMasses):
    """``(chi, kappa)`` predicted for a prograde co-planar configuration.

    ``chi[t]`` is the sum of ``Gamma`` over bodies ``t..n-1``; ``kappa[t]`` is
    ``g[t] - g[t-1]`` (``g[-1] = 0``) with ``g`` the argument of perihelion in
    the invariable plane measured from ``nu[0]``, plus the constant turn
    between the nodes and the perihelia: ``nn[t]`` is a quarter turn ahead of
    ``P[t]`` (except ``nn[n-1] = P[n-1]``) and ``nu[t]`` a quarter turn behind
    ``P[t-1]`` (except ``nu[0]``).
    """
    chain, _ = chain_from_state(state, masses, e_min=0.0)
    n = state.n
    axis = chain.S[0]
    gam = np.linalg.norm(chain.C, axis=1)
    chi = np.cumsum(gam[::-1])[::-1]
    g = np.array([oriented_angle(axis, chain.nu[0], chain.P[i]) for i in range(n)])
    quarter = np.pi / 2
    kappa = np.empty(n)
    for t in range(n):
        lead = quarter if t < n - 1 else 0.0
        lag = quarter if t > 0 else 0.0
        prev = g[t - 1] if t > 0 else 0.0
        kappa[t] = wrap(g[t] - prev + lead + lag)
    return chi, kappa
