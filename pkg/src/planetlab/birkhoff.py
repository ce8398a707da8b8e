"""Quadratic part of the secular function at the co-circular, co-planar point.

In Poincare variables ``z = (eta, xi, p, q)`` the secular function is even
and its quadratic part has the form

    C0 + sum_ij Qh_ij (eta_i eta_j + xi_i xi_j) + sum_ij Qv_ij (p_i p_j + q_i q_j).

The matrices are extracted from values along straight lines ``t -> f(t d)``:
since the function is even, ``(f(t d) - C0) / t^2`` is a polynomial in
``t^2`` whose constant term is ``d^T Q d``; four step sizes fit that
polynomial through the ``t^6`` term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diophantine import l1_ball
from .secular import QuadratureSpec, poincare_secular
from .two_body import SystemMasses

BIRKHOFF_SPEC = QuadratureSpec(N=32, tol=1e-14, N_max=1024)
STEP = 0.02
N_STEPS = 4


@dataclass(frozen=True, eq=False)
class BirkhoffInvariants:
    """``C0``, the quadratic-form matrices and their eigenvalues (ascending)."""

    Lambda: np.ndarray
    C0: float
    Qh: np.ndarray
    Qv: np.ndarray
    sigma: np.ndarray
    varsigma: np.ndarray

    @property
    def n(self) -> int:
        return len(self.Lambda)

    @property
    def frequencies(self) -> np.ndarray:
        return np.concatenate([self.sigma, self.varsigma])

    @classmethod
    def from_matrices(cls, Lambda, C0, Qh, Qv) -> "BirkhoffInvariants":
        Qh = 0.5 * (np.asarray(Qh) + np.asarray(Qh).T)
        Qv = 0.5 * (np.asarray(Qv) + np.asarray(Qv).T)
        return cls(np.asarray(Lambda, dtype=float), float(C0), Qh, Qv, np.linalg.eigvalsh(Qh), np.linalg.eigvalsh(Qv))

    def quadratic_part(self, z) -> float:
        eta, xi, p, q = np.split(np.asarray(z, dtype=float), 4)
        return float(eta @ self.Qh @ eta + xi @ self.Qh @ xi + p @ self.Qv @ p + q @ self.Qv @ q)


def line_coefficient(f, Lambda, d, C0: float, step: float = STEP, n_steps: int = N_STEPS) -> float:
    """``d^T Q d`` from ``f(t d)`` at ``t = step, 2 step, ..., n_steps * step``."""
    t = step * np.arange(1, n_steps + 1)
    g = np.array([(f(Lambda, tk * d) - C0) / tk**2 for tk in t])
    V = np.vander(t**2, n_steps, increasing=True)
    return float(np.linalg.solve(V, g)[0])


def _block_matrix(f, Lambda, C0, block: int, step, n_steps):
    """Coefficient matrix of block ``block`` (0: eta, 1: xi, 2: p, 3: q).

    Directions are scaled by ``sqrt(Lambda_i)`` so that ``t`` is comparable
    to an eccentricity or inclination.
    """
    n = len(Lambda)
    root = np.sqrt(Lambda)

    def direction(weights):
        d = np.zeros(4 * n)
        d[block * n : (block + 1) * n] = weights
        return d

    diag = np.empty(n)
    for i in range(n):
        w = np.zeros(n)
        w[i] = root[i]
        diag[i] = line_coefficient(f, Lambda, direction(w), C0, step, n_steps) / Lambda[i]
    Q = np.diag(diag)
    for i in range(n):
        for j in range(i + 1, n):
            w = np.zeros(n)
            w[i], w[j] = root[i], root[j]
            total = line_coefficient(f, Lambda, direction(w), C0, step, n_steps)
            Q[i, j] = Q[j, i] = (total - diag[i] * Lambda[i] - diag[j] * Lambda[j]) / (2 * root[i] * root[j])
    return Q


def compute_invariants(
    Lambda,
    masses: SystemMasses,
    spec: QuadratureSpec = BIRKHOFF_SPEC,
    step: float = STEP,
    n_steps: int = N_STEPS,
) -> BirkhoffInvariants:
    """``C0 = f(Lambda, 0)`` and ``Qh``, ``Qv`` from the ``eta`` and ``p`` blocks.

    The ``xi`` and ``q`` blocks carry the same matrices; see
    :func:`block_symmetry_defect`.
    """
    Lambda = np.asarray(Lambda, dtype=float)
    f = poincare_secular(masses, spec)
    C0 = f(Lambda, np.zeros(4 * len(Lambda)))
    Qh = _block_matrix(f, Lambda, C0, 0, step, n_steps)
    Qv = _block_matrix(f, Lambda, C0, 2, step, n_steps)
    return BirkhoffInvariants.from_matrices(Lambda, C0, Qh, Qv)


def block_symmetry_defect(Lambda, masses: SystemMasses, spec: QuadratureSpec = BIRKHOFF_SPEC, step: float = STEP) -> tuple[float, float]:
    """``max |Q_eta - Q_xi|`` and ``max |Q_p - Q_q|`` from independent extractions."""
    Lambda = np.asarray(Lambda, dtype=float)
    f = poincare_secular(masses, spec)
    C0 = f(Lambda, np.zeros(4 * len(Lambda)))
    Q = [_block_matrix(f, Lambda, C0, b, step, N_STEPS) for b in range(4)]
    return float(np.max(np.abs(Q[0] - Q[1]))), float(np.max(np.abs(Q[2] - Q[3])))


def cross_block_hessian(Lambda, masses: SystemMasses, spec: QuadratureSpec = BIRKHOFF_SPEC, h: float = 1e-2) -> float:
    """Largest mixed second difference between different blocks at ``z = 0``.

    Uses ``[f(h a + h b) - f(h a - h b) - f(-h a + h b) + f(-h a - h b)] / (4 h^2)``
    for unit vectors ``a``, ``b`` (scaled by ``sqrt(Lambda)``) in different blocks.
    """
    Lambda = np.asarray(Lambda, dtype=float)
    n = len(Lambda)
    f = poincare_secular(masses, spec)
    root = np.tile(np.sqrt(Lambda), 4)
    worst = 0.0
    for a in range(4 * n):
        for b in range(4 * n):
            if a // n >= b // n:
                continue
            ea = np.zeros(4 * n)
            eb = np.zeros(4 * n)
            ea[a] = h * root[a]
            eb[b] = h * root[b]
            mixed = f(Lambda, ea + eb) - f(Lambda, ea - eb) - f(Lambda, -ea + eb) + f(Lambda, -ea - eb)
            worst = max(worst, abs(mixed) / (4 * h * h * root[a] * root[b]))
    return worst


def resonance_check(inv: BirkhoffInvariants) -> tuple[float, float]:
    """``(|varsigma_n|, |sum(sigma + varsigma)|)``, both relative to ``|(sigma, varsigma)|``.

    ``varsigma_n`` is the vertical eigenvalue of smallest modulus.
    """
    scale = float(np.linalg.norm(inv.frequencies))
    vs_n = float(np.min(np.abs(inv.varsigma)))
    total = abs(float(np.sum(inv.sigma) + np.sum(inv.varsigma)))
    return vs_n / scale, total / scale


def reduced_frequencies(inv: BirkhoffInvariants) -> np.ndarray:
    """``(sigma, varsigma_bar)``: all eigenvalues except the vertical one of smallest modulus."""
    drop = int(np.argmin(np.abs(inv.varsigma)))
    return np.concatenate([inv.sigma, np.delete(inv.varsigma, drop)])


@dataclass(frozen=True)
class NonresonanceResult:
    k: np.ndarray
    value: float
    checked: int


def nonresonance_probe(inv: BirkhoffInvariants, p: int, exclusions=None, omega=None) -> NonresonanceResult:
    """Smallest ``|omega . k|`` over ``0 < |k|_1 <= 2p``, ``omega = (sigma, varsigma_bar)``.

    Integer multiples of ``(1, ..., 1)`` are excluded (they are annihilated by
    the identity ``sum(sigma + varsigma) = 0``), as is any vector in
    ``exclusions``.
    """
    if p > 3:
        raise ValueError("nonresonance_probe enumerates |k|_1 <= 6 at most")
    omega = reduced_frequencies(inv) if omega is None else np.asarray(omega, dtype=float)
    K = l1_ball(omega.size, 2 * p)
    ones = np.all(K == K[:, :1], axis=1)
    keep = ~ones
    if exclusions is not None:
        for e in np.atleast_2d(exclusions):
            keep &= ~np.all(K == np.asarray(e), axis=1)
    K = K[keep]
    vals = np.abs(K @ omega)
    best = int(np.argmin(vals))
    return NonresonanceResult(K[best], float(vals[best]), int(K.shape[0]))


def quadratic_remainder(inv: BirkhoffInvariants, masses: SystemMasses, z, scales, spec: QuadratureSpec = BIRKHOFF_SPEC) -> np.ndarray:
    """``|f(s z) - C0 - Q(s z)|`` for each ``s`` in ``scales``."""
    f = poincare_secular(masses, spec)
    z = np.asarray(z, dtype=float)
    return np.array([abs(f(inv.Lambda, s * z) - inv.C0 - inv.quadratic_part(s * z)) for s in scales])
