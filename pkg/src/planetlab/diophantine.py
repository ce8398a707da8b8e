"""Multi-scale Diophantine conditions, their Monte Carlo measure and the KAM budget.

A frequency vector ``omega`` in ``R^nu = R^nu_1 x ... x R^nu_m`` is tested
against every integer ``k`` with ``0 < |k|_1 <= K``. The block of ``k`` is
the first of its ``m`` blocks with a nonzero entry; block ``i`` requires
``|omega . k| >= gamma_i / |k|_1^tau``. ``|k|_1`` is used in all
denominators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import binomtest

from .errors import DomainError
from .sampling import make_rng

BATCH = 512


@dataclass(frozen=True)
class DioFiltration:
    nu_parts: tuple[int, ...]
    gammas: tuple[float, ...]
    tau: float
    K: int

    def __post_init__(self):
        object.__setattr__(self, "nu_parts", tuple(int(v) for v in self.nu_parts))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if not self.nu_parts or any(v <= 0 for v in self.nu_parts):
            raise DomainError("block sizes must be positive")
        if len(self.gammas) != len(self.nu_parts):
            raise DomainError("one gamma per block is required")
        if any(g <= 0 for g in self.gammas):
            raise DomainError("gammas must be positive")
        if any(a < b for a, b in zip(self.gammas, self.gammas[1:])):
            raise DomainError("gammas must be non-increasing")
        if self.K < 1:
            raise DomainError("K must be at least 1")
        if self.tau < 0:
            raise DomainError("tau must be non-negative")

    @property
    def nu(self) -> int:
        return sum(self.nu_parts)

    @property
    def m(self) -> int:
        return len(self.nu_parts)

    def with_gammas(self, gammas) -> "DioFiltration":
        return DioFiltration(self.nu_parts, tuple(gammas), self.tau, self.K)

    def with_K(self, K: int) -> "DioFiltration":
        return DioFiltration(self.nu_parts, self.gammas, self.tau, K)


def l1_ball(dim: int, radius: int) -> np.ndarray:
    """All integer vectors with ``0 < |k|_1 <= radius``, one per row, lexicographically ordered."""
    return _l1_ball(int(dim), int(radius)).copy()


@lru_cache(maxsize=32)
def _l1_ball(dim, radius):
    rows = [np.zeros((1, 0), dtype=np.int64)]
    left = [np.array([radius])]
    for _ in range(dim):
        new_rows, new_left = [], []
        for R, rem in zip(rows, left):
            for v in range(-radius, radius + 1):
                ok = rem >= abs(v)
                if ok.any():
                    new_rows.append(np.hstack([R[ok], np.full((ok.sum(), 1), v)]))
                    new_left.append(rem[ok] - abs(v))
        rows, left = new_rows, new_left
    K = np.vstack(rows)
    K = K[np.any(K != 0, axis=1)]
    order = np.lexsort(K.T[::-1])
    return K[order]


@dataclass(frozen=True, eq=False)
class Lattice:
    """Integer vectors of a filtration ordered by block, then ``|k|_1`` shell, then lexicographically."""

    k: np.ndarray
    block: np.ndarray
    norm: np.ndarray


@lru_cache(maxsize=32)
def _lattice(nu_parts: tuple[int, ...], K: int) -> Lattice:
    k = _l1_ball(sum(nu_parts), K)
    edges = np.cumsum((0,) + nu_parts)
    block = np.full(k.shape[0], -1)
    for b in range(len(nu_parts) - 1, -1, -1):
        nz = np.any(k[:, edges[b] : edges[b + 1]] != 0, axis=1)
        block[nz] = b
    norm = np.abs(k).sum(axis=1)
    order = np.lexsort(tuple(k.T[::-1]) + (norm, block))
    return Lattice(k[order], block[order], norm[order])


def lattice(filt: DioFiltration) -> Lattice:
    return _lattice(filt.nu_parts, filt.K)


@dataclass(frozen=True)
class WorstDivisor:
    k: tuple[int, ...]
    value: float
    required: float

    @property
    def ratio(self) -> float:
        return self.value / self.required


def _thresholds(filt: DioFiltration, lat: Lattice) -> np.ndarray:
    return np.asarray(filt.gammas)[lat.block] / lat.norm.astype(float) ** filt.tau


def dio_membership(omega, filt: DioFiltration) -> tuple[bool, WorstDivisor]:
    """Membership of ``omega`` and the divisor with the smallest ``|omega . k| / required``.

    Ties are resolved by enumeration order (block, shell, lexicographic).
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (filt.nu,):
        raise DomainError(f"omega must have {filt.nu} components")
    lat = lattice(filt)
    vals = np.abs(lat.k @ omega)
    req = _thresholds(filt, lat)
    ratio = vals / req
    w = int(np.argmin(ratio))
    worst = WorstDivisor(tuple(int(v) for v in lat.k[w]), float(vals[w]), float(req[w]))
    return bool(ratio[w] >= 1.0), worst


def dio_members(omegas, filt: DioFiltration) -> np.ndarray:
    """Vectorized membership for the rows of ``omegas``."""
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    lat = lattice(filt)
    req = _thresholds(filt, lat)
    kT = lat.k.T.astype(float)
    out = np.empty(omegas.shape[0], dtype=bool)
    for s in range(0, omegas.shape[0], BATCH):
        chunk = omegas[s : s + BATCH]
        out[s : s + BATCH] = np.all(np.abs(chunk @ kT) >= req, axis=1)
    return out


@dataclass(frozen=True)
class MeasureEstimate:
    density: float
    ci_low: float
    ci_high: float
    members: int
    samples: int
    seed: int

    def csv_row(self, filt: DioFiltration) -> dict:
        return {
            "gammas": " ".join(f"{g:.17g}" for g in filt.gammas),
            "tau": f"{filt.tau:.17g}",
            "K": filt.K,
            "density": f"{self.density:.17g}",
            "ci_low": f"{self.ci_low:.17g}",
            "ci_high": f"{self.ci_high:.17g}",
            "samples": self.samples,
            "seed": self.seed,
        }


def sample_box(box, samples: int, seed: int, *spawn_key: int) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
        raise DomainError("box must be a (nu, 2) array of [low, high] with low < high")
    rng = make_rng(seed, *spawn_key)
    return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((samples, box.shape[0]))


def dio_measure(box, filt: DioFiltration, samples: int, seed: int) -> MeasureEstimate:
    """Monte Carlo fraction of the box inside the Diophantine set, with a 95% Wilson interval.

    The points depend only on ``(seed, samples, box)``; every filtration
    evaluated with the same arguments sees the same points.
    """
    pts = sample_box(box, samples, seed)
    if pts.shape[1] != filt.nu:
        raise DomainError("box dimension does not match the filtration")
    members = int(dio_members(pts, filt).sum())
    ci = binomtest(members, samples).proportion_ci(confidence_level=0.95, method="wilson")
    return MeasureEstimate(members / samples, float(ci.low), float(ci.high), members, samples, int(seed))


def log_plus(a: float) -> float:
    """``max(1, log a)``."""
    return max(1.0, math.log(a)) if a > 0 else 1.0


@dataclass(frozen=True)
class KamBudget:
    """Inputs of the KAM smallness condition.

    ``M_k`` and ``Mbar_k`` hold one bound per block (``M_k[0]`` bounds the
    full Hessian rows). ``nu`` is the number of frequencies.
    """

    M: float
    M_k: tuple[float, ...]
    Mbar: float
    Mbar_k: tuple[float, ...]
    E: float
    s: float
    sbar: float
    rho: float
    tau_star: float
    gammas: tuple[float, ...]
    nu: int
    c_hat: float = 1.0

    def __post_init__(self):
        for name in ("M", "Mbar", "E", "s", "sbar", "rho", "tau_star", "c_hat"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        object.__setattr__(self, "M_k", tuple(float(v) for v in self.M_k))
        object.__setattr__(self, "Mbar_k", tuple(float(v) for v in self.Mbar_k))
        object.__setattr__(self, "gammas", tuple(float(v) for v in self.gammas))
        m = len(self.gammas)
        if m == 0 or len(self.M_k) != m or len(self.Mbar_k) != m:
            raise DomainError("M_k, Mbar_k and gammas need one entry per block")
        if any(v <= 0 for v in self.M_k + self.Mbar_k + self.gammas):
            raise DomainError("block bounds and gammas must be positive")
        if any(a < b for a, b in zip(self.gammas, self.gammas[1:])):
            raise DomainError("gammas must be non-increasing")
        if not 0 < 4 * self.s <= self.sbar < 1:
            raise DomainError("need 0 < 4 s <= sbar < 1")
        if not self.tau_star > self.nu:
            raise DomainError("tau_star must exceed nu")


@dataclass(frozen=True)
class KamReport:
    L: float
    K: float
    rho_hat_k: tuple[float, ...]
    rho_hat: float
    E_hat: float
    condition: float
    passed: bool
    heuristic_condition: float | None = None
    heuristic: dict = field(default_factory=dict)


def kam_quantities(b: KamBudget, E: float | None = None, L: float | None = None):
    E = b.E if E is None else E
    L = max((b.Mbar,) + tuple(1.0 / v for v in b.M_k)) if L is None else L
    M1 = b.M_k[0]
    K = 6.0 / b.s * log_plus(1.0 / (E * M1**2 * L / b.gammas[0] ** 2))
    rho_k = tuple(g / (3.0 * Mk * K ** (b.tau_star + 1)) for g, Mk in zip(b.gammas, b.M_k))
    rho_hat = min(rho_k + (b.rho,))
    E_hat = E * L / rho_hat**2
    return L, K, rho_k, rho_hat, E_hat


def kam_heuristic(mu: float, alpha: float, Kbar: float, s: float, E0_power: float = 1.0, L0_power: float = 1.0):
    """``E = mu E0 exp(-Kbar s)`` and ``L = L0 / mu`` with ``E0 = alpha^-E0_power``, ``L0 = alpha^-L0_power``.

    ``E0`` and ``L0`` are only known to be bounded by powers of ``1/alpha``;
    the powers are user choices.
    """
    for name, v in (("mu", mu), ("alpha", alpha), ("Kbar", Kbar), ("s", s)):
        if not v > 0:
            raise DomainError(f"{name} must be positive")
    E = mu * alpha**-E0_power * math.exp(-Kbar * s)
    L = alpha**-L0_power / mu
    return E, L


def kam_budget(b: KamBudget, heuristic: dict | None = None) -> KamReport:
    """Derived KAM quantities and the smallness ratio ``c_hat * E_hat`` (pass iff ``< 1``).

    ``heuristic`` (keys ``mu``, ``alpha``, ``Kbar`` and optionally the powers)
    adds the ratio obtained with the scale estimates for ``E`` and ``L``.
    """
    L, K, rho_k, rho_hat, E_hat = kam_quantities(b)
    cond = b.c_hat * E_hat
    h_cond = None
    h_info = {}
    if heuristic:
        E_h, L_h = kam_heuristic(s=b.s, **heuristic)
        *_, E_hat_h = kam_quantities(b, E=E_h, L=L_h)
        h_cond = b.c_hat * E_hat_h
        h_info = {"E": E_h, "L": L_h, "E_hat": E_hat_h}
    return KamReport(L, K, rho_k, rho_hat, E_hat, cond, cond < 1.0, h_cond, h_info)
