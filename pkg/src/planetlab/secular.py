"""Averages of the planetary perturbation over the mean anomalies.

The double average of a pair interaction over ``T^2`` is computed with the
periodic trapezoidal rule on eccentric-anomaly nodes (``d ell = (1 - e cos E)
dE``), doubling the node count until two successive estimates agree. The
integrands are analytic away from orbit crossings, so convergence is
geometric. Order terms of the expansion in the inner semi-major axis use the
Legendre kernel ``r^k / r'^(k+1) P_k(cos psi)`` term by term.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import eval_legendre

from .charts.delaunay import DelaunayCoords, delaunay_to_ellipses
from .charts.poincare import PoincareCoords, poincare_to_ellipses
from .charts.pstar import PStarCoords, pstar_to_ellipses
from .errors import CollisionError, DomainError, QuadratureError
from .planetary_system import CartesianState
from .two_body import (
    EllipseElements,
    SystemMasses,
    cartesian_to_elements,
    orbit_momenta,
    orbit_points,
    solve_kepler,
)

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
ORDER_RATIO_MAX = 0.5
COLLISION_FACTOR = 10.0
COLLISION_GRID = 64


@dataclass(frozen=True)
class QuadratureSpec:
    """Trapezoidal torus quadrature: start at ``N`` nodes per angle, double up to ``N_max``.

    ``phase`` shifts every node by a fraction of the node spacing; results
    must not depend on it beyond ``tol``.
    """

    N: int = 32
    tol: float = 1e-10
    N_max: int = 1024
    phase: float = 0.0

    def __post_init__(self):
        if self.N < 8:
            raise DomainError("quadrature needs at least 8 nodes per angle")
        if self.N_max < self.N:
            raise DomainError("N_max must not be smaller than N")
        if not self.tol > 0:
            raise DomainError("quadrature tolerance must be positive")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    nodes: int


def ellipses_of(point, masses: SystemMasses) -> list[EllipseElements]:
    """Osculating ellipses of a chart point, a Cartesian state or a list of ellipses."""
    if isinstance(point, PStarCoords):
        return pstar_to_ellipses(point, masses)
    if isinstance(point, PoincareCoords):
        return poincare_to_ellipses(point, masses)
    if isinstance(point, DelaunayCoords):
        return delaunay_to_ellipses(point, masses)
    if isinstance(point, CartesianState):
        return [cartesian_to_elements(point.y[i], point.x[i], masses, i) for i in range(point.n)]
    els = list(point)
    if not all(isinstance(el, EllipseElements) for el in els):
        raise TypeError("point must be a chart point, a CartesianState or a sequence of EllipseElements")
    return els


def anomaly_nodes(el: EllipseElements, N: int, phase: float = 0.0):
    """Eccentric-anomaly nodes with mean-anomaly weights ``(1 - e cos E) / N``."""
    E = TWO_PI * (np.arange(N) + phase) / N
    return E, (1.0 - el.e * np.cos(E)) / N


def _double_average(el_i, el_j, kernel, N, phase):
    Ei, wi = anomaly_nodes(el_i, N, phase)
    Ej, wj = anomaly_nodes(el_j, N, phase)
    xi = orbit_points(el_i, Ei)
    xj = orbit_points(el_j, Ej)
    values = kernel(xi[:, None, :], xj[None, :, :])
    return float(wi @ values @ wj)


def converge(estimate: Callable[[int], float], spec: QuadratureSpec, what: str = "torus average") -> QuadratureResult:
    """Double the node count until two successive estimates differ by less than ``spec.tol``."""
    N = spec.N
    prev = estimate(N)
    err = float("inf")
    while 2 * N <= spec.N_max:
        N *= 2
        cur = estimate(N)
        err = abs(cur - prev)
        if err < spec.tol:
            return QuadratureResult(cur, err, N)
        prev = cur
    raise QuadratureError(
        f"{what} did not reach tol={spec.tol:.1e} with {N} nodes per angle",
        estimate=prev,
        error=err,
    )


def check_orbit_separation(el_i: EllipseElements, el_j: EllipseElements, radius: float | None = None) -> float:
    """Minimum distance between the two orbits on a coarse grid; raises if below ``10 * radius``."""
    if radius is None:
        radius = 1e-8 * min(el_i.a, el_j.a)
    E = TWO_PI * np.arange(COLLISION_GRID) / COLLISION_GRID
    d = np.linalg.norm(orbit_points(el_i, E)[:, None, :] - orbit_points(el_j, E)[None, :, :], axis=-1)
    dmin = float(d.min())
    if dmin <= COLLISION_FACTOR * radius:
        raise CollisionError(f"orbits come within {dmin:.3e} of each other (orbit collision)")
    return dmin


def _pair(pair, n):
    i, j = pair
    if not (0 <= i < j < n):
        raise DomainError(f"pair must satisfy 0 <= i < j < {n}, got {pair}")
    return i, j


def _inverse_distance(xi, xj):
    return 1.0 / np.linalg.norm(xi - xj, axis=-1)


def secular_average_result(pair, point, masses: SystemMasses, spec: QuadratureSpec = QuadratureSpec()) -> QuadratureResult:
    els = ellipses_of(point, masses)
    i, j = _pair(pair, len(els))
    check_orbit_separation(els[i], els[j])
    scale = -masses.m[i] * masses.m[j]
    res = converge(lambda N: _double_average(els[i], els[j], _inverse_distance, N, spec.phase), _scaled(spec, scale))
    return QuadratureResult(scale * res.value, abs(scale) * res.error, res.nodes)


def _scaled(spec: QuadratureSpec, scale: float) -> QuadratureSpec:
    """Spec whose tolerance applies to the unscaled average."""
    return QuadratureSpec(N=spec.N, tol=spec.tol / abs(scale), N_max=spec.N_max, phase=spec.phase)


def secular_average(pair, point, masses: SystemMasses, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``-m_i m_j <1/|x_i - x_j|>`` over both mean anomalies.

    This is the whole average of the pair perturbation: the indirect part
    ``y_i . y_j / m0`` averages to zero (see :func:`indirect_average`).
    """
    return secular_average_result(pair, point, masses, spec).value


def indirect_average(pair, point, masses: SystemMasses, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``<y_i . y_j> / m0`` over the torus, evaluated on the same product grid."""
    els = ellipses_of(point, masses)
    i, j = _pair(pair, len(els))
    mm, MM = masses.reduced_m, masses.reduced_M

    def estimate(N):
        Ei, wi = anomaly_nodes(els[i], N, spec.phase)
        Ej, wj = anomaly_nodes(els[j], N, spec.phase)
        yi = orbit_momenta(els[i], Ei, mm[i], MM[i])
        yj = orbit_momenta(els[j], Ej, mm[j], MM[j])
        return float(wi @ (yi @ yj.T) @ wj) / masses.m0

    return converge(estimate, spec, "indirect average").value


def kepler_map_averages(el: EllipseElements, masses: SystemMasses, body_index: int, tol: float = 1e-13, N_max: int = 1 << 14):
    """Mean-anomaly averages ``(<1/|x|>, <y>, <x/|x|^3>)`` with the trapezoidal rule in ``ell``.

    Uses equally spaced mean anomalies and the Kepler solver, independently of
    the eccentric-anomaly weights used by the torus averages.
    """
    mm, MM = masses.reduced_m[body_index], masses.reduced_M[body_index]

    def estimate(N):
        E = solve_kepler(TWO_PI * np.arange(N) / N, el.e)
        x = orbit_points(el, E)
        y = orbit_momenta(el, E, mm, MM)
        r = np.linalg.norm(x, axis=1)
        return np.concatenate([[np.mean(1.0 / r)], y.mean(axis=0), (x / r[:, None] ** 3).mean(axis=0)])

    N = 16
    prev = estimate(N)
    while True:
        N *= 2
        cur = estimate(N)
        if np.max(np.abs(cur - prev)) < tol * max(1.0, np.max(np.abs(cur))):
            return float(cur[0]), cur[1:4], cur[4:7]
        if N >= N_max:
            raise QuadratureError("mean-anomaly averages did not converge", estimate=float(cur[0]), error=float(np.max(np.abs(cur - prev))))
        prev = cur


def _legendre_kernel(k):
    def kernel(xi, xj):
        ri = np.linalg.norm(xi, axis=-1)
        rj = np.linalg.norm(xj, axis=-1)
        cos_psi = np.einsum("...k,...k->...", xi, xj) / (ri * rj)
        return ri**k / rj ** (k + 1) * eval_legendre(k, cos_psi)

    return kernel


def secular_order_term(pair, k: int, point, masses: SystemMasses, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Coefficient of ``eps^k`` in ``-m_i m_j <1/|eps x_i - x_j|>``, evaluated at ``eps = 1``.

    Integrates ``-m_i m_j r_i^k / r_j^(k+1) P_k(cos psi)`` over the torus.
    """
    if k not in (0, 1, 2, 3, 4):
        raise DomainError(f"order must be one of 0..4, got {k}")
    els = ellipses_of(point, masses)
    i, j = _pair(pair, len(els))
    ratio = els[i].a / els[j].a
    if ratio >= ORDER_RATIO_MAX:
        raise DomainError(f"semi-axis ratio {ratio:.3f} is not below {ORDER_RATIO_MAX}")
    scale = -masses.m[i] * masses.m[j]
    kernel = _legendre_kernel(k)
    res = converge(lambda N: _double_average(els[i], els[j], kernel, N, spec.phase), _scaled(spec, scale), f"order-{k} term")
    return scale * res.value


@dataclass(frozen=True)
class SecularTerm:
    """One pair term of the secular function, either ``"full"`` or a fixed order ``k``."""

    pair: tuple[int, int]
    order: int | str = "full"
    spec: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __call__(self, point, masses: SystemMasses) -> float:
        if self.order == "full":
            return secular_average(self.pair, point, masses, self.spec)
        return secular_order_term(self.pair, int(self.order), point, masses, self.spec)


def secular_function(point, masses: SystemMasses, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Sum of all pair averages (the secular perturbing function)."""
    els = ellipses_of(point, masses)
    n = len(els)
    return sum(secular_average((i, j), els, masses, spec) for i in range(n) for j in range(i + 1, n))


def poincare_secular(masses: SystemMasses, spec: QuadratureSpec = QuadratureSpec()):
    """``(Lambda, z) -> secular_function`` with ``z = (eta, xi, p, q)``."""

    def f(Lambda, z):
        return secular_function(PoincareCoords.from_z(Lambda, z), masses, spec)

    return f


def integrability_block(pair, n: int, order: int | str = "full") -> dict[str, list[int]]:
    """Coordinates a pair term may depend on, as listed for the P* chart (0-based bodies).

    For bodies ``i < j`` (1-based ``I = i+1``, ``J = j+1``) the list is
    ``Lambda_i, Lambda_j``, ``Theta_I..Theta_min(J,n-1)``, ``chi_(I-1)..chi_min(J,n-1)``,
    ``kappa_I..kappa_(J-1)``, ``vartheta_I..vartheta_min(J,n-1)``. The
    quadrupole term of the outermost pair additionally drops ``kappa_(n-1)``.
    """
    i, j = _pair(pair, n)
    I, J = i + 1, j + 1
    top = min(J, n - 1)
    block = {
        "Lambda": [i, j],
        "Theta": list(range(I, top + 1)),
        "chi": list(range(I - 1, top + 1)),
        "kappa": list(range(I, J)),
        "vartheta": list(range(I, top + 1)),
    }
    if order == 2 and (i, j) == (n - 2, n - 1):
        block["kappa"] = [t for t in block["kappa"] if t != n - 1]
    return block


def excluded_coordinates(pair, n: int, order: int | str = "full") -> list[tuple[str, int]]:
    """P* coordinates (other than the mean anomalies) outside :func:`integrability_block`."""
    block = integrability_block(pair, n, order)
    out = []
    for name in ("Lambda", "chi", "Theta", "kappa", "vartheta"):
        out += [(name, t) for t in range(n) if t not in block[name]]
    return out


@dataclass(frozen=True)
class ProbeResult:
    max_variation: float
    grid: np.ndarray
    values: np.ndarray
    skipped: int


def dependence_probe(term: Callable, base: PStarCoords, masses: SystemMasses, vary: str, index: int, grid: Sequence[float]) -> ProbeResult:
    """Evaluate ``term`` along a grid in one P* coordinate, others held at ``base``.

    Grid points outside the chart are dropped with a warning. Returns the
    spread ``max - min`` of the values on the remaining points.
    """
    kept, values = [], []
    for v in np.asarray(grid, dtype=float):
        try:
            values.append(term(base.with_value(vary, index, float(v)), masses))
        except DomainError as exc:
            log.debug("probe point %s[%d]=%g dropped: %s", vary, index, v, exc)
            continue
        kept.append(v)
    skipped = len(grid) - len(kept)
    if skipped:
        warnings.warn(f"{skipped} of {len(grid)} grid points in {vary}[{index}] left the chart and were dropped", stacklevel=2)
    if not values:
        raise DomainError(f"no grid point in {vary}[{index}] lies inside the chart")
    values = np.asarray(values)
    return ProbeResult(float(values.max() - values.min()), np.asarray(kept), values, skipped)


@dataclass(frozen=True)
class PhasePortrait:
    """Quadrupole term of the outermost pair on a ``(Theta, vartheta)`` grid (NaN outside the chart)."""

    Theta: np.ndarray
    vartheta: np.ndarray
    values: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["Theta", "vartheta", "value"])
            for a, T in enumerate(self.Theta):
                for b, th in enumerate(self.vartheta):
                    w.writerow([f"{T:.17g}", f"{th:.17g}", f"{self.values[a, b]:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "PhasePortrait":
        data = np.genfromtxt(path, delimiter=",", names=True)
        Theta = np.unique(data["Theta"])
        vartheta = np.unique(data["vartheta"])
        values = np.full((Theta.size, vartheta.size), np.nan)
        ia = np.searchsorted(Theta, data["Theta"])
        ib = np.searchsorted(vartheta, data["vartheta"])
        values[ia, ib] = data["value"]
        return cls(Theta, vartheta, values)


def quadrupole_term(base: PStarCoords, masses: SystemMasses, spec: QuadratureSpec = QuadratureSpec()) -> Callable:
    """``(Theta, vartheta) -> `` quadrupole term of the outermost pair at ``base``."""
    n = len(base.Lambda)
    term = SecularTerm((n - 2, n - 1), 2, spec)

    def f(Theta, vartheta):
        point = base.with_value("Theta", n - 1, float(Theta)).with_value("vartheta", n - 1, float(vartheta))
        return term(point, masses)

    return f


def admissible_window(base: PStarCoords, masses: SystemMasses, band: float = 0.999, scan: int = 121):
    """Half-widths ``(W_Theta, W_vartheta)`` of a box around ``(0, pi)`` holding the chart domain in the outermost ``(Theta, vartheta)``.

    Inside the chart ``|C|`` of the next-to-outermost planet stays below its
    ``Lambda``, which confines ``(Theta, vartheta)`` to an island around the
    coplanar point ``(0, pi)``. The island is located by a coarse scan.
    """
    n = len(base.Lambda)
    half = band * min(base.chi[n - 2], base.chi[n - 1])
    Ts = np.linspace(-half, half, scan)
    ths = np.linspace(0.0, TWO_PI, scan)
    wT = wv = 0.0
    for T in Ts:
        for th in ths:
            point = base.with_value("Theta", n - 1, float(T)).with_value("vartheta", n - 1, float(th))
            try:
                pstar_to_ellipses(point, masses)
            except DomainError:
                continue
            wT = max(wT, abs(T))
            wv = max(wv, abs(th - np.pi))
    if wT == 0.0 or wv == 0.0:
        raise DomainError("no admissible (Theta, vartheta) around the coplanar point")
    dT = Ts[1] - Ts[0]
    dv = ths[1] - ths[0]
    return min(wT + dT, half), min(wv + dv, np.pi)


def admissible_vartheta(base: PStarCoords, masses: SystemMasses, index: int | None = None, scan: int = 721) -> tuple[float, float]:
    """Interval of ``vartheta[index]`` around its base value on which the chart stays defined.

    All other coordinates are held at ``base``; the interval is the
    contiguous run of admissible scan points containing the base value
    (bounds are the outermost admissible scan points, so both are inside).
    """
    n = len(base.Lambda)
    index = n - 1 if index is None else index
    v0 = float(base.vartheta[index])
    offsets = np.linspace(-np.pi, np.pi, scan)

    def ok(v):
        try:
            pstar_to_ellipses(base.with_value("vartheta", index, float(v)), masses)
        except DomainError:
            return False
        return True

    mid = scan // 2
    if not ok(v0):
        raise DomainError("base point lies outside the chart")
    lo = hi = mid
    while lo > 0 and ok(v0 + offsets[lo - 1]):
        lo -= 1
    while hi < scan - 1 and ok(v0 + offsets[hi + 1]):
        hi += 1
    return v0 + offsets[lo], v0 + offsets[hi]


def quadrupole_phase_portrait(
    base: PStarCoords,
    masses: SystemMasses,
    n_Theta: int = 64,
    n_vartheta: int = 64,
    window=None,
    spec: QuadratureSpec = QuadratureSpec(),
) -> PhasePortrait:
    """Raster of the outermost quadrupole term on a box centred at ``(Theta, vartheta) = (0, pi)``.

    ``window = (W_Theta, W_vartheta)`` gives the half-widths; by default the
    box is fitted to the chart domain with :func:`admissible_window`. The
    grid is symmetric about the centre, so the reflection ``(Theta, vartheta)
    -> (-Theta, -vartheta)`` maps grid points onto grid points.
    """
    n = len(base.Lambda)
    if n < 2:
        raise DomainError("the phase portrait needs at least two planets")
    wT, wv = admissible_window(base, masses) if window is None else window
    Theta = np.linspace(-wT, wT, n_Theta)
    vartheta = np.pi + np.linspace(-wv, wv, n_vartheta)
    f = quadrupole_term(base, masses, spec)
    values = np.full((n_Theta, n_vartheta), np.nan)
    for a, T in enumerate(Theta):
        for b, th in enumerate(vartheta):
            try:
                values[a, b] = f(T, th)
            except DomainError:
                pass
    return PhasePortrait(Theta, vartheta, values)


def critical_point_gradient(f: Callable, Theta: float, vartheta: float, h: float = 1e-4) -> float:
    """Centered-difference gradient norm of ``f(Theta, vartheta)``."""
    gT = (f(Theta + h, vartheta) - f(Theta - h, vartheta)) / (2 * h)
    gv = (f(Theta, vartheta + h) - f(Theta, vartheta - h)) / (2 * h)
    return float(np.hypot(gT, gv))


def closed_level_curves(portrait: PhasePortrait, center=(0.0, np.pi), n_levels: int = 8):
    """Trace level sets around ``center`` with marching squares.

    Levels are spread between the value at the grid point nearest ``center``
    and the closest value found on the edge of the valid part of the raster
    (cells next to NaN or to the raster border). For each level, reports
    whether some closed contour winds around the centre. Returns a list of
    ``(level, closed)``; empty if the centre is not an extremum relative to
    the edge values.
    """
    from skimage.measure import find_contours

    V = portrait.values
    a0 = int(np.argmin(np.abs(portrait.Theta - center[0])))
    b0 = int(np.argmin(np.abs(portrait.vartheta - center[1])))
    v0 = V[a0, b0]
    finite = np.isfinite(V)
    if not np.isfinite(v0):
        return []
    padded = np.pad(finite, 1, constant_values=False)
    interior = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    edge = V[finite & ~interior]
    if not edge.size:
        return []
    sign = 1.0 if np.median(edge) > v0 else -1.0
    reach = float(np.min(sign * (edge - v0)))
    if reach <= 0:
        return []
    filled = np.where(finite, V, v0 + sign * 10 * reach)
    out = []
    for frac in np.linspace(0.1, 0.9, n_levels):
        level = v0 + sign * frac * reach
        closed = any(np.allclose(c[0], c[-1]) and _winds_around(c, (a0, b0)) for c in find_contours(filled, level))
        out.append((float(level), bool(closed)))
    return out


def _winds_around(contour, point) -> bool:
    """Even-odd ray test for a closed polyline in raster coordinates."""
    y, x = contour[:, 0], contour[:, 1]
    py, px = point
    inside = False
    for k in range(len(contour) - 1):
        y1, x1, y2, x2 = y[k], x[k], y[k + 1], x[k + 1]
        if (y1 > py) != (y2 > py):
            xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if xc > px:
                inside = not inside
    return inside
