"""Fixed-step integration of the heliocentric planetary equations.

The default method is three-stage Gauss-Legendre collocation (order 6,
symplectic, symmetric). Stage equations are solved by fixed-point iteration
down to ``tol`` and the solution update uses compensated summation. The
optional ``"kepler-split"`` method is the second-order symmetric splitting
Kepler drift / direct kick / indirect drift.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .charts.geometry import wrap
from .charts.pstar import to_pstar
from .errors import DomainError, StepError
from .planetary_system import CartesianState, default_collision_radius, evaluate
from .two_body import SystemMasses, cartesian_to_elements, elements_to_cartesian

METHODS = ("gauss6", "kepler-split")
DEFAULT_STRIDE = 100

_S15 = math.sqrt(15.0)
GL_A = np.array(
    [
        [5.0 / 36.0, 2.0 / 9.0 - _S15 / 15.0, 5.0 / 36.0 - _S15 / 30.0],
        [5.0 / 36.0 + _S15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - _S15 / 24.0],
        [5.0 / 36.0 + _S15 / 30.0, 2.0 / 9.0 + _S15 / 15.0, 5.0 / 36.0],
    ]
)
GL_B = np.array([5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0])

STATUS_OK, STATUS_COLLISION, STATUS_NO_CONVERGENCE = 0, 1, 2


@njit(cache=True)
def _vector_field(x, y, mm, kep, m, mu, m0, dx, dy):
    n = x.shape[0]
    for i in range(n):
        r2 = x[i, 0] ** 2 + x[i, 1] ** 2 + x[i, 2] ** 2
        c = kep[i] / (r2 * math.sqrt(r2))
        for a in range(3):
            dx[i, a] = y[i, a] / mm[i]
            dy[i, a] = -c * x[i, a]
    for i in range(n):
        for j in range(i + 1, n):
            d0 = x[i, 0] - x[j, 0]
            d1 = x[i, 1] - x[j, 1]
            d2 = x[i, 2] - x[j, 2]
            s2 = d0 * d0 + d1 * d1 + d2 * d2
            c = mu * m[i] * m[j] / (s2 * math.sqrt(s2))
            dy[i, 0] -= c * d0
            dy[i, 1] -= c * d1
            dy[i, 2] -= c * d2
            dy[j, 0] += c * d0
            dy[j, 1] += c * d1
            dy[j, 2] += c * d2
            for a in range(3):
                dx[i, a] += mu * y[j, a] / m0
                dx[j, a] += mu * y[i, a] / m0


@njit(cache=True)
def _too_close(x, radius):
    n = x.shape[0]
    for i in range(n):
        if math.sqrt(x[i, 0] ** 2 + x[i, 1] ** 2 + x[i, 2] ** 2) < radius:
            return True
        for j in range(i + 1, n):
            d = math.sqrt((x[i, 0] - x[j, 0]) ** 2 + (x[i, 1] - x[j, 1]) ** 2 + (x[i, 2] - x[j, 2]) ** 2)
            if d < radius:
                return True
    return False


@njit(cache=True)
def _gauss_run(x0, y0, mm, kep, m, mu, m0, h, nsteps, stride, tol, maxit, radius, A, b):
    n = x0.shape[0]
    nout = nsteps // stride + 1
    xs = np.empty((nout, n, 3))
    ys = np.empty((nout, n, 3))
    x = x0.copy()
    y = y0.copy()
    cx = np.zeros((n, 3))
    cy = np.zeros((n, 3))
    KX = np.zeros((3, n, 3))
    KY = np.zeros((3, n, 3))
    NX = np.zeros((3, n, 3))
    NY = np.zeros((3, n, 3))
    xt = np.empty((n, 3))
    yt = np.empty((n, 3))
    fx = np.empty((n, 3))
    fy = np.empty((n, 3))
    xs[0] = x
    ys[0] = y
    _vector_field(x, y, mm, kep, m, mu, m0, fx, fy)
    for s in range(3):
        KX[s] = fx
        KY[s] = fy
    out = 1
    for step in range(nsteps):
        prev = np.inf
        converged = False
        for it in range(maxit):
            diff = 0.0
            for s in range(3):
                for i in range(n):
                    for a in range(3):
                        accx = 0.0
                        accy = 0.0
                        for r in range(3):
                            accx += A[s, r] * KX[r, i, a]
                            accy += A[s, r] * KY[r, i, a]
                        xt[i, a] = x[i, a] + h * accx
                        yt[i, a] = y[i, a] + h * accy
                _vector_field(xt, yt, mm, kep, m, mu, m0, fx, fy)
                for i in range(n):
                    for a in range(3):
                        NX[s, i, a] = fx[i, a]
                        NY[s, i, a] = fy[i, a]
            for s in range(3):
                for i in range(n):
                    for a in range(3):
                        dxv = abs(NX[s, i, a] - KX[s, i, a]) / (abs(x[i, a]) + abs(h) * abs(NX[s, i, a]) + 1e-300)
                        dyv = abs(NY[s, i, a] - KY[s, i, a]) / (abs(y[i, a]) + abs(h) * abs(NY[s, i, a]) + 1e-300)
                        diff = max(diff, dxv, dyv)
            KX[:] = NX
            KY[:] = NY
            diff *= abs(h)
            if diff <= tol:
                converged = True
                break
            # rounding floor: no further progress
            if diff >= prev and diff < 1e2 * tol:
                converged = True
                break
            prev = diff
        if not converged:
            return xs[:out], ys[:out], step, STATUS_NO_CONVERGENCE
        for i in range(n):
            for a in range(3):
                incx = h * (b[0] * KX[0, i, a] + b[1] * KX[1, i, a] + b[2] * KX[2, i, a]) + cx[i, a]
                t = x[i, a] + incx
                cx[i, a] = incx - (t - x[i, a])
                x[i, a] = t
                incy = h * (b[0] * KY[0, i, a] + b[1] * KY[1, i, a] + b[2] * KY[2, i, a]) + cy[i, a]
                t = y[i, a] + incy
                cy[i, a] = incy - (t - y[i, a])
                y[i, a] = t
        if _too_close(x, radius):
            return xs[:out], ys[:out], step + 1, STATUS_COLLISION
        if (step + 1) % stride == 0:
            xs[out] = x
            ys[out] = y
            out += 1
    return xs[:out], ys[:out], nsteps, STATUS_OK


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled states of one integration. Diagnostics are computed from the samples on demand."""

    times: np.ndarray
    y: np.ndarray
    x: np.ndarray
    masses: SystemMasses
    dt: float
    method: str
    truncated: bool = False
    reason: str = ""

    def __post_init__(self):
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size

    def state(self, k: int) -> CartesianState:
        return CartesianState(y=self.y[k], x=self.x[k])

    def states(self):
        return (self.state(k) for k in range(len(self)))

    def energies(self) -> np.ndarray:
        return np.array([evaluate(s, self.masses, collision_radius=0.0).total for s in self.states()])

    def energy_drift(self) -> np.ndarray:
        E = self.energies()
        return (E - E[0]) / abs(E[0])

    def angular_momenta(self) -> np.ndarray:
        return np.cross(self.x, self.y).sum(axis=1)

    def angular_momentum_drift(self) -> np.ndarray:
        C = self.angular_momenta()
        return (C - C[0]) / np.linalg.norm(C[0])

    def diagnostics(self) -> dict:
        dE = self.energy_drift()
        dC = self.angular_momentum_drift()
        return {
            "max_energy_drift": float(np.max(np.abs(dE))),
            "max_angular_momentum_drift": float(np.max(np.abs(dC))),
            "angular_momentum_drift_vector": np.abs(dC).max(axis=0),
            "dt": self.dt,
            "method": self.method,
        }

    def to_csv(self, path, diagnostics_path=None) -> None:
        """Trajectory CSV ``t, y..., x...`` plus a sidecar with per-sample diagnostics."""
        n = self.x.shape[1]
        comps = "xyz"
        header = ["t"] + [f"y{i + 1}_{c}" for i in range(n) for c in comps] + [f"x{i + 1}_{c}" for i in range(n) for c in comps]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(len(self)):
                w.writerow([f"{v:.17g}" for v in np.concatenate([[self.times[k]], self.y[k].ravel(), self.x[k].ravel()])])
        if diagnostics_path is None:
            diagnostics_path = str(path).removesuffix(".csv") + "_diagnostics.csv"
        dE = self.energy_drift()
        dC = np.linalg.norm(self.angular_momentum_drift(), axis=1)
        with open(diagnostics_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "energy_drift", "angular_momentum_drift"])
            for k in range(len(self)):
                w.writerow([f"{self.times[k]:.17g}", f"{dE[k]:.17g}", f"{dC[k]:.17g}"])


def _kepler_split_run(state: CartesianState, masses: SystemMasses, h, nsteps, stride, radius):
    n = state.n
    m = np.asarray(masses.m)
    x = state.x.copy()
    y = state.y.copy()
    xs, ys = [x.copy()], [y.copy()]

    def kick(x, y, tau):
        for i in range(n):
            for j in range(i + 1, n):
                d = x[i] - x[j]
                f = masses.mu * m[i] * m[j] * d / np.linalg.norm(d) ** 3
                y[i] -= tau * f
                y[j] += tau * f

    def indirect(x, y, tau):
        total = y.sum(axis=0)
        x += tau * masses.mu * (total[None, :] - y) / masses.m0

    def kepler(x, y, tau):
        for i in range(n):
            el = cartesian_to_elements(y[i], x[i], masses, i)
            mean_motion = math.sqrt(masses.reduced_M[i] / el.a**3)
            moved = type(el)(a=el.a, e=el.e, P=el.P, N=el.N, ell=float(wrap(el.ell + mean_motion * tau)))
            y[i], x[i] = elements_to_cartesian(moved, masses, i)

    for step in range(nsteps):
        kick(x, y, h / 2)
        indirect(x, y, h / 2)
        kepler(x, y, h)
        indirect(x, y, h / 2)
        kick(x, y, h / 2)
        if _too_close(x, radius):
            return np.array(xs), np.array(ys), step + 1, STATUS_COLLISION
        if (step + 1) % stride == 0:
            xs.append(x.copy())
            ys.append(y.copy())
    return np.array(xs), np.array(ys), nsteps, STATUS_OK


def integrate(
    state0: CartesianState,
    masses: SystemMasses,
    T: float,
    dt: float,
    method: str = "gauss6",
    stride: int = DEFAULT_STRIDE,
    tol: float = 1e-14,
    maxit: int = 50,
    collision_radius: float | None = None,
) -> Trajectory:
    """Integrate over ``[0, T]`` with ``round(T / dt)`` equal steps, sampling every ``stride`` steps.

    A collision-guard trip returns the samples up to that point with
    ``truncated=True``. A stage solve that does not converge raises
    :class:`StepError`.
    """
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
    if not (T > 0 and dt > 0):
        raise DomainError("T and dt must be positive")
    if stride < 1:
        raise DomainError("stride must be at least 1")
    nsteps = max(1, int(round(T / dt)))
    h = T / nsteps
    radius = default_collision_radius(state0, masses) if collision_radius is None else collision_radius
    if method == "gauss6":
        kep = np.asarray(masses.reduced_m) * np.asarray(masses.reduced_M)
        xs, ys, done, status = _gauss_run(
            np.ascontiguousarray(state0.x, dtype=float),
            np.ascontiguousarray(state0.y, dtype=float),
            np.asarray(masses.reduced_m, dtype=float),
            kep,
            np.asarray(masses.m, dtype=float),
            float(masses.mu),
            float(masses.m0),
            h,
            nsteps,
            stride,
            tol,
            maxit,
            radius,
            GL_A,
            GL_B,
        )
    else:
        xs, ys, done, status = _kepler_split_run(state0, masses, h, nsteps, stride, radius)
    if status == STATUS_NO_CONVERGENCE:
        raise StepError(f"stage equations did not converge at step {done} (t = {done * h:.6g})")
    times = h * stride * np.arange(xs.shape[0])
    reason = "collision guard" if status == STATUS_COLLISION else ""
    return Trajectory(times, ys, xs, masses, h, method, status == STATUS_COLLISION, reason)


def reverse_momenta(state: CartesianState) -> CartesianState:
    """Time-reversal involution ``(y, x) -> (-y, x)``."""
    return CartesianState(y=-state.y, x=state.x)


@dataclass(frozen=True)
class IntegralDrift:
    Theta0: float
    vartheta0: float
    chi0: float
    kappa0_rate: float
    samples: int
    exit_index: int | None = None


def pstar_integral_drift(traj: Trajectory, masses: SystemMasses | None = None, **chart_kw) -> IntegralDrift:
    """Largest change of ``Theta0``, ``vartheta0``, ``chi0`` along the samples, and the rate of ``kappa0``.

    ``Theta0`` and ``chi0`` drifts are relative to the initial ``chi0``; the
    ``vartheta0`` drift is in radians. The ``kappa0`` rate is the slope of a
    least-squares line through the unwrapped samples. If a sample leaves the
    chart, the report covers the samples before it and records its index.
    """
    masses = traj.masses if masses is None else masses
    Th, th, ch, ka, t = [], [], [], [], []
    exit_index = None
    for k, st in enumerate(traj.states()):
        try:
            c = to_pstar(st, masses, **chart_kw)
        except DomainError:
            exit_index = k
            break
        Th.append(c.Theta[0])
        th.append(c.vartheta[0])
        ch.append(c.chi[0])
        ka.append(c.kappa[0])
        t.append(traj.times[k])
    if not Th:
        raise DomainError("initial state lies outside the P* chart")
    Th, th, ch, t = map(np.asarray, (Th, th, ch, t))
    ka = np.unwrap(np.asarray(ka))
    dth = np.abs(np.angle(np.exp(1j * (th - th[0]))))
    rate = float(np.polyfit(t, ka, 1)[0]) if t.size > 1 else 0.0
    return IntegralDrift(
        Theta0=float(np.max(np.abs(Th - Th[0])) / ch[0]),
        vartheta0=float(np.max(dth)),
        chi0=float(np.max(np.abs(ch - ch[0])) / ch[0]),
        kappa0_rate=rate,
        samples=int(t.size),
        exit_index=exit_index,
    )
