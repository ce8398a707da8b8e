from __future__ import annotations

import numpy as np
import pytest

from planetlab import dynamics
from planetlab.charts.atlas import reflect_state
from planetlab.charts.geometry import rotate_about
from planetlab.charts.pstar import to_pstar
from planetlab.errors import DomainError, StepError
from planetlab.planetary_system import CartesianState
from planetlab.sampling import state_from_ellipses
from planetlab.two_body import SystemMasses, cartesian_to_elements

from .conftest import planar_ellipse

MASSES = SystemMasses(m=(1.0, 0.7, 1.3), mu=1e-3)
PERIOD = 2 * np.pi / np.sqrt(MASSES.reduced_M[0])


def spatial_state(masses=MASSES):
    deg20 = np.radians(20)
    els = [
        planar_ellipse(1.0, 0.3, 0.2, 0.0, 0.1, 0.3),
        planar_ellipse(2.5, 0.3, 1.9, 2.0, 0.1 + deg20, 1.1),
        planar_ellipse(6.0, 0.3, 4.1, 4.0, 0.2, 2.0),
    ]
    return state_from_ellipses(els[: masses.n], masses)


def relative_distance(a: CartesianState, b: CartesianState) -> float:
    return max(np.max(np.abs(a.x - b.x)) / np.max(np.abs(b.x)), np.max(np.abs(a.y - b.y)) / np.max(np.abs(b.y)))


def test_conservation_over_a_hundred_periods():
    traj = dynamics.integrate(spatial_state(), MASSES, 100 * PERIOD, PERIOD / 200)
    d = traj.diagnostics()
    assert d["max_energy_drift"] < 1e-11
    assert d["max_angular_momentum_drift"] < 1e-11
    assert not traj.truncated and np.all(np.diff(traj.times) > 0)


@pytest.mark.slow
def test_energy_error_is_bounded_without_trend():
    traj = dynamics.integrate(spatial_state(), MASSES, 1e4 * PERIOD, PERIOD / 200, stride=500)
    dE = traj.energy_drift()
    assert np.max(np.abs(dE)) < 1e-9
    slope, _ = np.polyfit(traj.times, dE, 1)
    # a secular drift would carry the whole error budget; require the fitted trend to explain well under that
    assert abs(slope) * traj.times[-1] < 0.5 * np.max(np.abs(dE)) + 1e-14


def test_decoupled_planets_keep_their_elements():
    free = SystemMasses(m=(1.0, 0.7), mu=0.0)
    state = spatial_state(free)
    # the perihelion error accumulates like a phase error of size ~ (dt/P)^6 per period
    traj = dynamics.integrate(state, free, 1000 * PERIOD, PERIOD / 800, stride=80000)
    for i in range(2):
        start = cartesian_to_elements(state.y[i], state.x[i], free, i)
        for k in range(len(traj)):
            el = cartesian_to_elements(traj.y[k, i], traj.x[k, i], free, i)
            assert abs(el.a - start.a) < 1e-10 * start.a
            assert abs(el.e - start.e) < 1e-10
            assert np.max(np.abs(el.N - start.N)) < 1e-10 and np.max(np.abs(el.P - start.P)) < 1e-10


def energy_error(dt, T):
    traj = dynamics.integrate(spatial_state(), MASSES, T, dt, stride=1)
    return np.max(np.abs(traj.energy_drift()))


def test_sixth_order_convergence():
    T = 2 * PERIOD
    errs = [energy_error(PERIOD / k, T) for k in (12, 24)]
    assert np.log2(errs[0] / errs[1]) == pytest.approx(6.0, abs=0.8)


def test_kepler_split_is_second_order():
    T = 2 * PERIOD
    errs = []
    for k in (40, 80):
        traj = dynamics.integrate(spatial_state(), MASSES, T, PERIOD / k, method="kepler-split", stride=1)
        errs.append(np.max(np.abs(traj.energy_drift())))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.5)


def test_time_reversal():
    state = spatial_state()
    T, dt = 20 * PERIOD, PERIOD / 200
    fwd = dynamics.integrate(state, MASSES, T, dt, stride=4000)
    back = dynamics.integrate(dynamics.reverse_momenta(fwd.state(-1)), MASSES, T, dt, stride=4000)
    assert relative_distance(dynamics.reverse_momenta(back.state(-1)), state) < 1e-11


def test_reflection_equivariance():
    state = spatial_state()
    T, dt = 10 * PERIOD, PERIOD / 200
    a = dynamics.integrate(reflect_state(state), MASSES, T, dt, stride=2000).state(-1)
    b = reflect_state(dynamics.integrate(state, MASSES, T, dt, stride=2000).state(-1))
    assert relative_distance(a, b) < 1e-12


def test_pstar_integrals_are_conserved_while_kappa0_precesses():
    traj = dynamics.integrate(spatial_state(), MASSES, 200 * PERIOD, PERIOD / 200)
    drift = dynamics.pstar_integral_drift(traj)
    assert drift.exit_index is None and drift.samples == len(traj)
    assert max(drift.Theta0, drift.vartheta0, drift.chi0) < 1e-10
    assert abs(drift.kappa0_rate) > 1e-6


def test_planar_data_stays_planar():
    masses = SystemMasses(m=(1.0, 0.7), mu=1e-3)
    els = [planar_ellipse(1.0, 0.2, 0.3, 0.0), planar_ellipse(3.0, 0.25, 2.0, 1.0)]
    tilt = np.column_stack([rotate_about([1.0, 0.0, 0.0], e, 0.5) for e in np.eye(3)])
    state = state_from_ellipses(els, masses).transformed(tilt)
    traj = dynamics.integrate(state, masses, 50 * PERIOD, PERIOD / 200)
    for st_ in traj.states():
        c = to_pstar(st_, masses)
        assert abs(c.Theta[1]) < 1e-10 * c.chi[0]
        assert min(abs(np.sin(c.vartheta[1])), abs(np.sin(c.vartheta[1] - np.pi))) < 1e-10


def test_collision_guard_truncates():
    traj = dynamics.integrate(spatial_state(), MASSES, 10 * PERIOD, PERIOD / 100, stride=1, collision_radius=0.75)
    assert traj.truncated and traj.reason == "collision guard"
    assert traj.times[-1] < 10 * PERIOD


def test_stage_solve_failure_raises():
    with pytest.raises(StepError):
        dynamics.integrate(spatial_state(), MASSES, PERIOD, PERIOD / 4, maxit=2)


@pytest.mark.parametrize("kwargs", [dict(T=-1.0), dict(dt=0.0), dict(method="rk4"), dict(stride=0)])
def test_invalid_arguments(kwargs):
    args = dict(T=PERIOD, dt=PERIOD / 100)
    args.update(kwargs)
    with pytest.raises(DomainError):
        dynamics.integrate(spatial_state(), MASSES, **args)


def test_trajectory_csv(tmp_path):
    traj = dynamics.integrate(spatial_state(), MASSES, PERIOD, PERIOD / 100, stride=10)
    traj.to_csv(tmp_path / "t.csv")
    data = np.genfromtxt(tmp_path / "t.csv", delimiter=",", names=True)
    assert data.shape == (len(traj),) and data.dtype.names[:2] == ("t", "y1_x")
    assert np.array_equal(data["x3_z"], traj.x[:, 2, 2])
    diag = np.genfromtxt(tmp_path / "t_diagnostics.csv", delimiter=",", names=True)
    assert np.array_equal(diag["energy_drift"], traj.energy_drift())


def test_times_must_increase():
    with pytest.raises(ValueError):
        dynamics.Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1, 3)), np.ones((2, 1, 3)), SystemMasses(m=(1.0,)), 0.1, "gauss6")
