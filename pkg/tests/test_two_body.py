from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from planetlab.errors import DomainError
from planetlab.sampling import make_rng, random_ellipses
from planetlab.two_body import (
    EllipseElements,
    SystemMasses,
    a_from_lambda,
    angular_momentum,
    cartesian_to_elements,
    elements_to_cartesian,
    keplerian_energy,
    lambda_from_a,
    solve_kepler,
    two_body_energy,
)

MASSES = SystemMasses(m=(1.3,), mu=1e-3)


@given(st.floats(0, 2 * np.pi, exclude_max=True), st.floats(0, 0.99))
def test_kepler_solver_matches_root_bracketing(ell, e):
    E = solve_kepler(ell, e)
    ref = brentq(lambda x: x - e * np.sin(x) - ell, 0.0, 2 * np.pi)
    assert abs(E - ref) < 1e-12


def test_kepler_solver_vectorized_and_wrapped():
    ell = np.linspace(-10, 10, 101)
    E = solve_kepler(ell, 0.7)
    assert np.all((E >= 0) & (E < 2 * np.pi))
    residual = E - 0.7 * np.sin(E) - ell
    assert np.max(np.abs(np.angle(np.exp(1j * residual)))) < 1e-12


@pytest.mark.parametrize("e", [-0.1, 1.0, 1.5])
def test_kepler_solver_rejects_bad_eccentricity(e):
    with pytest.raises(DomainError):
        solve_kepler(0.3, e)


@given(st.integers(0, 2**32 - 1))
def test_elements_round_trip(seed):
    el = random_ellipses(make_rng(seed), 1, e_range=(0.0, 0.95))[0]
    y, x = elements_to_cartesian(el, MASSES, 0)
    back = cartesian_to_elements(y, x, MASSES, 0)
    y2, x2 = elements_to_cartesian(back, MASSES, 0)
    assert abs(back.a - el.a) < 1e-12 * el.a
    assert abs(back.e - el.e) < 1e-10
    assert np.allclose(x2, x, atol=1e-12 * el.a)
    assert np.allclose(y2, y, atol=1e-12 * np.linalg.norm(y))


@given(st.integers(0, 2**32 - 1))
def test_energy_and_angular_momentum_of_an_ellipse(seed):
    el = random_ellipses(make_rng(seed), 1, e_range=(0.0, 0.9))[0]
    y, x = elements_to_cartesian(el, MASSES, 0)
    mm, MM = MASSES.reduced_m[0], MASSES.reduced_M[0]
    assert two_body_energy(y, x, MASSES, 0) == pytest.approx(-mm * MM / (2 * el.a), rel=1e-12)
    assert np.allclose(np.cross(x, y), angular_momentum(el, MASSES, 0), rtol=1e-12, atol=1e-14)
    Lam = lambda_from_a(el.a, MASSES, 0)
    assert keplerian_energy([Lam], MASSES) == pytest.approx(-mm * MM / (2 * el.a), rel=1e-12)


def test_lambda_and_reduced_masses():
    masses = SystemMasses(m=(2.0,), mu=0.01, m0=1.5)
    mm = 1.5 * 2.0 / (1.5 + 0.02)
    MM = 1.5 + 0.02
    assert masses.reduced_m[0] == pytest.approx(mm)
    assert masses.reduced_M[0] == pytest.approx(MM)
    assert lambda_from_a(4.0, masses, 0) == pytest.approx(mm * np.sqrt(MM * 4.0))
    assert a_from_lambda(lambda_from_a(4.0, masses, 0), masses, 0) == pytest.approx(4.0)


def test_circular_orbit_recovers_zero_eccentricity():
    el = EllipseElements(a=2.0, e=0.0, P=[1, 0, 0], N=[0, 0, 1], ell=1.0)
    y, x = elements_to_cartesian(el, MASSES, 0)
    back = cartesian_to_elements(y, x, MASSES, 0)
    assert back.e < 1e-12
    y2, x2 = elements_to_cartesian(back, MASSES, 0)
    assert np.allclose(x2, x, atol=1e-13) and np.allclose(y2, y, atol=1e-13)


@pytest.mark.parametrize(
    "kwargs",
    [dict(a=-1.0, e=0.1), dict(a=1.0, e=1.0), dict(a=1.0, e=0.1, P=[1, 1, 0]), dict(a=1.0, e=0.1, P=[0, 0, 1])],
)
def test_invalid_ellipses_rejected(kwargs):
    base = dict(P=[1, 0, 0], N=[0, 0, 1])
    base.update(kwargs)
    with pytest.raises(DomainError):
        EllipseElements(**base)


def test_unbound_state_rejected():
    with pytest.raises(DomainError):
        cartesian_to_elements([0, 10.0, 0], [1.0, 0, 0], MASSES, 0)


@pytest.mark.parametrize("kwargs", [dict(m=(1.0,), m0=0.0), dict(m=(1.0,), mu=-1.0), dict(m=(0.0,))])
def test_invalid_masses_rejected(kwargs):
    with pytest.raises(DomainError):
        SystemMasses(**kwargs)
