from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from planetlab.sampling import make_rng, random_ellipses, random_masses, state_from_ellipses
from planetlab.two_body import EllipseElements, SystemMasses

settings.register_profile("planetlab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("planetlab")


def planar_ellipse(a, e, varpi=0.0, ell=0.0, inc=0.0, node=0.0):
    """Ellipse with longitude of perihelion ``varpi`` in a plane tilted by ``inc`` about the node line."""
    n_axis = np.array([np.cos(node), np.sin(node), 0.0])
    N = np.array([np.sin(inc) * np.sin(node), -np.sin(inc) * np.cos(node), np.cos(inc)])
    m_axis = np.cross(N, n_axis)
    w = varpi - node
    P = np.cos(w) * n_axis + np.sin(w) * m_axis
    return EllipseElements(a=a, e=e, P=P, N=N, ell=ell)


@pytest.fixture
def rng():
    return make_rng(20261016)


@pytest.fixture
def three_body(rng):
    masses = random_masses(rng, 3)
    els = random_ellipses(rng, 3)
    return state_from_ellipses(els, masses), masses, els


@pytest.fixture
def unit_masses():
    return SystemMasses(m=(1.0, 1.0), mu=1e-3)
