"""Random planetary configurations for property checks and experiments."""

from __future__ import annotations

import numpy as np

from .charts.geometry import K_AXIS, rotate_about, unit
from .planetary_system import CartesianState
from .two_body import EllipseElements, SystemMasses, elements_to_cartesian

E_CAP = 1.0 - 1e-6


def make_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """Counter-based Philox stream for ``seed``, split by ``spawn_key``.

    Every experiment item draws from ``SeedSequence(seed, spawn_key=key)`` so
    items stay reproducible independently of evaluation order.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=spawn_key)))


def random_orientation(rng, inc_range=(0.05, 1.2)):
    """Random ``(P, N)``: plane tilted from ``k`` by an angle in ``inc_range``."""
    inc = rng.uniform(*inc_range)
    node = rng.uniform(0, 2 * np.pi)
    axis = np.array([np.cos(node), np.sin(node), 0.0])
    N = rotate_about(axis, K_AXIS, inc)
    P = rotate_about(N, axis, rng.uniform(0, 2 * np.pi))
    return unit(P), N


def random_ellipses(
    rng,
    n: int,
    a_inner: float = 1.0,
    alpha_range=(0.2, 0.5),
    e_range=(0.05, 0.5),
    inc_range=(0.05, 1.2),
) -> list[EllipseElements]:
    """Well-spaced ellipses: ``a[i]/a[i+1]`` drawn from ``alpha_range``."""
    els = []
    a = a_inner
    for i in range(n):
        if i:
            a = a / rng.uniform(*alpha_range)
        P, N = random_orientation(rng, inc_range)
        e = min(rng.uniform(*e_range), E_CAP)
        els.append(EllipseElements(a=a, e=e, P=P, N=N, ell=rng.uniform(0, 2 * np.pi)))
    return els


def state_from_ellipses(els, masses: SystemMasses) -> CartesianState:
    pairs = [elements_to_cartesian(el, masses, i) for i, el in enumerate(els)]
    return CartesianState(y=[p[0] for p in pairs], x=[p[1] for p in pairs])


def random_masses(rng, n: int, mu: float = 1e-3) -> SystemMasses:
    return SystemMasses(m=tuple(rng.uniform(0.5, 2.0, size=n)), mu=mu)


def random_state(rng, n: int, masses: SystemMasses | None = None, **kwargs):
    masses = masses if masses is not None else random_masses(rng, n)
    return state_from_ellipses(random_ellipses(rng, n, **kwargs), masses), masses
