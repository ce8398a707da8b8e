from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy.integrate import quad

from planetlab import birkhoff
from planetlab.sampling import make_rng, random_masses
from planetlab.two_body import SystemMasses, lambda_from_a


def laplace_b(s, j, alpha):
    val, _ = quad(lambda psi: np.cos(j * psi) / (1 - 2 * alpha * np.cos(psi) + alpha**2) ** s, 0, np.pi, epsabs=0, epsrel=1e-12, limit=200)
    return 2 * val / np.pi


def lambdas(masses, a):
    return np.array([lambda_from_a(ai, masses, i) for i, ai in enumerate(a)])


@pytest.fixture(scope="module")
def two_planets():
    masses = SystemMasses(m=(1.0, 0.6), mu=1e-3)
    a = (0.3, 3.0)
    return masses, a, birkhoff.compute_invariants(lambdas(masses, a), masses)


def test_quadratic_form_matches_laplace_coefficients(two_planets):
    masses, (a1, a2), inv = two_planets
    alpha = a1 / a2
    L1, L2 = inv.Lambda
    pref = masses.m[0] * masses.m[1] / a2 * alpha / 8
    b1, b2 = laplace_b(1.5, 1, alpha), laplace_b(1.5, 2, alpha)
    Qh = pref * np.array([[-b1 / L1, b2 / np.sqrt(L1 * L2)], [b2 / np.sqrt(L1 * L2), -b1 / L2]])
    Qv = pref * np.array([[b1 / L1, -b1 / np.sqrt(L1 * L2)], [-b1 / np.sqrt(L1 * L2), b1 / L2]])
    assert np.allclose(inv.Qh, Qh, rtol=1e-8, atol=0)
    assert np.allclose(inv.Qv, Qv, rtol=1e-8, atol=0)
    assert inv.C0 == pytest.approx(-masses.m[0] * masses.m[1] / a2 * 0.5 * laplace_b(0.5, 0, alpha), rel=1e-12)


def test_remainder_is_quartic(two_planets):
    masses, _, inv = two_planets
    z = make_rng(1).uniform(-1, 1, 8) * np.tile(np.sqrt(inv.Lambda), 4)
    scales = np.array([0.01, 0.02, 0.04])
    rem = birkhoff.quadratic_remainder(inv, masses, z, scales)
    slope = np.polyfit(np.log(scales), np.log(rem), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.2)


def test_blocks_decouple(two_planets):
    masses, _, inv = two_planets
    scale = np.max(np.abs(inv.Qh))
    assert birkhoff.cross_block_hessian(inv.Lambda, masses) < 1e-6 * scale
    eta_xi, p_q = birkhoff.block_symmetry_defect(inv.Lambda, masses)
    assert max(eta_xi, p_q) < 1e-8 * scale


@pytest.mark.parametrize("n", [2, 3, 4])
def test_secular_identities(n):
    rng = make_rng(100 + n)
    masses = random_masses(rng, n)
    a = np.cumprod(np.r_[1.0, 1 / rng.uniform(0.08, 0.2, n - 1)])
    inv = birkhoff.compute_invariants(lambdas(masses, a), masses)
    vs_n, total = birkhoff.resonance_check(inv)
    assert vs_n < 1e-8 and total < 1e-8


def test_perturbed_vertical_block_breaks_identities(two_planets):
    _, _, inv = two_planets
    bumped = birkhoff.BirkhoffInvariants.from_matrices(inv.Lambda, inv.C0, inv.Qh, inv.Qv * np.array([[1.0, 1.001], [1.001, 1.0]]))
    assert max(birkhoff.resonance_check(bumped)) > 1e-5


def test_nonresonance_probe_against_direct_enumeration():
    inv = birkhoff.BirkhoffInvariants.from_matrices([1.0, 2.0], 0.0, np.diag([-1.0, -0.37]), np.diag([0.0, 1.37]))
    omega = birkhoff.reduced_frequencies(inv)
    assert np.allclose(np.sort(omega), np.sort([-1.0, -0.37, 1.37]))
    res = birkhoff.nonresonance_probe(inv, 2)
    best = min(
        abs(np.dot(k, omega))
        for k in itertools.product(range(-4, 5), repeat=3)
        if 0 < sum(map(abs, k)) <= 4 and len(set(k)) > 1
    )
    assert res.value == pytest.approx(best, abs=1e-15)
    # (1,1,1) annihilates omega but is a constant vector, so it is excluded
    assert not np.all(res.k == res.k[0])


def test_nonresonance_exclusions_and_order_limit():
    # sigma_1 + varsigma_2 = 0 is a genuine resonance of order 2
    inv = birkhoff.BirkhoffInvariants.from_matrices([1.0, 2.0], 0.0, np.diag([-1.0, -0.5]), np.diag([0.0, 1.0]))
    first = birkhoff.nonresonance_probe(inv, 1)
    assert first.value < 1e-15
    second = birkhoff.nonresonance_probe(inv, 1, exclusions=[first.k, -first.k])
    assert second.checked == first.checked - 2
    with pytest.raises(ValueError):
        birkhoff.nonresonance_probe(inv, 4)
