from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from planetlab import diophantine as dio
from planetlab.errors import DomainError
from planetlab.sampling import make_rng

PHI = (1 + math.sqrt(5)) / 2


def classical_member(omega, gamma, tau, K):
    """Plain loop over the integer cube, keeping 0 < |k|_1 <= K."""
    for k in itertools.product(range(-K, K + 1), repeat=len(omega)):
        norm = sum(abs(v) for v in k)
        if 0 < norm <= K and abs(sum(a * b for a, b in zip(omega, k))) < gamma / norm**tau:
            return False
    return True


def multiscale_member(omega, parts, gammas, tau, K):
    edges = np.cumsum((0,) + tuple(parts))
    for k in itertools.product(range(-K, K + 1), repeat=len(omega)):
        norm = sum(abs(v) for v in k)
        if not 0 < norm <= K:
            continue
        block = next(b for b in range(len(parts)) if any(k[edges[b] : edges[b + 1]]))
        if abs(np.dot(omega, k)) < gammas[block] / norm**tau:
            return False
    return True


@pytest.mark.parametrize("dim,radius", [(1, 5), (2, 4), (3, 3), (4, 2)])
def test_l1_ball_matches_enumeration(dim, radius):
    want = sorted(k for k in itertools.product(range(-radius, radius + 1), repeat=dim) if 0 < sum(map(abs, k)) <= radius)
    got = dio.l1_ball(dim, radius)
    assert [tuple(r) for r in got] == want


def test_lattice_order_and_blocks():
    lat = dio.lattice(dio.DioFiltration((1, 2), (1.0, 0.5), 1.0, 3))
    keys = list(zip(lat.block, lat.norm))
    assert keys == sorted(keys)
    assert np.all(lat.block[lat.k[:, 0] != 0] == 0)
    assert np.all(lat.block[lat.k[:, 0] == 0] == 1)


def test_golden_mean_is_a_member():
    filt = dio.DioFiltration((2,), (0.2,), 1.0, 50)
    member, worst = dio.dio_membership([1.0, PHI], filt)
    assert member
    # best approximations of phi are the convergents F_(n+1)/F_n, so the smallest |k . omega| |k|_1
    # is attained on a convergent or on a unit vector
    fib = [1, 1]
    while fib[-1] + fib[-2] <= 50:
        fib.append(fib[-1] + fib[-2])
    candidates = [(1, 0), (0, 1)] + [(fib[i + 1], -fib[i]) for i in range(len(fib) - 1) if fib[i + 1] + fib[i] <= 50]
    oracle = min(abs(p + q * PHI) * (abs(p) + abs(q)) for p, q in candidates)
    assert worst.value * sum(map(abs, worst.k)) == pytest.approx(oracle, rel=1e-12)
    assert oracle > 0.2


@pytest.mark.parametrize("p,q", [(1, 2), (2, 3), (3, 5), (5, 7)])
def test_rational_frequency_is_not_a_member(p, q):
    filt = dio.DioFiltration((2,), (1e-12,), 1.0, p + q)
    member, worst = dio.dio_membership([p, q], filt)
    assert not member and worst.value < 1e-15
    assert dio.dio_membership([p, q], filt.with_K(p + q - 1))[0]


@given(st.integers(0, 2**32 - 1))
def test_single_scale_equals_classical_test(seed):
    rng = make_rng(seed)
    omega = rng.uniform(-1, 1, 2)
    gamma = 10 ** rng.uniform(-3, -1)
    filt = dio.DioFiltration((2,), (gamma,), 1.5, 8)
    assert dio.dio_membership(omega, filt)[0] == classical_member(omega, gamma, 1.5, 8)
    assert dio.dio_members([omega], filt)[0] == classical_member(omega, gamma, 1.5, 8)


@given(st.integers(0, 2**32 - 1))
def test_multiscale_against_brute_force(seed):
    rng = make_rng(seed)
    omega = rng.uniform(-1, 1, 3)
    g1 = 10 ** rng.uniform(-2, -1)
    g2 = g1 * rng.uniform(0.01, 1)
    filt = dio.DioFiltration((1, 2), (g1, g2), 2.0, 5)
    assert dio.dio_membership(omega, filt)[0] == multiscale_member(omega, (1, 2), (g1, g2), 2.0, 5)


def test_second_scale_divisor_controls_rejection():
    # the only small divisor has k_1 = 0, so it belongs to the second block
    omega = np.array([0.731, 1.0, 1.0 + 1e-3])
    strict = dio.DioFiltration((1, 2), (0.1, 0.01), 1.0, 4)
    member, worst = dio.dio_membership(omega, strict)
    assert not member and worst.k[0] == 0
    assert dio.dio_membership(omega, strict.with_gammas((0.1, 1e-4)))[0]


def test_vectorized_membership_batches():
    pts = make_rng(3).uniform(1, 2, (1500, 2))
    filt = dio.DioFiltration((2,), (0.01,), 2.0, 20)
    bulk = dio.dio_members(pts, filt)
    single = np.array([dio.dio_membership(p, filt)[0] for p in pts])
    assert np.array_equal(bulk, single)


@given(st.integers(0, 2**32 - 1))
def test_membership_is_monotone(seed):
    rng = make_rng(seed)
    omega = rng.uniform(1, 2, 2)
    filt = dio.DioFiltration((2,), (0.02,), 2.0, 30)
    if dio.dio_membership(omega, filt)[0]:
        assert dio.dio_membership(omega, filt.with_gammas((0.01,)))[0]
        assert dio.dio_membership(omega, filt.with_K(15))[0]


def test_measure_is_reproducible_and_monotone():
    box = [(1, 2), (1, 2)]
    filt = dio.DioFiltration((2,), (0.01,), 2.0, 30)
    a = dio.dio_measure(box, filt, 4000, seed=5)
    assert a == dio.dio_measure(box, filt, 4000, seed=5)
    assert a.ci_low <= a.density <= a.ci_high
    halved = [dio.dio_measure(box, filt.with_gammas((g,)), 4000, seed=5).density for g in (0.04, 0.02, 0.01, 0.005)]
    assert all(x <= y for x, y in zip(halved, halved[1:]))
    assert dio.dio_measure(box, filt.with_K(60), 4000, seed=5).density <= a.density


def test_wilson_interval_oracle():
    est = dio.dio_measure([(1, 2), (1, 2)], dio.DioFiltration((2,), (0.05,), 2.0, 10), 500, seed=1)
    p, n, z = est.density, est.samples, 1.959963984540054
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    assert est.ci_low == pytest.approx(centre - half, rel=1e-9)
    assert est.ci_high == pytest.approx(centre + half, rel=1e-9)


@pytest.mark.parametrize(
    "kwargs",
    [dict(nu_parts=(0,)), dict(gammas=(0.1, 0.2), nu_parts=(1, 1)), dict(gammas=(-1.0,)), dict(K=0), dict(tau=-1.0), dict(gammas=(0.1, 0.1))],
)
def test_invalid_filtration(kwargs):
    base = dict(nu_parts=(2,), gammas=(0.1,), tau=1.0, K=5)
    base.update(kwargs)
    with pytest.raises(DomainError):
        dio.DioFiltration(**base)


def test_bad_box_rejected():
    with pytest.raises(DomainError):
        dio.sample_box([(2, 1), (1, 2)], 10, 0)


def budget(**kw):
    base = dict(M=2.0, M_k=(1.0, 0.5), Mbar=1.0, Mbar_k=(1.0, 1.0), E=1e-10, s=0.1, sbar=0.5, rho=0.2, tau_star=5.0, gammas=(0.1, 0.01), nu=4)
    base.update(kw)
    return dio.KamBudget(**base)


def test_kam_derived_quantities():
    b = budget()
    r = dio.kam_budget(b)
    L = max(1.0, 1 / 1.0, 1 / 0.5)
    K = 6 / 0.1 * max(1.0, math.log(1 / (1e-10 * 1.0 * L / 0.01)))
    rho = [0.1 / (3 * 1.0 * K**6), 0.01 / (3 * 0.5 * K**6)]
    assert r.L == L and r.K == pytest.approx(K, rel=1e-15)
    assert r.rho_hat_k == pytest.approx(tuple(rho), rel=1e-14)
    assert r.rho_hat == pytest.approx(min(rho + [0.2]), rel=1e-14)
    assert r.E_hat == pytest.approx(1e-10 * L / r.rho_hat**2, rel=1e-14)
    assert r.passed == (r.condition < 1)


def test_log_plus_branch():
    b = budget(E=1e3)
    assert dio.kam_budget(b).K == pytest.approx(6 / b.s)
    assert dio.log_plus(0.5) == 1.0 and dio.log_plus(math.e**3) == pytest.approx(3.0)


def test_e_hat_scales_with_e_and_rho_with_gamma():
    r1 = dio.kam_budget(budget(E=1e3))
    r2 = dio.kam_budget(budget(E=2e3))
    assert r2.E_hat == pytest.approx(2 * r1.E_hat, rel=1e-14)
    half = dio.kam_budget(budget(E=1e3, gammas=(0.1, 0.005)))
    assert half.rho_hat_k[1] == pytest.approx(r1.rho_hat_k[1] / 2, rel=1e-14)


def test_c_hat_scales_the_condition():
    r = dio.kam_budget(budget(c_hat=1e-40))
    assert r.condition == pytest.approx(1e-40 * r.E_hat) and r.passed


def test_heuristic_budget():
    r = dio.kam_budget(budget(), {"mu": 1e-3, "alpha": 0.3, "Kbar": 20.0})
    E, L = dio.kam_heuristic(1e-3, 0.3, 20.0, 0.1)
    assert E == pytest.approx(1e-3 / 0.3 * math.exp(-2.0)) and L == pytest.approx(1 / 0.3 / 1e-3)
    assert r.heuristic["E"] == E and r.heuristic_condition == pytest.approx(r.heuristic["E_hat"])


@pytest.mark.parametrize("kwargs", [dict(E=0.0), dict(s=0.2), dict(sbar=1.0), dict(tau_star=4.0), dict(M_k=(1.0,)), dict(gammas=(0.01, 0.1))])
def test_invalid_budget(kwargs):
    with pytest.raises(DomainError):
        budget(**kwargs)
