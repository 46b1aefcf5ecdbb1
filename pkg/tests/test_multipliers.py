import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rvl.errors import DomainError, SizeError
from rvl.lattice import ConvexBody, build_gamma, enumerate_orbit
from rvl.multipliers import (RationalFrequency, SumStructure, admissible_mask, envelope_check, envelope_grid,
                             fit_decay, gauss_scan, gauss_table, gaussian_sum, h_hat, m_hat, major_arc_error,
                             multiplier_sweep, phi_integral, psi_pv)
from rvl.numtheory import sieve_primes
from rvl.operators import CZKernel, SparseFunction, apply_average

from oracles import gauss_sum, prime_multiplier_1d

P = sieve_primes(10_000)
G1 = build_gamma(1, 1)
G12 = build_gamma(1, 2)
K1 = CZKernel.builtin(1)
INTERVAL = ConvexBody.interval()
ORBIT10 = enumerate_orbit(INTERVAL, 10, 0, 1, P, gamma=G1)
SIGNED10 = enumerate_orbit(INTERVAL, 10, 0, 1, P, signed=True, gamma=G1, punctured=True)


def test_m_hat_examples():
    vals = m_hat([[0.0], [0.5]], ORBIT10)
    assert vals[0] == 1.0
    expect = (math.log(2) - math.log(3) - math.log(5) - math.log(7)) / math.log(210)
    assert vals[1] == pytest.approx(expect, abs=1e-14)
    assert expect == pytest.approx(-0.7407, abs=1e-4)
    # every image divisible by q: all phases integral
    orbit = enumerate_orbit(INTERVAL, 30, 0, 1, P, gamma=G12)
    assert m_hat(RationalFrequency((1, 1), 1), orbit)[0] == pytest.approx(1.0)


def test_m_hat_matches_oracle():
    orbit = enumerate_orbit(INTERVAL, 200, 0, 1, P, gamma=G1)
    for xi in (0.1, 0.37, 0.5, 0.912):
        assert m_hat([[xi]], orbit)[0] == pytest.approx(prime_multiplier_1d(xi, 200), abs=1e-12)
    orbit = enumerate_orbit(INTERVAL, 200, 0, 1, P, gamma=build_gamma(1, 2))
    # gamma = {1, 2}: xi = (0, t) probes p^2
    assert m_hat([[0.0, 0.123]], orbit)[0] == pytest.approx(prime_multiplier_1d(0.123, 200, 2), abs=1e-10)


def test_h_hat_examples():
    vals = h_hat([[0.0], [0.5], [0.25]], SIGNED10, K1)
    assert abs(vals[0]) < 1e-15
    assert abs(vals[1]) < 1e-14
    expect = 1j * (-math.log(3) / 3 + math.log(5) / 5 - math.log(7) / 7)
    assert vals[2] == pytest.approx(expect, abs=1e-14)
    empty = enumerate_orbit(INTERVAL, 1, 0, 1, P, signed=True, gamma=G1, punctured=True)
    assert h_hat([[0.25]], empty, K1)[0] == 0


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_m_hat_bounded_and_conjugate_symmetric(x, y):
    orbit = enumerate_orbit(INTERVAL, 100, 0, 1, P, gamma=G12)
    v, w = m_hat([[x, y], [-x, -y]], orbit)
    assert abs(v) <= 1 + 1e-12
    assert abs(w - v.conjugate()) < 1e-12


def test_rational_frequency_path_matches_float_path():
    orbit = enumerate_orbit(ConvexBody.cube(2), 40, 1, 1, P, gamma=build_gamma(2, 1))
    rf = RationalFrequency((1, 2, 3), 7, (1e-4, 0.0, -2e-5))
    assert m_hat(rf, orbit)[0] == pytest.approx(m_hat([rf.value], orbit)[0], abs=1e-11)


def test_rational_frequency_validation():
    with pytest.raises(DomainError):
        RationalFrequency((2, 4), 6)
    assert RationalFrequency((0, 1), 3).a == (3, 1)


def test_fourier_diagonalization():
    orbit = enumerate_orbit(INTERVAL, 50, 0, 1, P, gamma=G12)
    L = np.array([[1, 1]])  # P(p) = p + p^2
    rng = np.random.default_rng(9)
    f = SparseFunction.random(rng, 1, 10)
    g = apply_average(f, orbit, L)
    xis = rng.uniform(0, 1, size=(40, 1))
    lhs = g.fourier(xis)
    rhs = m_hat(xis @ L.astype(float), orbit) * f.fourier(xis)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_phi_integral_examples():
    assert phi_integral([0.0], INTERVAL, 16, G1).value == 1.0
    assert abs(phi_integral([1 / 32], INTERVAL, 16, G1).value) < 1e-10
    for xi in (0.003, -0.07, 0.2):
        t = 2 * math.pi * xi * 16
        assert phi_integral([xi], INTERVAL, 16, G1, exact_inner=False).value == pytest.approx(math.sin(t) / t,
                                                                                             abs=1e-10)


def test_phi_orthant_region_closed_form():
    # (1/N) int_0^N e(xi t) dt
    N, xi = 8, 0.05
    t = 2 * math.pi * xi * N
    expect = (cmath.exp(1j * t) - 1) / (1j * t)
    assert phi_integral([xi], INTERVAL, N, G1, region="orthant").value == pytest.approx(expect, abs=1e-10)


def test_phi_ball_rotation_invariance():
    g = build_gamma(2, 1)
    B = ConvexBody.ball(2)
    a = phi_integral([0.02, 0.0, 0.0], B, 10, g).value
    b = phi_integral([0.0, 0.02, 0.0], B, 10, g).value
    assert a == pytest.approx(b, abs=1e-9)


def test_psi_vanishes_at_zero_and_is_odd():
    assert abs(psi_pv([0.0], INTERVAL, 10, G1, K1).value) < 1e-12
    a = psi_pv([0.013], INTERVAL, 10, G1, K1).value
    b = psi_pv([-0.013], INTERVAL, 10, G1, K1).value
    assert a == pytest.approx(-b, abs=1e-8)
    # 1-D: int_{-N}^{N} e(xi x)/(2x) dx = i Si(2 pi xi N)
    from scipy.special import sici
    assert a == pytest.approx(1j * sici(2 * math.pi * 0.013 * 10)[0], abs=1e-7)


def test_gaussian_sum_examples():
    s = SumStructure(0, 1, G12)
    assert gaussian_sum((1, 1), 1, s) == pytest.approx(1)
    assert gaussian_sum((1, 1), 2, s) == pytest.approx(1)
    assert gaussian_sum((4, 1), 4, s) == pytest.approx(1j, abs=1e-14)


@pytest.mark.parametrize("kp,kpp,k,deg", [(0, 1, 1, 2), (1, 0, 1, 3), (1, 1, 2, 1)])
@pytest.mark.parametrize("q", [3, 4, 6, 9, 12])
def test_gaussian_sum_matches_oracle(kp, kpp, k, deg, q):
    s = SumStructure(kp, kpp, build_gamma(k, deg))
    rng = np.random.default_rng(q)
    for _ in range(5):
        while True:
            a = tuple(int(v) for v in rng.integers(1, q + 1, size=s.gamma.d))
            if math.gcd(q, *a) == 1:
                break
        expect = gauss_sum(a, q, kp, kpp, s.gamma.gammas)
        for method in ("direct", "factor"):
            assert gaussian_sum(a, q, s, method) == pytest.approx(expect, abs=1e-12)


def test_gauss_table_matches_pointwise():
    s = SumStructure(0, 1, G12)
    tab = gauss_table(12, s)
    for a in [(1, 1), (5, 7), (12, 1), (3, 4)]:
        assert tab[a[0] % 12, a[1] % 12] == pytest.approx(gaussian_sum(a, 12, s, "direct"), abs=1e-12)
    with pytest.raises(SizeError):
        gauss_table(500, SumStructure(1, 1, build_gamma(2, 1)))


def test_admissible_mask():
    m = admissible_mask(6, 2)
    assert m[1, 0] and m[0, 5] and not m[0, 0] and not m[2, 4] and m[2, 3]


def test_gauss_scan_and_decay_fit():
    rows = gauss_scan(60, SumStructure(0, 1, G12))
    assert rows[0].max_abs == pytest.approx(1.0)
    fit = fit_decay(rows, C_cap=5.0)
    assert fit.C <= 5.0 + 1e-9
    assert fit.constant_at(fit.delta) == pytest.approx(fit.C)
    assert fit.constant_at(0.1) <= fit.constant_at(fit.delta)


def test_major_arc_zero_fraction():
    s = SumStructure(0, 1, G12)
    orbit = enumerate_orbit(INTERVAL, 64, 0, 1, P, gamma=G12)
    res = major_arc_error(RationalFrequency((1, 1), 1), 64, s, INTERVAL, orbit)
    assert res.error == 0.0


def test_major_arc_hypothesis_flag():
    s = SumStructure(0, 1, G12)
    orbit = enumerate_orbit(INTERVAL, 64, 0, 1, P, gamma=G12)
    res = major_arc_error(RationalFrequency((1, 1), 97), 64, s, INTERVAL, orbit)
    assert any("hypothesis" in f for f in res.flags)
    assert math.isfinite(res.error)


def test_envelope_k1_closed_form_and_zero():
    rep = envelope_check([[0.0]], 64, INTERVAL, G1)
    assert rep.violations == 0 and rep.near_one_ratio_max == 0.0 and rep.decay_ratio_max == 1.0
    xs = envelope_grid(300, G1, 64, seed=2)
    for xi in xs[:50]:
        t = 2 * math.pi * float(xi[0]) * 64
        assert abs(math.sin(t) / t) <= min(1.0, 1 / abs(t)) + 1e-15
    rep = envelope_check(xs, 64, INTERVAL, G1)
    assert rep.ok


def test_envelope_k2():
    rep = envelope_check(envelope_grid(200, build_gamma(2, 1), 32, seed=3), 32, ConvexBody.cube(2),
                         build_gamma(2, 1))
    assert rep.ok and rep.C_fit <= 10


def test_multiplier_sweep_kinds():
    samples = multiplier_sweep([[0.1], [0.2]], ORBIT10)
    assert [s.kind for s in samples] == ["discrete-average"] * 2
    with pytest.raises(DomainError):
        multiplier_sweep([[0.1]], ORBIT10, "bogus")
