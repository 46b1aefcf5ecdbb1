import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rvl.errors import DomainError, OutOfRangeError, SizeError
from rvl.numtheory import (FactorialInt, convergents, dirichlet_approx, factorize, moebius, moebius_table,
                           ramanujan_average, ramanujan_closed_form, sieve_primes, theta_progression, torus_distance,
                           totient, totient_table, units)

from oracles import min_distance_multiple, moebius as moebius_oracle, ramanujan, segmented_sieve, totient as totient_oracle

# frozen from oracles.segmented_sieve(10**6)
PI_10_6 = 78498


def test_small_sieves():
    assert sieve_primes(10).primes.tolist() == [2, 3, 5, 7]
    assert sieve_primes(2).primes.tolist() == [2]
    with pytest.raises(DomainError):
        sieve_primes(1)


def test_sieve_million_matches_segmented_oracle():
    P = sieve_primes(10**6)
    assert P.count(10**6) == PI_10_6
    assert P.primes.tolist() == segmented_sieve(10**6)


def test_logw_is_natural_log():
    P = sieve_primes(1000)
    for p in (2, 3, 997):
        assert P.logw(p) == math.log(p)


def test_sieve_cache_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv("RVL_SIEVE_CACHE", str(tmp_path))
    sieve_primes.cache_clear()
    try:
        first = sieve_primes(5003)
        assert any(tmp_path.iterdir())
        sieve_primes.cache_clear()
        second = sieve_primes(5003)
        assert np.array_equal(first.primes, second.primes)
    finally:
        sieve_primes.cache_clear()


def test_theta_requires_coverage():
    P = sieve_primes(100)
    with pytest.raises(OutOfRangeError):
        theta_progression(1000, 1, 1, P)


@pytest.mark.parametrize("q,phi,mu", [(1, 1, 1), (12, 4, 0), (30, 8, -1), (7, 6, -1), (35, 24, 1)])
def test_totient_moebius_examples(q, phi, mu):
    assert totient(q) == phi
    assert moebius(q) == mu


def test_tables_match_oracles():
    assert totient_table(300)[1:].tolist() == [totient_oracle(q) for q in range(1, 301)]
    assert moebius_table(300)[1:].tolist() == [moebius_oracle(q) for q in range(1, 301)]


def test_totient_lower_bound():
    phi = totient_table(10**5)[1:]
    q = np.arange(1, 10**5 + 1)
    assert np.all(phi >= 0.2 * q**0.9)


def test_units():
    assert units(12).tolist() == [1, 5, 7, 11]
    with pytest.raises(SizeError):
        units(10**6 + 1)


def test_theta_progression_examples():
    P = sieve_primes(1000)
    assert theta_progression(10, 1, 1, P) == pytest.approx(math.log(210), abs=1e-12)
    assert theta_progression(10, 4, 1, P) == pytest.approx(math.log(5), abs=1e-12)
    assert theta_progression(2, 3, 1, P) == 0.0


@pytest.mark.parametrize("q", [1, 2, 6, 12, 30, 97])
def test_theta_split_consistency(q):
    P = sieve_primes(5000)
    x = 4999.5
    split = sum(theta_progression(x, q, int(r), P) for r in units(q))
    split += sum(math.log(p) for p in factorize(q) if p <= x)
    assert split == pytest.approx(theta_progression(x, 1, 1, P), rel=1e-12)


def test_ramanujan_examples():
    assert ramanujan_average(1, 1) == pytest.approx(1)
    assert ramanujan_average(2, 4) == pytest.approx(-1, abs=1e-12)
    assert ramanujan_average(1, 4) == pytest.approx(0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 200), st.integers(-500, 500))
def test_ramanujan_matches_oracle_and_closed_form(q, a):
    val = ramanujan_average(a, q)
    assert abs(val - ramanujan(a, q)) < 1e-10
    assert abs(val - ramanujan_closed_form(a, q)) < 1e-12
    g = math.gcd(a, q)
    assert ramanujan_closed_form(a, q) == moebius_oracle(q // g) / totient_oracle(q // g)


def test_dirichlet_examples():
    r = dirichlet_approx(0.5, 10)
    assert (r.a, r.q) == (1, 2)
    r = dirichlet_approx(0.1415926, 100)
    assert (r.a, r.q) == (1, 7)
    assert r.err == pytest.approx(float(Fraction(1, 7) - Fraction("0.1415926")), abs=1e-15)
    assert r.err <= 1 / 700
    r = dirichlet_approx(0.0, 5)
    assert (r.a, r.q) == (1, 1)


def test_dirichlet_guarantee_sweep():
    rng = np.random.default_rng(11)
    for Q in (10, 100, 1000):
        for xi in rng.uniform(0, 1, 3000):
            r = dirichlet_approx(float(xi), Q)
            assert r.q <= Q and math.gcd(r.a, r.q) == 1
            assert r.err <= 1 / (r.q * Q) * (1 + 1e-12)


@settings(max_examples=150, deadline=None)
@given(st.fractions(0, 1, max_denominator=500), st.integers(1, 60))
def test_dirichlet_is_best_approximation_of_second_kind(xi, Q):
    xi = Fraction(float(xi - math.floor(xi)))
    r = dirichlet_approx(float(xi), Q)
    assert r.err <= 1 / (r.q * Q) + 1e-12
    assert abs(float(r.q * Fraction(r.err)) - float(min_distance_multiple(xi, Q))) < 1e-12


def test_dirichlet_canonicalizes():
    assert dirichlet_approx(1.25, 10).q == dirichlet_approx(0.25, 10).q == 4


def test_convergents_of_golden_ratio():
    cf = list(convergents(Fraction(89, 55)))
    assert cf == [(1, 1), (2, 1), (3, 2), (5, 3), (8, 5), (13, 8), (21, 13), (34, 21), (89, 55)]


def test_torus_distance():
    assert torus_distance(0.05, 0.95) == pytest.approx(0.1)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10**9))
def test_factorize_roundtrip(n):
    f = factorize(n)
    assert math.prod(p**e for p, e in f.items()) == n
    assert all(factorize(p) == {p: 1} for p in f)


def test_factorial_int():
    f = FactorialInt(10)
    assert math.prod(p**e for p, e in f.exponents.items()) == math.factorial(10)
    assert f.log() == pytest.approx(math.log(math.factorial(10)))
    assert f.divides(math.factorial(10)) and not f.divides(math.factorial(9))
    assert f.valuation(2) == 8
    assert f.power(3) == {p: 3 * e for p, e in f.exponents.items()}
