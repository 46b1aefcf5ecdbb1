import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rvl.errors import DomainError
from rvl.expsums import (ExpSumSpec, Region, check_amplitude, minor_arc_frequencies, prime_weyl_sum,
                         progression_sums, q_window, regularity_ratio, regularity_scan, weyl_sum)
from rvl.lattice import ConvexBody, build_gamma, counting, enumerate_orbit
from rvl.multipliers import m_hat
from rvl.numtheory import sieve_primes

from oracles import segmented_sieve

P = sieve_primes(20_000)


def test_weyl_sum_examples():
    spec = ExpSumSpec(1, ["integers"], {}, Region.box([-3], [3]))
    assert weyl_sum(spec, 3).value == 7
    spec = ExpSumSpec(1, ["naturals"], {(1,): Fraction(1, 2)})
    assert weyl_sum(spec, 4).value == pytest.approx(0, abs=1e-14)
    spec = ExpSumSpec(1, ["primes"], {(1,): Fraction(1, 2)})
    assert weyl_sum(spec, 10, P).value == pytest.approx(-2, abs=1e-14)


def test_weyl_sum_quadratic_matches_direct_loop():
    spec = ExpSumSpec(1, ["integers"], {(2,): Fraction(1, 2)})
    expect = sum(cmath.exp(1j * math.pi * n * n) for n in range(-100, 101))
    assert weyl_sum(spec, 100).value == pytest.approx(expect, abs=1e-10)


def test_weyl_sum_two_dimensional_oracle():
    ps = segmented_sieve(40)
    spec = ExpSumSpec(2, ["naturals", "primes"], {(1, 1): 0.137, (0, 2): Fraction(3, 11)},
                      Region.ball(2, 40), logweights=True)
    expect = sum(cmath.exp(2j * math.pi * (0.137 * n * p + 3 * p * p / 11)) * math.log(p)
                 for n in range(1, 41) for p in ps if n * n + p * p <= 1600)
    assert weyl_sum(spec, 40, P).value == pytest.approx(expect, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_conjugation_symmetry(a, b):
    s1 = weyl_sum(ExpSumSpec(1, ["primes"], {(1,): a, (2,): b}), 300, P).value
    s2 = weyl_sum(ExpSumSpec(1, ["primes"], {(1,): -a, (2,): -b}), 300, P).value
    assert abs(s1 - s2.conjugate()) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.floats(0, 1), st.integers(2, 7))
def test_progression_partition(Q, c, q):
    spec = ExpSumSpec(1, ["signed-primes"], {(1,): c, (3,): Fraction(1, q)})
    full = weyl_sum(spec, 500, P).value
    assert abs(progression_sums(spec, 500, Q, P).sum() - full) < 1e-9


def test_trivial_bound():
    spec = ExpSumSpec(1, ["primes"], {(1,): 0.3}, logweights=True)
    res = weyl_sum(spec, 1000, P)
    assert abs(res.value) <= res.count * math.log(1000)


def test_prime_weyl_sum_consistency_with_multiplier():
    gamma = build_gamma(2, 1)
    B = ConvexBody.ball(2)
    orbit = enumerate_orbit(B, 60, 1, 1, P, gamma=gamma)
    theta = counting(B, 60, 1, 1, P)[1]
    assert prime_weyl_sum(np.zeros(3), 1, 1, gamma, B, 60, P) == pytest.approx(theta, rel=1e-12)
    rng = np.random.default_rng(1)
    for xi in rng.uniform(0, 1, size=(100, 3)):
        val = prime_weyl_sum(xi, 1, 1, gamma, B, 60, P) / theta
        assert abs(val - m_hat([xi], orbit)[0]) < 1e-9


def test_prime_weyl_sum_integral_frequency():
    g = build_gamma(1, 2)
    theta = counting(ConvexBody.interval(), 100, 0, 1, P)[1]
    assert prime_weyl_sum([1.0, 2.0], 0, 1, g, ConvexBody.interval(), 100, P) == pytest.approx(theta, rel=1e-12)


def test_regularity_preconditions():
    with pytest.raises(DomainError):
        regularity_scan("integers", 2, [100], 100)
    with pytest.raises(DomainError):
        regularity_scan("reals", 2, [100], 2)


def test_regularity_quadratic_example_finite():
    r = regularity_ratio("integers", {(2,): Fraction(1, 2)}, 100, 1, [1.0])
    assert math.isfinite(r[1.0]) and r[1.0] > 0


def test_regularity_window_excludes_small_q():
    lo, hi = q_window(1000, 2, 2.0)
    assert lo > 1 and hi < 1000**2
    rows = regularity_scan("primes", 2, [1000, 4000], 2, trials=2, primes=P)
    assert all(lo <= r.q for r in rows if not r.skipped)
    assert all(r.ratios[1.0] > 0 for r in rows)
    again = regularity_scan("primes", 2, [1000, 4000], 2, trials=2, primes=P)
    assert [r.ratios for r in rows] == [r.ratios for r in again]


def test_amplitude_check():
    spec = ExpSumSpec(1, ["integers"], {(1,): 0.1}, amplitude=lambda x: 1 / (1 + np.abs(x[:, 0])) ** 0.5)
    assert check_amplitude(spec, 50, 1.0)
    assert not check_amplitude(spec, 50, 0.5)


def test_minor_arc_frequencies_in_window():
    g = build_gamma(1, 2)
    freqs = minor_arc_frequencies(20, g, 1, (10, 500), seed=3)
    for f in freqs:
        assert 10 <= f["q"] <= 500 and math.gcd(f["a"], f["q"]) == 1
        dist = abs((f["xi"][1] - f["a"] / f["q"] + 0.5) % 1 - 0.5)
        assert dist <= 1 / f["q"] ** 2 + 1e-15
    assert [f["q"] for f in freqs] == [f["q"] for f in minor_arc_frequencies(20, g, 1, (10, 500), seed=3)]


def test_sum_definition_validation():
    with pytest.raises(DomainError):
        ExpSumSpec(1, ["integers"], {(0,): 1.0})
    with pytest.raises(DomainError):
        ExpSumSpec(2, ["integers"], {})
    with pytest.raises(DomainError):
        weyl_sum(ExpSumSpec(1, ["integers"], {}, Region.box([-20], [20])), 10)
