import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rvl.errors import DomainError, ImageOverflowError, SizeError
from rvl.lattice import (ConvexBody, PolynomialMap, WeightedOrbit, build_gamma, counting, enumerate_orbit,
                         lift_polynomial)
from rvl.numtheory import sieve_primes

from oracles import segmented_sieve

P = sieve_primes(20_000)


def test_build_gamma_examples():
    g = build_gamma(1, 2)
    assert g.gammas == ((1,), (2,)) and g.d == 2
    g = build_gamma(2, 1)
    assert g.gammas == ((0, 1), (1, 0), (1, 1)) and g.d == 3
    assert g.sizes.tolist() == [1, 1, 2]
    assert build_gamma(2, 2).d == 8
    with pytest.raises(SizeError):
        build_gamma(7, 9)
    with pytest.raises(DomainError):
        build_gamma(0, 2)


@given(st.integers(1, 3), st.integers(1, 3))
def test_gamma_is_lexicographic_and_complete(k, degree):
    g = build_gamma(k, degree)
    assert list(g.gammas) == sorted(g.gammas)
    assert g.d == (degree + 1) ** k - 1
    assert all(any(x) for x in g.gammas)
    assert g.sizes.tolist() == [sum(x) for x in g.gammas]


def test_lift_examples():
    gamma, L = lift_polynomial(PolynomialMap.from_rows(1, [{(2,): 1}]))
    assert gamma.gammas == ((1,), (2,)) and L.tolist() == [[0, 1]]
    gamma, L = lift_polynomial(PolynomialMap.from_rows(2, [{(1, 0): 1, (0, 1): 1}, {(1, 1): 1}]))
    assert gamma.gammas == ((0, 1), (1, 0), (1, 1))
    assert L.tolist() == [[1, 1, 0], [0, 0, 1]]
    gamma, L = lift_polynomial(PolynomialMap.from_rows(1, [{(1,): 3}]), degree=1)
    assert L.tolist() == [[3]]


def test_lift_rejects_constant_term():
    with pytest.raises(DomainError):
        lift_polynomial(PolynomialMap.from_rows(1, [{(0,): 1, (1,): 1}]))


polys = st.dictionaries(st.tuples(st.integers(0, 2), st.integers(0, 2)).filter(any), st.integers(-5, 5),
                        min_size=1, max_size=5)


@settings(max_examples=50, deadline=None)
@given(st.lists(polys, min_size=1, max_size=3), st.lists(st.integers(-10, 10), min_size=2, max_size=2))
def test_lift_identity_exact(rows, x):
    P_ = PolynomialMap.from_rows(2, rows)
    gamma, L = lift_polynomial(P_)
    q = gamma.images_exact(x)
    assert [sum(int(L[j, i]) * q[i] for i in range(gamma.d)) for j in range(P_.d0)] == P_.evaluate(x)


def test_body_inclusions_and_scaling():
    for B in (ConvexBody.interval(), ConvexBody.cube(2), ConvexBody.ball(2), ConvexBody.ball(3)):
        assert B.check_inclusions()
    B = ConvexBody.ball(2)
    x = np.array([[3, 4], [3, 5]])
    assert B.contains(x, 5).tolist() == [True, False]  # closed membership
    assert B.contains(x / 5.0).tolist() == [True, False]
    assert ConvexBody.ball(2).orthant_volume == pytest.approx(math.pi / 4)
    assert ConvexBody.cube(2).orthant_volume == 1.0


def test_custom_body_volume_estimate():
    B = ConvexBody.custom(2, lambda x: np.abs(x).sum(axis=1) <= 1, iota=0.5)
    assert abs(B.volume - 2.0) < 5 * B.volume_stderr
    assert B.check_inclusions()


def test_orbit_examples():
    o = enumerate_orbit(ConvexBody.interval(), 10, 0, 1, P)
    assert o.points.ravel().tolist() == [2, 3, 5, 7]
    assert o.total_weight == pytest.approx(math.log(210), abs=1e-12)
    o = enumerate_orbit(ConvexBody.cube(1), 3, 1, 0, P)
    assert o.points.ravel().tolist() == [1, 2, 3] and o.weights.tolist() == [1, 1, 1]
    o = enumerate_orbit(ConvexBody.interval(), 10, 0, 1, P, signed=True)
    assert sorted(o.points.ravel().tolist()) == [-7, -5, -3, -2, 2, 3, 5, 7]
    assert np.allclose(o.weights, np.log(np.abs(o.points.ravel())))


def test_counting_examples():
    assert counting(ConvexBody.interval(), 10, 0, 1, P) == (4, pytest.approx(math.log(210)))
    assert counting(ConvexBody.cube(2), 10, 1, 1, P)[0] == 40
    assert counting(ConvexBody.ball(2), 1, 1, 1, P) == (0, 0.0)
    assert counting(ConvexBody.interval(), 1, 0, 1, P) == (0, 0.0)


def _brute_orbit(B, N, kprime, kpp):
    primes = segmented_sieve(N)
    axes = [range(1, N + 1)] * kprime + [primes] * kpp
    pts = [x for x in itertools.product(*axes) if B.contains(np.array([x]), N)[0]]
    w = [math.prod(math.log(v) for v in x[kprime:]) for x in pts]
    return sorted(pts), sum(w)


@pytest.mark.parametrize("name,k,kp", [("cube", 2, 1), ("ball", 2, 1), ("ball", 2, 0), ("cube", 3, 2),
                                       ("ball", 3, 1)])
@pytest.mark.parametrize("N", [1, 7, 30])
def test_orbit_matches_bruteforce(name, k, kp, N):
    B = ConvexBody.cube(k) if name == "cube" else ConvexBody.ball(k)
    o = enumerate_orbit(B, N, kp, k - kp, P)
    pts, theta = _brute_orbit(B, N, kp, k - kp)
    assert sorted(map(tuple, o.points.tolist())) == pts
    assert o.total_weight == pytest.approx(theta, rel=1e-12, abs=1e-12)
    assert counting(B, N, kp, k - kp, P) == (len(pts), pytest.approx(theta, rel=1e-12, abs=1e-12))


def test_orbit_deterministic_across_threads():
    B = ConvexBody.ball(2)
    a = enumerate_orbit(B, 300, 1, 1, P, gamma=build_gamma(2, 1), threads=1)
    b = enumerate_orbit(B, 300, 1, 1, P, gamma=build_gamma(2, 1), threads=4)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.images, b.images)


def test_counting_monotone():
    B = ConvexBody.ball(2)
    prev = (0, 0.0)
    for N in range(1, 60):
        cur = counting(B, N, 1, 1, P)
        assert cur[0] >= prev[0] and cur[1] >= prev[1]
        prev = cur


def test_theta_ratio_tends_to_one():
    B = ConvexBody.ball(2)
    errs = [abs(counting(B, 2**j, 1, 1, P)[1] / (B.orthant_volume * 4**j) - 1) for j in (6, 8, 10)]
    assert errs[-1] < 3 / math.log(2**10)


def test_image_overflow_is_explicit():
    with pytest.raises(ImageOverflowError):
        build_gamma(1, 5).images(np.array([[10**13]]))
    assert build_gamma(1, 2).images_exact([10**13]) == [10**13, 10**26]


def test_orbit_cap():
    with pytest.raises(SizeError):
        enumerate_orbit(ConvexBody.cube(2), 1000, 2, 0, P, cap=100)


def test_orbit_save_load_roundtrip(tmp_path):
    o = enumerate_orbit(ConvexBody.cube(2), 20, 1, 1, P, gamma=build_gamma(2, 1))
    o.save(tmp_path / "o.npz")
    back = WeightedOrbit.load(tmp_path / "o.npz")
    assert np.array_equal(back.points, o.points) and np.array_equal(back.images, o.images)
    assert back.gamma == o.gamma and back.N == 20
    o.to_csv(tmp_path / "o.csv")
    assert (tmp_path / "o.csv").read_text().splitlines()[0] == "x0,x1,weight,q0,q1,q2"
