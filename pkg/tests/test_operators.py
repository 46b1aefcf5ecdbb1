import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rvl.errors import DomainError
from rvl.lattice import ConvexBody, build_gamma, counting, enumerate_orbit, lift_polynomial, PolynomialMap
from rvl.numtheory import sieve_primes
from rvl.operators import (CZKernel, SparseFunction, TelescopingSetup, apply_average, apply_singular,
                           compare_weighted_unweighted, telescoping_l1, validate_kernel)

P = sieve_primes(10_000)
G1 = build_gamma(1, 1)
I1 = np.eye(1, dtype=np.int64)
ORBIT10 = enumerate_orbit(ConvexBody.interval(), 10, 0, 1, P, gamma=G1)
SIGNED10 = enumerate_orbit(ConvexBody.interval(), 10, 0, 1, P, signed=True, gamma=G1, punctured=True)
LN210 = math.log(210)


def _dict(f):
    return {k: complex(v) for k, v in f.to_dict().items()}


def test_average_examples():
    g = _dict(apply_average(SparseFunction.delta(1), ORBIT10, I1))
    assert set(g) == {(2,), (3,), (5,), (7,)}
    for p in (2, 3, 5, 7):
        assert g[(p,)] == pytest.approx(math.log(p) / LN210, abs=1e-15)
    assert g[(2,)].real == pytest.approx(0.1296, abs=1e-4)
    g = _dict(apply_average(SparseFunction.delta(1), ORBIT10, I1, weighted=False))
    assert g == {(p,): 0.25 for p in (2, 3, 5, 7)}
    assert len(apply_average(SparseFunction.zero(1), ORBIT10, I1)) == 0


def test_singular_examples():
    K = CZKernel.builtin(1)
    g = _dict(apply_singular(SparseFunction.delta(1), K, SIGNED10, I1))
    for p in (2, 3, 5, 7):
        assert g[(p,)] == pytest.approx(math.log(p) / (2 * p), abs=1e-15)
        assert g[(-p,)] == pytest.approx(-math.log(p) / (2 * p), abs=1e-15)
    assert abs(sum(g.values())) < 1e-15
    empty = enumerate_orbit(ConvexBody.interval(), 1, 0, 1, P, signed=True, gamma=G1, punctured=True)
    assert len(apply_singular(SparseFunction.delta(1), K, empty, I1)) == 0


def test_singular_rejects_origin():
    orbit = enumerate_orbit(ConvexBody.cube(2), 5, 2, 0, P, signed=True, gamma=build_gamma(2, 1))
    with pytest.raises(DomainError):
        apply_singular(SparseFunction.delta(3), CZKernel.builtin(2), orbit, np.eye(3, dtype=np.int64))


def test_builtin_kernels_satisfy_size_and_cancellation():
    for k in (1, 2, 3):
        rep = validate_kernel(CZKernel.builtin(k), samples=5000, shells=10)
        assert rep.ok, rep


def test_kernel_gradient_matches_finite_differences():
    K = CZKernel.builtin(2)
    x = np.array([[1.3, -0.7], [-2.0, 0.4]])
    h = 1e-6
    num = np.stack([(K(x + h * e) - K(x - h * e)) / (2 * h) for e in np.eye(2)], axis=1)
    assert np.allclose(K.gradient(x), num, atol=1e-7)


functions = st.dictionaries(st.tuples(st.integers(-30, 30)), st.complex_numbers(max_magnitude=10, allow_nan=False,
                                                                               allow_infinity=False),
                            min_size=1, max_size=8)

# P(p) = p + p^2 as an operator on Z
GAMMA2, L2 = lift_polynomial(PolynomialMap.from_rows(1, [{(1,): 1, (2,): 1}]))
ORBIT2 = enumerate_orbit(ConvexBody.interval(), 40, 0, 1, P, gamma=GAMMA2)


@settings(max_examples=60, deadline=None)
@given(functions, functions, st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_average_linearity(f, g, alpha):
    F, G = SparseFunction.from_dict(1, f), SparseFunction.from_dict(1, g)
    lhs = apply_average(F.scale(alpha) + G, ORBIT2, L2)
    rhs = apply_average(F, ORBIT2, L2).scale(alpha) + apply_average(G, ORBIT2, L2)
    diff = lhs + rhs.scale(-1)
    assert diff.norm(np.inf) <= 1e-12 * max(1.0, F.norm(np.inf) * abs(alpha) + G.norm(np.inf))


@settings(max_examples=60, deadline=None)
@given(functions, st.integers(-50, 50))
def test_average_mass_contraction_translation(f, v):
    F = SparseFunction.from_dict(1, f)
    g = apply_average(F, ORBIT2, L2)
    assert abs(g.values.sum() - F.values.sum()) <= 1e-12 * max(1.0, np.abs(F.values).sum())
    assert g.norm(np.inf) <= F.norm(np.inf) * (1 + 1e-12)
    shifted = apply_average(F.translate([v]), ORBIT2, L2)
    expect = g.translate([v])
    assert np.array_equal(shifted.coords, expect.coords) and np.array_equal(shifted.values, expect.values)


def test_sparse_function_io(tmp_path):
    f = SparseFunction.random(np.random.default_rng(0), 2, 15)
    f.to_csv(tmp_path / "f.csv")
    f.to_binary(tmp_path / "f.bin")
    for back in (SparseFunction.from_csv(tmp_path / "f.csv"), SparseFunction.from_binary(tmp_path / "f.bin")):
        assert np.array_equal(back.coords, f.coords) and np.array_equal(back.values, f.values)


def test_sparse_function_drops_zeros():
    f = SparseFunction.from_dict(1, {(0,): 1.0, (1,): 0.0})
    assert len(f) == 1


def test_weighted_unweighted_examples():
    t = compare_weighted_unweighted(SparseFunction.delta(1), G1, I1, ConvexBody.interval(), [1, 2, 64, 1024],
                                    primes=P)
    assert t.rows[0].skipped and not t.rows[1].skipped
    norms = [r.norm for r in t.rows[1:]]
    assert norms[0] == 0.0  # a single prime: both averages agree
    assert norms[2] < norms[1]
    # no prime axes: both operators coincide
    t = compare_weighted_unweighted(SparseFunction.delta(1), G1, I1, ConvexBody.interval(), [8, 16],
                                    primes=P, kprime=1, kdoubleprime=0)
    assert all(r.norm == 0 for r in t.rows)


def test_weighted_unweighted_direct_value():
    N = 30
    ps = [p for p in range(2, N + 1) if all(p % d for d in range(2, p))]
    theta = sum(math.log(p) for p in ps)
    expect = sum(abs(math.log(p) / theta - 1 / len(ps)) for p in ps)
    t = compare_weighted_unweighted(SparseFunction.delta(1), G1, I1, ConvexBody.interval(), [N], primes=P)
    assert t.rows[0].norm == pytest.approx(expect, rel=1e-12)


def test_telescoping_examples():
    setup = TelescopingSetup(ConvexBody.interval(), 0, 1, P)
    res = telescoping_l1("average", 5, 10, setup)
    i = res.points.ravel().tolist().index(2)
    expect = (1 / math.log(30) - 1 / math.log(210)) * math.log(2)
    assert res.pointwise_direct[i] == pytest.approx(expect, abs=1e-15)
    assert expect == pytest.approx(0.0742, abs=1e-4)
    assert res.max_pointwise_error < 1e-12
    # no new points between 8 and 9: only the theta ratio telescopes
    res = telescoping_l1("average", 8, 9, setup)
    assert res.lhs == pytest.approx(0.0, abs=1e-15)


def test_telescoping_singular_single_shell():
    K = CZKernel.builtin(1)
    setup = TelescopingSetup(ConvexBody.interval(), 0, 1, P, K)
    res = telescoping_l1("singular", 4, 12, setup)
    shell = [5, 7, 11]
    expect = 2 * sum(math.log(p) / (2 * p) for p in shell)
    assert res.lhs == pytest.approx(expect, rel=1e-12)
    assert res.max_pointwise_error == 0.0


@pytest.mark.parametrize("kind,name", [("average", "cube"), ("singular", "ball"), ("average", "ball")])
def test_telescoping_closed_forms_in_2d(kind, name):
    B = ConvexBody.cube(2) if name == "cube" else ConvexBody.ball(2)
    setup = TelescopingSetup(B, 1, 1, P, CZKernel.builtin(2) if kind == "singular" else None)
    res = telescoping_l1(kind, 7, 19, setup)
    assert res.max_pointwise_error < 1e-12
    assert res.lhs > 0


def test_telescoping_preconditions():
    setup = TelescopingSetup(ConvexBody.interval(), 0, 1, P)
    with pytest.raises(DomainError):
        telescoping_l1("average", 5, 5, setup)
    with pytest.raises(DomainError):
        telescoping_l1("singular", 5, 6, setup)


def test_model_ergodic_averages_stabilize():
    # f = indicator of a box on Z, shift system; M_{2^n} f(0) has finite 1-variation over the tested range
    f = SparseFunction.from_dict(1, {(x,): 1.0 for x in range(-40, 41)})
    vals = []
    for n in range(3, 12):
        orbit = enumerate_orbit(ConvexBody.interval(), 2**n, 0, 1, P, gamma=G1)
        g = apply_average(f, orbit, -I1)  # g(0) = sum w f(0 + p)
        vals.append(g.to_dict().get((0,), 0.0))
    diffs = np.abs(np.diff(vals))
    assert np.isfinite(diffs.sum())
    assert abs(vals[-1]) < abs(vals[0])
