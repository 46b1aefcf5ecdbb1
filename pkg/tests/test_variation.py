import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from rvl.errors import DomainError, SizeError
from rvl.variation import (IndexedSequence, ScaleLadder, concatenation_bound, oscillation, pad_to_dyadic,
                           split_variation, vr, vr_bruteforce, vr_dyadic_bound)

from oracles import vr_brute

reals = st.floats(-100, 100, allow_nan=False)
seqs = st.lists(reals, min_size=1, max_size=10)
rs = st.sampled_from([1.0, 1.5, 2.0, 2.5, 3.0, 10.0])


def test_vr_examples():
    assert vr([3, 3, 3], 2) == 0
    assert vr([0, 1, 2], 2) == 2
    assert vr([0, 1, 0], 2) == pytest.approx(math.sqrt(2))
    assert vr_bruteforce([0, 1, 0], 2) == pytest.approx(math.sqrt(2))
    assert vr_bruteforce([5], 2) == 0
    assert vr([0, 1], 7.3) == 1 and vr_bruteforce([0, 1], 7.3) == 1


@settings(max_examples=300, deadline=None)
@given(seqs, rs)
def test_vr_matches_independent_oracle(a, r):
    expect = vr_brute(a, r)
    assert vr(a, r) == pytest.approx(expect, rel=1e-12, abs=1e-12)
    assert vr_bruteforce(a, r) == pytest.approx(expect, rel=1e-12, abs=1e-12)


def test_vr_oracle_equivalence_complex():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 13))
        a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        for r in (2.0, 2.5, 3.0, 10.0):
            v, b = vr(a, r), vr_bruteforce(a, r)
            assert abs(v - b) <= 1e-12 * max(b, 1e-300)


def test_vr_large_r_does_not_overflow():
    a = np.array([0.0, 1e200, -1e200, 3e199])
    assert math.isfinite(vr(a, 64))
    assert vr(a, 64) == pytest.approx(2e200, rel=1e-9)
    with pytest.raises(DomainError):
        vr(a, 65)
    with pytest.raises(DomainError):
        vr(a, 0.5)


def test_bruteforce_length_cap():
    with pytest.raises(SizeError):
        vr_bruteforce(np.zeros(40), 2)


@settings(max_examples=200, deadline=None)
@given(seqs, rs, st.floats(0, 5))
def test_vr_monotone_in_r(a, r, extra):
    assert vr(a, r + extra) <= vr(a, r) * (1 + 1e-12) + 1e-12


@settings(max_examples=200, deadline=None)
@given(seqs, rs)
def test_sup_and_minkowski_bounds(a, r):
    a = np.asarray(a)
    v = vr(a, r)
    for j0 in range(len(a)):
        assert np.abs(a).max() <= (v + abs(a[j0])) * (1 + 1e-12) + 1e-12
    assert v <= 2 * np.sum(np.abs(a) ** r) ** (1 / r) * (1 + 1e-12) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(reals, min_size=3, max_size=14), rs, st.data())
def test_concatenation_bound(a, r, data):
    n = len(a)
    inner = data.draw(st.lists(st.integers(1, n - 2), unique=True, max_size=4))
    cuts = [0, *sorted(inner), n - 1]
    lhs, rhs = concatenation_bound(a, cuts, r)
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


def test_concatenation_validation():
    with pytest.raises(DomainError):
        concatenation_bound([1, 2, 3], [0, 0, 2], 2)


def test_dyadic_examples():
    lhs, rhs = vr_dyadic_bound(np.array([0, 1, 0, 1, 0.0]), 2)
    assert lhs == pytest.approx(2.0)
    assert rhs == pytest.approx(2 * math.sqrt(2))
    assert vr_dyadic_bound(np.ones(5), 2) == (0.0, 0.0)
    with pytest.raises(DomainError):
        vr_dyadic_bound(np.ones(6), 2)
    with pytest.raises(DomainError):
        vr_dyadic_bound(np.ones(5), 1.5)


@settings(max_examples=100, deadline=None)
@given(st.lists(reals, min_size=1, max_size=40), st.sampled_from([2.0, 3.0, 5.0]))
def test_dyadic_bound_never_violated(a, r):
    padded = pad_to_dyadic(a)
    n = len(padded) - 1
    assert n & (n - 1) == 0
    lhs, rhs = vr_dyadic_bound(padded, r)
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


def test_oscillation_examples():
    seq = IndexedSequence.of(np.full(9, 2.0))
    assert oscillation(seq, [0, 2, 8]) == 0
    seq = IndexedSequence.of([0, 3, -1, 2, 5])
    assert oscillation(seq, [0, 4]) == pytest.approx(5.0)
    assert oscillation(seq, [1, 3]) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        oscillation(seq, [0, 7])


@settings(max_examples=150, deadline=None)
@given(st.lists(reals, min_size=2, max_size=30), st.sampled_from([2.0, 2.5, 4.0]), st.data())
def test_oscillation_holder_bound(a, r, data):
    n = len(a)
    lac = sorted(set(data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=6))))
    assume(len(lac) >= 2)
    seq = IndexedSequence.of(a)
    J = len(lac) - 1
    assert oscillation(seq, lac) <= J ** (0.5 - 1 / r) * vr(a, r) * (1 + 1e-12) + 1e-12


def test_ladder():
    lad = ScaleLadder(0.5)
    Ns = [lad.N(n) for n in range(30)]
    assert Ns[:5] == [1, 2, 2, 3, 4]
    assert all(x <= y for x, y in zip(Ns, Ns[1:]))
    assert lad.Nseq(10) == [1, 2, 3, 4, 5, 6, 7, 8, 9]
    ks = [lad.kappa(s) for s in range(50)]
    assert all(x <= y for x, y in zip(ks, ks[1:]))
    assert lad.Q(0).exponents == {2: 1}  # floor(e) = 2
    with pytest.raises(DomainError):
        ScaleLadder(1.0)


def test_split_examples():
    seq = IndexedSequence(np.arange(1, 40), np.full(39, 1.5))
    res = split_variation(seq, 0.5, 2.5)
    assert (res.long, res.short, res.total) == (0.0, 0.0, 0.0)


def test_split_random_walks():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = np.cumsum(rng.standard_normal(100) + 1j * rng.standard_normal(100))
        res = split_variation(IndexedSequence(np.arange(1, 101), a), 0.5, 2.5)
        assert res.holds
        assert res.total <= 2 * (res.long + res.short) * (1 + 1e-12)


def test_indexed_sequence_validation():
    with pytest.raises(DomainError):
        IndexedSequence([1, 1, 2], [0, 0, 0])
    seq = IndexedSequence([1, 4, 9], [1, 2, 3])
    assert seq.restrict(2, 9).indices.tolist() == [4, 9]
    with pytest.raises(DomainError):
        seq.at([2])
