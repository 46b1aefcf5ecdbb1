"""
r-variation and oscillation seminorms of finite sequences.

V_r(a) = sup over increasing chains j_0 < ... < j_J of (sum |a_{j_{t+1}} - a_{j_t}|^r)^{1/r}
is computed exactly by the O(n^2) recursion

    best[j] = max_{i < j} (best[i] + |a_j - a_i|^r),   V_r = (max_j best[j])^{1/r}.

Differences are divided by the largest pairwise difference before being
raised to the power r, so r up to 64 does not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, SizeError
from .numtheory import FactorialInt

R_MAX = 64.0
BRUTE_MAX_LEN = 16


@dataclass(frozen=True)
class IndexedSequence:
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        val = np.asarray(self.values, dtype=np.complex128).ravel()
        if len(idx) != len(val):
            raise DomainError("indices and values differ in length")
        if np.any(np.diff(idx) <= 0):
            raise DomainError("indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def of(cls, values) -> "IndexedSequence":
        v = np.asarray(values)
        return cls(np.arange(len(v)), v)

    def __len__(self):
        return len(self.values)

    def restrict(self, lo: int, hi: int) -> "IndexedSequence":
        """Entries with lo <= index <= hi."""
        m = (self.indices >= lo) & (self.indices <= hi)
        return IndexedSequence(self.indices[m], self.values[m])

    def at(self, idx) -> "IndexedSequence":
        pos = np.searchsorted(self.indices, idx)
        if np.any(pos >= len(self.indices)) or np.any(self.indices[np.minimum(pos, len(self) - 1)] != idx):
            raise DomainError("requested indices are not all present in the sequence")
        return IndexedSequence(self.indices[pos], self.values[pos])


def _values(seq) -> np.ndarray:
    if isinstance(seq, IndexedSequence):
        return seq.values
    return np.asarray(seq, dtype=np.complex128).ravel()


def _check_r(r: float) -> float:
    if not 1 <= r <= R_MAX:
        raise DomainError(f"r must lie in [1, {R_MAX:g}], got {r}")
    return float(r)


def _normalized(a: np.ndarray) -> tuple[float, np.ndarray]:
    """(largest pairwise distance, a divided by it); parts are divided separately since
    complex division squares the divisor, which underflows for subnormal scales."""
    scale = float(np.max(np.abs(a[:, None] - a[None, :])))
    if scale == 0.0:
        return 0.0, a
    return scale, a.real / scale + 1j * (a.imag / scale)


def vr(seq, r: float) -> float:
    """Exact r-variation by dynamic programming."""
    r = _check_r(r)
    a = _values(seq)
    n = len(a)
    if n == 0:
        raise DomainError("variation of an empty sequence")
    if n == 1:
        return 0.0
    scale, a = _normalized(a)
    if scale == 0.0:
        return 0.0
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + np.abs(a[j] - a[:j]) ** r)
    return scale * float(best.max()) ** (1.0 / r)


@lru_cache(maxsize=BRUTE_MAX_LEN + 1)
def _consecutive_pairs(n: int):
    """All pairs i < j and, per subset mask, whether i and j are adjacent chosen indices."""
    masks = np.arange(1, 2**n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1
    # prefix counts let us test "no chosen index strictly between i and j"
    before = np.concatenate([np.zeros((len(masks), 1), np.int64), np.cumsum(bits, axis=1)], axis=1)
    pairs = np.array([(i, j) for i in range(n - 1) for j in range(i + 1, n)], dtype=np.int64)
    cols = [(bits[:, i] == 1) & (bits[:, j] == 1) & (before[:, j] - before[:, i + 1] == 0) for i, j in pairs]
    consecutive = np.stack(cols, axis=1).astype(float)
    return pairs, consecutive


def vr_bruteforce(seq, r: float) -> float:
    """Maximum over every subsequence (2^n of them); n <= 16."""
    r = _check_r(r)
    a = _values(seq)
    n = len(a)
    if n > BRUTE_MAX_LEN:
        raise SizeError(f"brute force limited to {BRUTE_MAX_LEN} terms, got {n}", size=n)
    if n <= 1:
        return 0.0
    scale, a = _normalized(a)
    if scale == 0.0:
        return 0.0
    pairs, consecutive = _consecutive_pairs(n)
    diffs = np.abs(a[pairs[:, 1]] - a[pairs[:, 0]]) ** r
    total = consecutive @ diffs
    return scale * float(total.max()) ** (1.0 / r)


def pad_to_dyadic(values) -> np.ndarray:
    """Repeat the last entry until the length is 2^s + 1."""
    v = _values(values)
    n = len(v)
    target = 2
    while target + 1 < n:
        target *= 2
    return np.concatenate([v, np.repeat(v[-1:], target + 1 - n)]) if n > 1 else np.repeat(v, 2)


def vr_dyadic_bound(seq, r: float = 2.0) -> tuple[float, float]:
    """(V_r, sqrt2 * sum_{i=0}^{s} (sum_j |a_{(j+1)2^i} - a_{j 2^i}|^2)^{1/2}) for length 2^s + 1."""
    if r < 2:
        raise DomainError(f"the dyadic bound needs r >= 2, got {r}")
    a = _values(seq)
    n = len(a) - 1
    if n < 1 or n & (n - 1):
        raise DomainError(f"length must be 2^s + 1, got {len(a)}; pad by repeating the last entry")
    s = n.bit_length() - 1
    rhs = 0.0
    for i in range(s + 1):
        sub = a[:: 2**i]
        rhs += math.sqrt(float(np.sum(np.abs(np.diff(sub)) ** 2)))
    return vr(a, r), math.sqrt(2) * rhs


def oscillation(seq: IndexedSequence, lacunary) -> float:
    """(sum_j sup_{N_j <= n <= N_{j+1}} |a_n - a_{N_j}|^2)^{1/2} over consecutive lacunary pairs."""
    lac = np.asarray(lacunary, dtype=np.int64)
    if len(lac) == 0:
        raise DomainError("empty lacunary sequence")
    if np.any(np.diff(lac) <= 0):
        raise DomainError("lacunary indices must increase")
    seq.at(lac)
    total = 0.0
    for lo, hi in zip(lac, lac[1:]):
        block = seq.restrict(int(lo), int(hi)).values
        total += float(np.max(np.abs(block - block[0]))) ** 2
    return math.sqrt(total)


@dataclass
class ScaleLadder:
    """N_n = floor(2^{n^rho}), kappa_s and Q_s for a given rho and dimension d."""

    rho: float
    d: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise DomainError(f"rho must lie in (0, 1), got {self.rho}")

    def N(self, n: int) -> int:
        return int(math.floor(2.0 ** (n**self.rho)))

    def Nseq(self, upto: int) -> list[int]:
        """Distinct N_n <= upto in increasing order (collisions at small n keep the first)."""
        out, n = [], 0
        while True:
            v = self.N(n)
            if v > upto:
                return out
            if not out or v != out[-1]:
                out.append(v)
            n += 1

    def kappa(self, s: int) -> int:
        return 20 * self.d * (math.floor((s + 1) ** (self.rho / 10) / self.rho) + 1)

    def Q(self, s: int) -> FactorialInt:
        return FactorialInt(math.floor(math.exp((s + 1) ** (self.rho / 10))))


@dataclass
class SplitResult:
    long: float
    short: float
    total: float
    C: float = 2.0

    @property
    def smallest_constant(self) -> float:
        denom = self.long + self.short
        return 0.0 if self.total == 0 else (math.inf if denom == 0 else self.total / denom)

    @property
    def holds(self) -> bool:
        return self.total <= self.C * (self.long + self.short) * (1 + 1e-12)


def split_variation(seq: IndexedSequence, rho: float, r: float, C: float = 2.0) -> SplitResult:
    """Long variation over the ladder N_n and the l^r sum of short variations between rungs.

    Blocks are [N_n, N_{n+1}) plus the tail [N_last, max index].
    """
    ladder = ScaleLadder(rho)
    top = int(seq.indices[-1])
    scales = [s for s in ladder.Nseq(top) if s >= seq.indices[0]]
    if not scales:
        raise DomainError("no ladder scale falls inside the sequence")
    long = vr(seq.at(scales), r)
    bounds = scales + [top + 1]
    short_r = 0.0
    for lo, hi in zip(bounds, bounds[1:]):
        block = seq.restrict(lo, hi - 1)
        if len(block) > 1:
            short_r += vr(block, r) ** r
    return SplitResult(long, short_r ** (1 / r), vr(seq, r), C)


def concatenation_bound(seq, cuts, r: float) -> tuple[float, float]:
    """(V_r(whole), K^{1-1/r} (sum_k V_r(block_k)^r)^{1/r}) for blocks [u_{k-1}, u_k] sharing endpoints.

    `cuts` are positions u_0 < ... < u_K into the value array; the whole
    sequence is taken from u_0 to u_K.
    """
    r = _check_r(r)
    a = _values(seq)
    u = [int(c) for c in cuts]
    if len(u) < 2 or any(y <= x for x, y in zip(u, u[1:])) or u[0] < 0 or u[-1] >= len(a):
        raise DomainError(f"cuts must increase inside 0..{len(a) - 1}, got {u}")
    K = len(u) - 1
    blocks = sum(vr(a[x:y + 1], r) ** r for x, y in zip(u, u[1:]))
    return vr(a[u[0]:u[-1] + 1], r), K ** (1 - 1 / r) * blocks ** (1 / r)
