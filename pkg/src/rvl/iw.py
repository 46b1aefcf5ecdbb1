"""
Ionescu-Wainger rational sets and the smooth partition built on them.

For a level n and beta:

    n0 = floor(n^{1/20}),  D = 20 beta + 1,  Q0 = (n0!)^D
    Pi = products of at most D distinct primes from (n0, n^beta], each with exponent in 1..D
    P_n = {Q w : Q | Q0, w in Pi or w = 1}
    U_n = {a/q : q in P_n, a in N_q^d with gcd(q, a_1, ..., a_d) = 1}

Since Q only uses primes <= n0 and w only primes > n0, membership of q in
P_n is decided from its factorization, and |P_n| = tau(Q0) (1 + |Pi|) in
closed form; neither needs the set to be listed.

eta is 1 on ||x||_inf <= 1/(32d) and 0 on ||x||_inf >= 1/(16d); the scaled bump is
eta_n(xi) = eta(2^{-chi sqrt(log2 N_n)} N_n^A xi).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, SizeError
from .lattice import MultiIndexSet, build_gamma
from .numtheory import FactorialInt, factorize, sieve_primes
from .variation import ScaleLadder

DEFAULT_CHI = 0.05
SET_CAP = 10**6


@dataclass(frozen=True)
class IWParams:
    n: int
    beta: int
    chi: float = DEFAULT_CHI
    rho: float = 0.5

    def __post_init__(self):
        if self.n < 0 or self.beta < 1:
            raise DomainError(f"need n >= 0 and beta >= 1, got n={self.n}, beta={self.beta}")
        if not 0 < self.chi:
            raise DomainError("chi must be positive")

    @property
    def n0(self) -> int:
        # integer floor of n^{1/20} without float rounding at perfect powers
        r = int(round(self.n ** (1 / 20))) if self.n else 0
        while r**20 > self.n:
            r -= 1
        while (r + 1) ** 20 <= self.n:
            r += 1
        return r

    @property
    def D(self) -> int:
        return 20 * self.beta + 1

    @property
    def Q0(self) -> dict:
        """(n0!)^D as a prime-exponent vector."""
        return FactorialInt(self.n0).power(self.D)

    @property
    def large_primes(self) -> list[int]:
        """Primes in (n0, n^beta]."""
        top = self.n**self.beta
        if top < 2:
            return []
        return [int(p) for p in sieve_primes(top).upto(top) if p > self.n0]


@dataclass
class RationalSet:
    """P_n and U_n for given parameters; membership is decided by factorization."""

    params: IWParams
    cap: int = SET_CAP

    @cached_property
    def _large(self) -> set:
        return set(self.params.large_primes)

    def contains_q(self, q: int) -> bool:
        if q < 1:
            return False
        if q == 1:
            return True
        p = self.params
        small, large = p.Q0, self._large
        distinct = 0
        for prime, e in factorize(q).items():
            if prime <= p.n0:
                if e > small.get(prime, 0):
                    return False
            elif prime in large:
                if e > p.D:
                    return False
                distinct += 1
            else:
                return False
        return distinct <= p.D

    def cardinality(self) -> int:
        """|P_n| = tau(Q0) (1 + |Pi|), |Pi| = sum_{j=1}^{D} C(m, j) D^j with m large primes."""
        p = self.params
        tau = math.prod(e + 1 for e in p.Q0.values())
        m = len(self._large)
        pi = sum(math.comb(m, j) * p.D**j for j in range(1, min(m, p.D) + 1))
        return tau * (1 + pi)

    @cached_property
    def qs(self) -> list[int]:
        """P_n in increasing order (size error above the cap)."""
        size = self.cardinality()
        if size > self.cap:
            raise SizeError(f"P_n has {size} elements, above the cap {self.cap}", size=size)
        p = self.params
        divisors = [1]
        for prime, e in p.Q0.items():
            divisors = [d * prime**j for d in divisors for j in range(e + 1)]
        ws = [1]
        large = sorted(self._large)
        for j in range(1, min(len(large), p.D) + 1):
            for combo in itertools.combinations(large, j):
                for exps in itertools.product(range(1, p.D + 1), repeat=j):
                    ws.append(math.prod(b**x for b, x in zip(combo, exps)))
        return sorted({d * w for d in divisors for w in ws})

    @property
    def max_q(self) -> int:
        """Largest element of P_n, from its structure."""
        p = self.params
        q0 = math.prod(prime**e for prime, e in p.Q0.items())
        top = sorted(self._large)[-p.D:] if self._large else []
        return q0 * math.prod(b**p.D for b in top)

    def fractions(self, q: int, d: int):
        """Stream a in N_q^d with gcd(q, a) = 1."""
        if q**d > self.cap:
            raise SizeError(f"{q}^{d} numerators for q={q} exceed the cap", size=q**d)
        for a in itertools.product(range(1, q + 1), repeat=d):
            if math.gcd(q, *a) == 1:
                yield a


def build_Pn(n: int, beta: int, cap: int = SET_CAP, chi: float = DEFAULT_CHI, rho: float = 0.5) -> RationalSet:
    s = RationalSet(IWParams(n, beta, chi, rho), cap)
    s.qs  # materialize now so oversize sets fail at construction
    return s


def lower_inclusion_scan(limit: int, betas) -> list:
    """(n, beta, q) with q <= n^beta <= limit but q outside P_n.

    For q <= n^beta every prime factor of q lies in (n0, n^beta] or below n0,
    so membership only changes with n through n0. Within a block of equal
    n0 it is enough to test each q once with the largest n of the block.
    """
    failures = []
    for beta in betas:
        n = 1
        while n**beta <= limit:
            n0 = IWParams(n, beta).n0
            top = n
            while (top + 1) ** beta <= limit and IWParams(top + 1, beta).n0 == n0:
                top += 1
            rs = RationalSet(IWParams(top, beta))
            bad = [q for q in range(1, top**beta + 1) if not rs.contains_q(q)]
            for q in bad:
                first = max(n, math.ceil(q ** (1 / beta) - 1e-9))
                while first**beta < q:
                    first += 1
                failures += [(m, beta, q) for m in range(first, top + 1)]
            n = top + 1
    return failures


def upper_inclusion_holds(n: int, beta: int) -> bool:
    """max P_n <= e^{n^{1/10}}, compared in log space."""
    s = RationalSet(IWParams(n, beta))
    p = s.params
    log_q0 = sum(e * math.log(prime) for prime, e in p.Q0.items())
    top = sorted(s._large)[-p.D:] if s._large else []
    return log_q0 + p.D * sum(math.log(b) for b in top) <= n ** 0.1


def upper_inclusion_estimate(beta: int) -> float:
    """Heuristic ln n at which D^2 beta ln n (the D largest primes near n^beta, each to the power D)
    first drops below n^{1/10}; the factorial part is lower order."""
    D = 20 * beta + 1
    t = 1.0
    for _ in range(200):
        t = 10 * math.log(D * D * beta * t)
    return t


# ---------------------------------------------------------------- bumps


def _smooth_step(u):
    """0 for u <= 0, 1 for u >= 1, C^inf in between."""
    u = np.asarray(u, dtype=float)
    f = np.where(u > 0, np.exp(-1 / np.where(u > 0, u, 1.0)), 0.0)
    v = 1 - u
    g = np.where(v > 0, np.exp(-1 / np.where(v > 0, v, 1.0)), 0.0)
    return f / (f + g)


def eta(x, d: int | None = None, profile: str = "tensor") -> np.ndarray:
    """Plateau bump on R^d: 1 if ||x||_inf <= 1/(32d), 0 if ||x||_inf >= 1/(16d).

    profile="tensor" multiplies a 1-D C^inf plateau over the coordinates;
    profile="linf" applies the same plateau to ||x||_inf (only Lipschitz).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = d or x.shape[1]
    lo, hi = 1 / (32 * d), 1 / (16 * d)
    if profile == "tensor":
        return np.prod(_smooth_step((hi - np.abs(x)) / (hi - lo)), axis=1)
    if profile == "linf":
        return _smooth_step((hi - np.abs(x).max(axis=1)) / (hi - lo))
    raise DomainError(f"unknown profile {profile!r}")


def bump_scale(N: int, chi: float) -> float:
    return 2.0 ** (-chi * math.sqrt(math.log2(N))) if N > 1 else 1.0


def torus_center(x):
    """Representative of x mod 1 in [-1/2, 1/2)."""
    x = np.asarray(x, dtype=float)
    return x - np.floor(x + 0.5)


def eta_n(xi, N: int, chi: float, gamma: MultiIndexSet, profile: str = "tensor") -> np.ndarray:
    """eta(2^{-chi sqrt(log2 N)} N^A xi) with xi reduced to the torus fundamental domain."""
    xi = np.atleast_2d(torus_center(xi))
    scaled = bump_scale(N, chi) * xi * float(N) ** gamma.sizes
    return eta(scaled, gamma.d, profile)


def support_radii(N: int, chi: float, gamma: MultiIndexSet) -> np.ndarray:
    """eta_n(. - a/q) > 0 exactly when |xi_g - a_g/q| < radius_g on the torus."""
    return (1 / (16 * gamma.d)) / bump_scale(N, chi) / float(N) ** gamma.sizes


def epsilon_matrix(n: int, gamma: MultiIndexSet, factor: float = 1.0) -> np.ndarray:
    """Diagonal entries eps_{n,g} = exp(-n^{1/5}) * factor (factor <= 1)."""
    if not 0 < factor <= 1:
        raise DomainError("factor must lie in (0, 1]")
    return np.full(gamma.d, math.exp(-(n ** 0.2)) * factor)


# ---------------------------------------------------------------- partitions


def level_sets(s: int | None, n: int, beta: int, ladder: ScaleLadder, chi: float = DEFAULT_CHI):
    """(included, excluded) rational sets: U_{floor(n^rho)} or R_s = U_{floor((s+1)^rho)} minus U_{floor(s^rho)}.

    U_0 is taken to be empty, so R_0 = U_1 = {0/1}.
    """
    rho = ladder.rho
    if s is None:
        return RationalSet(IWParams(int(math.floor(n**rho)), beta, chi, rho)), None
    if s >= n:
        raise DomainError(f"need s < n, got s={s}, n={n}")
    hi = RationalSet(IWParams(int(math.floor((s + 1) ** rho)), beta, chi, rho))
    lo_level = int(math.floor(s**rho))
    lo = RationalSet(IWParams(lo_level, beta, chi, rho)) if lo_level >= 1 else None
    return hi, lo


def _member_qs(hi: RationalSet, lo: RationalSet | None) -> list[int]:
    return [q for q in hi.qs if lo is None or not lo.contains_q(q)]


def _window(x: float, r: float, q: int, step: int) -> np.ndarray:
    """Integers a that are multiples of `step` with |a/q - x| < r, one per class mod q."""
    lo_a, hi_a = math.ceil(q * (x - r)), math.floor(q * (x + r))
    if hi_a - lo_a + 1 >= q:
        return np.arange(step, q + 1, step, dtype=np.int64)
    first = -(-lo_a // step) * step
    return np.arange(first, hi_a + 1, step, dtype=np.int64)


def _profile_1d(t, N: int, chi: float, size: int, d: int) -> np.ndarray:
    lo, hi = 1 / (32 * d), 1 / (16 * d)
    u = bump_scale(N, chi) * np.abs(torus_center(t)) * float(N) ** size
    return _smooth_step((hi - u) / (hi - lo))


def _squarefree_divisors(q: int):
    out = [(1, 1)]
    for p in factorize(q):
        out += [(e * p, -mu) for e, mu in out]
    return out


def xi_partition(xi, n: int, s: int | None = None, beta: int = 1, ladder: ScaleLadder | None = None,
                 gamma: MultiIndexSet | None = None, chi: float = DEFAULT_CHI, cap: int = SET_CAP,
                 profile: str = "tensor") -> float:
    """Sum of eta_n(xi - a/q) over U_{floor(n^rho)} (s None) or over R_s.

    Denominators are streamed. For the tensor profile the coprimality
    condition gcd(q, a) = 1 is removed by Moebius inversion over squarefree
    e | q, so the sum factorizes into one-dimensional sums over the
    numerators whose bump reaches xi. The linf profile enumerates them.
    """
    gamma = gamma or build_gamma(1, 1)
    ladder = ladder or ScaleLadder(0.5, gamma.d)
    xi = np.asarray(xi, float).ravel()
    if len(xi) != gamma.d:
        raise DomainError(f"xi has {len(xi)} components, expected {gamma.d}")
    N = ladder.N(n)
    radii = support_radii(N, chi, gamma)
    hi, lo = level_sets(s, n, beta, ladder, chi)
    hi.cap = cap
    d = gamma.d
    total = 0.0
    for q in _member_qs(hi, lo):
        if profile == "tensor":
            for e, mu in _squarefree_divisors(q):
                prod = float(mu)
                for x, r, g in zip(xi, radii, gamma.sizes):
                    a = _window(x, r, q, e)
                    if len(a) > cap:
                        raise SizeError(f"{len(a)} numerators near xi for q={q}", size=len(a))
                    prod *= float(np.sum(_profile_1d(x - a / q, N, chi, int(g), d)))
                    if prod == 0.0:
                        break
                total += prod
        else:
            cand = [_window(x, r, q, 1) for x, r in zip(xi, radii)]
            count = math.prod(len(c) for c in cand)
            if count > cap:
                raise SizeError(f"{count} numerators near xi for q={q}", size=count)
            avec = np.array([a for a in itertools.product(*cand) if math.gcd(q, *map(int, a)) == 1], dtype=float)
            if len(avec):
                total += float(np.sum(eta_n(xi[None, :] - avec.reshape(-1, d) / q, N, chi, gamma, profile)))
    return total


@dataclass
class DisjointnessResult:
    ok: bool
    method: str
    witness: tuple | None = None  # ((a, q), (a', q'))
    detail: dict = field(default_factory=dict)


def _overlap(f1, f2, radii) -> bool:
    (a1, q1), (a2, q2) = f1, f2
    diff = torus_center(np.array(a1, float) / q1 - np.array(a2, float) / q2)
    return bool(np.all(np.abs(diff) < 2 * radii))


def disjointness_check(s: int, m: int, beta: int, ladder: ScaleLadder, gamma: MultiIndexSet | None = None,
                       chi: float = DEFAULT_CHI, cap: int = SET_CAP) -> DisjointnessResult:
    """Are the supports of eta_m(. - a/q), a/q in R_s, pairwise disjoint?

    Tries, in order: a trivially small set; the sufficient bound
    1/(q q') >= 2 max radius; an explicit overlapping pair of nearby
    fractions a/q, (a + t e_g)/q at the largest denominator; a full sweep over the
    materialized set (size error if it is too large).
    """
    gamma = gamma or build_gamma(1, 1)
    if m <= s:
        raise DomainError(f"need m > s, got m={m}, s={s}")
    N = ladder.N(m)
    radii = support_radii(N, chi, gamma)
    hi, lo = level_sets(s, m, beta, ladder, chi)
    d = gamma.d
    # denominators of R_s, enumerated lazily through the structure of P
    size_hi = hi.cardinality()
    if size_hi > cap:
        raise SizeError(f"P has {size_hi} denominators", size=size_hi)
    qs = _member_qs(hi, lo)
    detail = dict(N=N, radii=radii.tolist(), denominators=len(qs), max_q=max(qs) if qs else None)
    n_frac = sum(_count_A(q, d) for q in qs)
    detail["fractions"] = n_frac
    if n_frac <= 1:
        return DisjointnessResult(True, "trivial", None, detail)
    qmax = max(qs)
    if 1 / (qmax * qmax) >= 2 * float(radii.max()):
        return DisjointnessResult(True, "closed-form", None, detail)
    # neighbours at the largest denominator differ by 1/q in one coordinate only
    g = int(np.argmax(radii))
    if qmax >= 3 or (qmax == 2 and d > 1):
        a = (1,) * d
        t = 2 if d > 1 else next(t for t in range(2, qmax + 1) if math.gcd(qmax, t) == 1)
        b = tuple(t if j == g else 1 for j in range(d))
        if _overlap((a, qmax), (b, qmax), radii):
            return DisjointnessResult(False, "witness", ((a, qmax), (b, qmax)), detail)
    if n_frac > cap:
        raise SizeError(f"{n_frac} fractions to compare", size=n_frac)
    fr = [(a, q) for q in qs for a in hi.fractions(q, d)]
    vals = np.array([np.array(a, float) / q for a, q in fr]) % 1.0
    order = np.argsort(vals[:, g], kind="stable")
    vals, fr = vals[order], [fr[i] for i in order]
    width = 2 * radii[g]
    n = len(fr)
    for i in range(n):
        j = i + 1
        while j < n + i:
            jj = j % n
            gap = (vals[jj, g] - vals[i, g]) % 1.0
            if gap >= width:
                break
            if _overlap(fr[i], fr[jj], radii):
                return DisjointnessResult(False, "sweep", (fr[i], fr[jj]), detail)
            j += 1
    return DisjointnessResult(True, "sweep", None, detail)


def _count_A(q: int, d: int) -> int:
    """|A_q| in N_q^d: q^d prod_{p | q} (1 - p^{-d})."""
    out = q**d
    for p in factorize(q):
        out = out // p**d * (p**d - 1)
    return out
