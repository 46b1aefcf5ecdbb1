"""
Prime sieving and multiplicative arithmetic.

Provides the number-theoretic substrate used by the rest of the package:

- an Eratosthenes sieve with natural-log weights (`sieve_primes`)
- Euler's totient and the Moebius function, pointwise and as tables
- Chebyshev sums over primes in a residue class (`theta_progression`)
- averaged Ramanujan sums over the unit group (`ramanujan_average`)
- Dirichlet rational approximation by continued fractions (`dirichlet_approx`)
- exact factorials kept as prime-exponent vectors (`FactorialInt`)
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import DomainError, OutOfRangeError, SizeError

# unit-group enumeration refuses moduli above this
UNIT_GROUP_CAP = 10**6

SIEVE_CACHE_ENV = "RVL_SIEVE_CACHE"


def _sieve_mask(limit: int) -> np.ndarray:
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    is_prime[4::2] = False
    for i in range(3, math.isqrt(limit) + 1, 2):
        if is_prime[i]:
            is_prime[i * i :: 2 * i] = False
    return is_prime


@dataclass(frozen=True)
class PrimeTable:
    """All primes up to `limit` with their natural-log weights.

    Arrays are made read-only at construction so a table can be shared
    freely between threads.
    """

    limit: int
    primes: np.ndarray
    logs: np.ndarray
    is_prime: np.ndarray = field(repr=False)
    # cumulative Chebyshev theta: theta_cum[i] = sum of logs[:i]
    theta_cum: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.primes)

    def logw(self, p: int) -> float:
        """Natural log weight of the prime `p`."""
        if p > self.limit or p < 2 or not self.is_prime[p]:
            raise DomainError(f"{p} is not a prime within the table (limit {self.limit})")
        return math.log(p)

    @property
    def signed(self) -> np.ndarray:
        """The signed primes -p_max, ..., -2, 2, ..., p_max in ascending order."""
        return np.concatenate([-self.primes[::-1], self.primes])

    def upto(self, x: float) -> np.ndarray:
        """Primes <= x (x must not exceed the sieve limit)."""
        self.check_covers(x)
        return self.primes[: self.count(x)]

    def count(self, x: float) -> int:
        """pi(x), the number of primes <= x."""
        self.check_covers(x)
        return int(np.searchsorted(self.primes, math.floor(x), side="right"))

    def theta(self, x: float) -> float:
        """Chebyshev theta(x) = sum of ln p over primes p <= x."""
        return float(self.theta_cum[self.count(x)])

    def check_covers(self, x: float) -> None:
        if x > self.limit:
            raise OutOfRangeError(f"query {x} exceeds sieve limit {self.limit}; rebuild with a larger limit")


def _cache_path(limit: int) -> Path | None:
    root = os.environ.get(SIEVE_CACHE_ENV)
    if not root:
        return None
    return Path(root) / f"sieve_{limit}.npy"


@lru_cache(maxsize=8)
def sieve_primes(limit: int) -> PrimeTable:
    """Sieve of Eratosthenes up to and including `limit`.

    When the environment variable ``RVL_SIEVE_CACHE`` names a directory, the
    prime list is persisted there and reused by later processes.
    """
    if limit < 2:
        raise DomainError(f"sieve limit must be >= 2, got {limit}")
    limit = int(limit)
    path = _cache_path(limit)
    primes = None
    if path is not None and path.exists():
        primes = np.load(path)
        is_prime = np.zeros(limit + 1, dtype=bool)
        is_prime[primes] = True
    if primes is None:
        is_prime = _sieve_mask(limit)
        primes = np.flatnonzero(is_prime).astype(np.int64)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            np.save(path, primes)
    logs = np.log(primes.astype(np.float64))
    theta_cum = np.concatenate([[0.0], np.cumsum(logs)])
    for arr in (primes, logs, is_prime, theta_cum):
        arr.setflags(write=False)
    return PrimeTable(limit, primes, logs, is_prime, theta_cum)


def factorize(n: int) -> dict[int, int]:
    """Prime factorization of a positive integer by trial division."""
    if n < 1:
        raise DomainError(f"cannot factor {n}")
    out: dict[int, int] = {}
    for p in (2, 3):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    f = 5
    while f * f <= n:
        for p in (f, f + 2):
            while n % p == 0:
                out[p] = out.get(p, 0) + 1
                n //= p
        f += 6
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def totient(q: int) -> int:
    """Euler's phi(q), the number of units modulo q."""
    if q < 1:
        raise DomainError(f"totient undefined for q={q}")
    result = q
    for p in factorize(q):
        result -= result // p
    return result


def moebius(q: int) -> int:
    """Moebius mu(q): (-1)^m for square-free q with m prime factors, else 0."""
    if q < 1:
        raise DomainError(f"moebius undefined for q={q}")
    fac = factorize(q)
    if any(e > 1 for e in fac.values()):
        return 0
    return -1 if len(fac) % 2 else 1


def totient_table(n: int) -> np.ndarray:
    """phi(0..n) as an int64 array (phi(0) is set to 0)."""
    phi = np.arange(n + 1, dtype=np.int64)
    for p in np.flatnonzero(_sieve_mask(max(n, 2))[: n + 1]):
        phi[p::p] -= phi[p::p] // p
    return phi


def moebius_table(n: int) -> np.ndarray:
    """mu(0..n) as an int8 array (mu(0) is set to 0)."""
    mu = np.ones(n + 1, dtype=np.int8)
    mu[0] = 0
    for p in np.flatnonzero(_sieve_mask(max(n, 2))[: n + 1]):
        mu[p::p] *= -1
        mu[p * p :: p * p] = 0
    return mu


def units(q: int) -> np.ndarray:
    """The unit group A_q = {1 <= x <= q : gcd(x, q) = 1}."""
    if q < 1:
        raise DomainError(f"no unit group for q={q}")
    if q > UNIT_GROUP_CAP:
        raise SizeError(f"refusing to enumerate A_q for q={q} > {UNIT_GROUP_CAP}", size=q)
    x = np.arange(1, q + 1, dtype=np.int64)
    return x[np.gcd(x, q) == 1]


@lru_cache(maxsize=256)
def roots_of_unity(q: int) -> np.ndarray:
    """Table e^{2 pi i r/q} for r = 0..q-1."""
    t = np.exp(2j * np.pi * np.arange(q) / q)
    t.setflags(write=False)
    return t


def theta_progression(x: float, q: int, r: int, primes: PrimeTable) -> float:
    """theta(x; q, r): sum of ln p over primes p <= x with p = r (mod q)."""
    if q < 1:
        raise DomainError(f"modulus must be positive, got {q}")
    if x < 2:
        return 0.0
    ps = primes.upto(x)
    mask = (ps % q) == (r % q)
    # contiguous input -> numpy's pairwise summation, order independent of threads
    return float(np.sum(np.ascontiguousarray(primes.logs[: len(ps)][mask])))


def ramanujan_average(a: int, q: int) -> complex:
    """(1/phi(q)) * sum over units x mod q of e^{2 pi i a x / q}."""
    if q < 1:
        raise DomainError(f"modulus must be positive, got {q}")
    u = units(q)
    idx = (a % q) * u % q
    return complex(np.sum(roots_of_unity(q)[idx]) / len(u))


def ramanujan_closed_form(a: int, q: int) -> float:
    """mu(q/g)/phi(q/g) with g = gcd(a, q)."""
    m = q // math.gcd(a, q)
    return moebius(m) / totient(m)


@dataclass(frozen=True)
class RationalApprox:
    a: int
    q: int
    target: float
    err: float


def torus_distance(x: float, y: float) -> float:
    d = abs(x - y) % 1.0
    return min(d, 1.0 - d)


def convergents(x: Fraction):
    """Yield continued-fraction convergents (p, q) of a non-negative rational."""
    p0, q0, p1, q1 = 0, 1, 1, 0
    while True:
        a = x.numerator // x.denominator
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        yield p1, q1
        frac = x - a
        if frac == 0:
            return
        x = 1 / frac


def dirichlet_approx(xi: float, Q: int) -> RationalApprox:
    """Coprime a/q with 1 <= a <= q <= Q and |xi - a/q| <= 1/(qQ) on the torus.

    `xi` is reduced into [0, 1) first. The last continued-fraction convergent
    with denominator <= Q is returned; a convergent 0/1 or 1/1 is reported as
    a = q = 1, the torus point 0.
    """
    if Q < 1:
        raise DomainError(f"Q must be >= 1, got {Q}")
    xi = float(xi) - math.floor(xi)
    best = (1, 1)
    for p, q in convergents(Fraction(xi)):
        if q > Q:
            break
        best = (p, q)
    a, q = best
    if a == 0:
        a, q = 1, 1
    return RationalApprox(a, q, xi, torus_distance(xi, a / q))


@dataclass(frozen=True)
class FactorialInt:
    """n! held as a prime-exponent vector (Legendre's formula), never expanded."""

    n: int

    @property
    def exponents(self) -> dict[int, int]:
        out = {}
        if self.n < 2:
            return out
        for p in sieve_primes(max(self.n, 2)).upto(self.n):
            p = int(p)
            e, pk = 0, p
            while pk <= self.n:
                e += self.n // pk
                pk *= p
            out[p] = e
        return out

    def log(self) -> float:
        return math.lgamma(self.n + 1)

    def divides(self, m: int) -> bool:
        """True iff n! divides m."""
        if m == 0:
            return True
        return all(_valuation(m, p) >= e for p, e in self.exponents.items())

    def valuation(self, p: int) -> int:
        return self.exponents.get(p, 0)

    def power(self, D: int) -> dict[int, int]:
        """Exponent vector of (n!)^D."""
        return {p: e * D for p, e in self.exponents.items()}

    def __int__(self):
        return math.factorial(self.n)


def _valuation(m: int, p: int) -> int:
    m = abs(m)
    e = 0
    while m % p == 0:
        m //= p
        e += 1
    return e
