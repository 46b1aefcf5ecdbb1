"""
Weyl-type exponential sums over products of integer and prime axes.

A sum is described by an `ExpSumSpec`: which set each axis runs over, a
convex region given by a predicate and a bounding box, the real polynomial
coefficients xi_gamma, an optional amplitude, and whether prime axes carry
log weights. Rational coefficients (`fractions.Fraction`) are handled in
exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import DomainError
from .lattice import ConvexBody, MultiIndexSet
from .numtheory import PrimeTable

AXIS_KINDS = ("integers", "naturals", "primes", "signed-primes")


@dataclass(frozen=True)
class Region:
    """Convex region: a vectorized predicate on integer points plus a bounding box."""

    lo: tuple
    hi: tuple
    predicate: Callable | None = field(default=None, compare=False, repr=False)
    name: str = "box"

    @classmethod
    def box(cls, lo, hi) -> "Region":
        return cls(tuple(lo), tuple(hi))

    @classmethod
    def cube(cls, k: int, R: float) -> "Region":
        return cls((-R,) * k, (R,) * k, name="cube")

    @classmethod
    def ball(cls, k: int, R: float) -> "Region":
        return cls((-R,) * k, (R,) * k, lambda x: (x.astype(float) ** 2).sum(axis=1) <= R * R, "ball")

    @classmethod
    def halfspaces(cls, A, b, lo, hi) -> "Region":
        """{x in box : A x <= b}."""
        A, b = np.asarray(A, float), np.asarray(b, float)
        return cls(tuple(lo), tuple(hi), lambda x: np.all(x.astype(float) @ A.T <= b, axis=1), "halfspaces")

    @classmethod
    def body(cls, B: ConvexBody, N: float) -> "Region":
        return cls((-N,) * B.k, (N,) * B.k, lambda x: B.contains(x, N), B.kind)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        lo, hi = np.array(self.lo, float), np.array(self.hi, float)
        ok = np.all((pts >= lo) & (pts <= hi), axis=1)
        if self.predicate is not None and len(pts):
            ok &= np.asarray(self.predicate(pts), dtype=bool)
        return ok


@dataclass
class ExpSumSpec:
    k: int
    axes: list  # per axis: one of AXIS_KINDS or an explicit array of integers
    poly: dict  # gamma -> real coefficient (float or Fraction)
    region: Region | None = None
    amplitude: Callable | None = None
    logweights: bool = False

    def __post_init__(self):
        if len(self.axes) != self.k:
            raise DomainError(f"{len(self.axes)} axes given for k={self.k}")
        for a in self.axes:
            if isinstance(a, str) and a not in AXIS_KINDS:
                raise DomainError(f"unknown axis set {a!r}")
        for g in self.poly:
            if len(g) != self.k or not any(g):
                raise DomainError(f"bad exponent {g}")


@dataclass
class WeylSumResult:
    value: complex
    normalized: float
    count: int


def _axis(kind, N: int, primes: PrimeTable | None) -> np.ndarray:
    if not isinstance(kind, str):
        v = np.asarray(kind, dtype=np.int64)
        return v[np.abs(v) <= N]
    if kind == "integers":
        return np.arange(-N, N + 1, dtype=np.int64)
    if kind == "naturals":
        return np.arange(1, N + 1, dtype=np.int64)
    if primes is None:
        raise DomainError("prime axes need a PrimeTable")
    ps = primes.upto(N) if N >= 2 else np.zeros(0, np.int64)
    if kind == "primes":
        return ps
    return np.concatenate([-ps[::-1], ps])


def _grid(axes_vals) -> np.ndarray:
    if any(len(v) == 0 for v in axes_vals):
        return np.zeros((0, len(axes_vals)), np.int64)
    mesh = np.meshgrid(*axes_vals, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _phase(poly: dict, pts: np.ndarray) -> np.ndarray:
    """sum_gamma xi_gamma x^gamma mod 1; Fraction coefficients are reduced exactly."""
    total = np.zeros(len(pts))
    for g, c in poly.items():
        if isinstance(c, Fraction):
            den = c.denominator
            num = c.numerator % den
            r = np.ones(len(pts), dtype=object) if den > 3 * 10**9 else np.ones(len(pts), np.int64)
            base = pts.astype(r.dtype) % den
            for j, ex in enumerate(g):
                for _ in range(ex):
                    r = r * base[:, j] % den
            total += np.array(r * num % den, dtype=float) / den
        else:
            mono = np.prod(pts.astype(float) ** np.array(g, float), axis=1)
            t = float(c) * mono
            total += t - np.floor(t)
    return total - np.floor(total)


def _log_weights(axes, pts) -> np.ndarray:
    w = np.ones(len(pts))
    for j, kind in enumerate(axes):
        if kind in ("primes", "signed-primes"):
            w = w * np.log(np.abs(pts[:, j]).astype(float))
    return w


def _terms(spec: ExpSumSpec, N: int, primes: PrimeTable | None):
    region = spec.region or Region.cube(spec.k, N)
    if min(region.lo) < -N or max(region.hi) > N:
        raise DomainError(f"region box {region.lo}..{region.hi} leaves [-{N}, {N}]^{spec.k}")
    vals = []
    for j, a in enumerate(spec.axes):
        v = _axis(a, N, primes)
        vals.append(v[(v >= region.lo[j]) & (v <= region.hi[j])])
    pts = _grid(vals)
    pts = pts[region.contains(pts)]
    amp = np.ones(len(pts)) if spec.amplitude is None else np.asarray(spec.amplitude(pts), dtype=complex)
    if spec.logweights:
        amp = amp * _log_weights(spec.axes, pts)
    return pts, np.exp(2j * np.pi * _phase(spec.poly, pts)) * amp


def weyl_sum(spec: ExpSumSpec, N: int, primes: PrimeTable | None = None) -> WeylSumResult:
    """sum over x in the axis sets and the region of e(P(x)) phi(x) (times log weights)."""
    N = int(N)
    pts, terms = _terms(spec, N, primes)
    value = complex(np.sum(terms))
    return WeylSumResult(value, abs(value) / float(N) ** spec.k, len(pts))


def check_amplitude(spec: ExpSumSpec, N: int, C: float, samples: int = 2000, seed: int = 0) -> bool:
    """Sample |phi| <= C and |grad phi| <= (1 + |x|)^{-1} inside the region (central differences)."""
    if spec.amplitude is None:
        return C >= 1
    region = spec.region or Region.cube(spec.k, N)
    rng = np.random.default_rng(seed)
    x = rng.uniform(region.lo, region.hi, size=(samples, spec.k))
    x = x[region.contains(x)]
    h = 1e-5
    vals = np.abs(spec.amplitude(x))
    grad = np.stack([(spec.amplitude(x + h * np.eye(spec.k)[j]) - spec.amplitude(x - h * np.eye(spec.k)[j])) / (2 * h)
                     for j in range(spec.k)], axis=1)
    gnorm = np.linalg.norm(np.abs(grad), axis=1)
    return bool(np.all(vals <= C) and np.all(gnorm <= 1 / (1 + np.linalg.norm(x, axis=1)) + 1e-6))


def prime_weyl_sum(xi, kprime: int, kdoubleprime: int, gamma: MultiIndexSet, body: ConvexBody, N: int,
                   primes: PrimeTable) -> complex:
    """sum over n in N^{k'}, p in P^{k''} with (n, p) in B_N of e(<xi, Q(n, p)>) prod ln p_j.

    Enumerates independently of the orbit code; divided by theta_B(N) it is m_N(xi).
    """
    xi = np.asarray(xi, float).ravel()
    if len(xi) != gamma.d:
        raise DomainError(f"xi has {len(xi)} components, Gamma has {gamma.d}")
    axes = ["naturals"] * kprime + ["primes"] * kdoubleprime
    poly = {g: float(c) for g, c in zip(gamma.gammas, xi) if c}
    spec = ExpSumSpec(gamma.k, axes, poly, Region.body(body, N), logweights=True)
    return weyl_sum(spec, N, primes).value


def progression_sums(spec: ExpSumSpec, N: int, Q: int, primes: PrimeTable | None = None) -> np.ndarray:
    """Array over residues r in (Z/Q)^k of the sums restricted to x = r mod Q."""
    if Q < 1:
        raise DomainError(f"modulus must be positive, got {Q}")
    pts, terms = _terms(spec, int(N), primes)
    out = np.zeros((Q,) * spec.k, complex)
    np.add.at(out, tuple((pts % Q).T), terms)
    return out


# ---------------------------------------------------------------- regularity scan


@dataclass
class RegularityRow:
    N: int
    q: int
    Q: int
    ratios: dict  # alpha -> max_r |S_r| Q / (N (ln N)^{-alpha})
    seed: int
    skipped: bool = False


def q_window(N: int, d: int, beta: float) -> tuple[int, int]:
    """Denominators allowed for the leading coefficient: (ln N)^beta <= q <= N^d (ln N)^{-beta}."""
    L = math.log(N)
    return math.ceil(L**beta), math.floor(N**d / L**beta)


def regularity_ratio(axis: str, poly: dict, N: int, Q: int, alphas, primes: PrimeTable | None = None) -> dict:
    """max over r mod Q of |sum_{n = r mod Q, |n| <= N} e(P(n))|, scaled by Q/(N (ln N)^{-alpha})."""
    spec = ExpSumSpec(1, [axis], poly)
    sums = progression_sums(spec, N, Q, primes)
    top = float(np.max(np.abs(sums)))
    return {a: top * Q / (N * math.log(N) ** (-a)) for a in alphas}


def regularity_scan(axis: str, d: int, Nlist, Q: int, alphas=(1.0, 2.0), alpha1: float = 1.0,
                    beta: float = 2.0, trials: int = 5, seed: int = 0,
                    primes: PrimeTable | None = None) -> list:
    """Random degree-d polynomials with leading coefficient a/q, q in the allowed window.

    Q must satisfy Q <= (ln N)^alpha1 for every N. Windows that are empty for
    a given N are reported as skipped rows.
    """
    if axis not in ("integers", "primes"):
        raise DomainError(f"axis must be integers or primes, got {axis!r}")
    rows = []
    for N in Nlist:
        if N < 3 or Q > math.log(N) ** alpha1:
            raise DomainError(f"Q={Q} exceeds (ln N)^{alpha1} = {math.log(max(N, 2)) ** alpha1:.3f} at N={N}")
        lo, hi = q_window(N, d, beta)
        if lo > hi:
            rows.append(RegularityRow(N, 0, Q, {}, seed, skipped=True))
            continue
        for t in range(trials):
            rng = np.random.default_rng([seed, N, t])
            q = int(round(math.exp(rng.uniform(math.log(lo), math.log(hi + 0.5)))))
            q = min(max(q, lo), hi)
            a = int(rng.integers(1, q + 1))
            while math.gcd(a, q) != 1:
                a = a % q + 1
            poly = {(d,): Fraction(a, q)}
            for j in range(1, d):
                poly[(j,)] = float(rng.uniform())
            rows.append(RegularityRow(N, q, Q, regularity_ratio(axis, poly, N, Q, alphas, primes), seed))
    return rows


def minor_arc_frequencies(n: int, gamma: MultiIndexSet, lead: int, q_range: tuple[int, int],
                          seed: int = 0) -> list:
    """Frequencies with xi_lead = a/q + t, |t| <= 1/q^2, q log-uniform in q_range; other entries uniform."""
    rng = np.random.default_rng(seed)
    out = []
    lo, hi = q_range
    if lo > hi:
        raise DomainError(f"empty denominator range {q_range}")
    for _ in range(n):
        xi = rng.uniform(0, 1, size=gamma.d)
        q = int(min(max(round(math.exp(rng.uniform(math.log(lo), math.log(hi)))), lo), hi))
        a = int(rng.integers(1, q + 1))
        while math.gcd(a, q) != 1:
            a = a % q + 1
        xi[lead] = (a / q + rng.uniform(-1, 1) / q**2) % 1.0
        out.append(dict(xi=xi, a=a, q=q))
    return out
