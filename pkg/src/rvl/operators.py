"""
Averaging and singular operators along weighted prime orbits on Z^{d0}.

For an orbit of points y with weights w(y) and lift matrix L the operators act by

    M_N f(x) = (1/theta_B(N)) sum_y f(x - L Q(y)) w(y)     (weighted average)
    A_N f(x) = (1/pi_B(N))    sum_y f(x - L Q(y))          (plain average)
    H_N f(x) = sum_y f(x - L Q(y)) K(y) w(y)               (singular, signed orbit)

Functions are finitely supported and stored sparsely. Outputs are formed in
the gather direction: every (support point, orbit point) pair contributes
once and the contributions are accumulated per target in a fixed order,
which keeps the result independent of hashing and bit-exact under
translation of the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .lattice import ConvexBody, MultiIndexSet, WeightedOrbit, counting, enumerate_orbit
from .numtheory import PrimeTable

BINARY_MAGIC = b"RVLSF1\n"


def _lex_unique(coords: np.ndarray):
    """Lexicographically sorted unique rows of an int64 array plus the inverse map."""
    n, d = coords.shape
    if n == 0:
        return coords, np.zeros(0, np.int64)
    lo = coords.min(axis=0)
    span = coords.max(axis=0) - lo + 1
    if d and float(np.prod(span.astype(float))) < 2.0**62:
        # mixed-radix key with the first coordinate most significant keeps lex order
        key = np.zeros(n, np.int64)
        for j in range(d):
            key = key * span[j] + (coords[:, j] - lo[j])
        _, first, inv = np.unique(key, return_index=True, return_inverse=True)
        return coords[first], inv.ravel()
    uniq, inv = np.unique(coords, axis=0, return_inverse=True)
    return uniq, inv.ravel()


@dataclass(frozen=True)
class SparseFunction:
    """Finitely supported f: Z^{d0} -> C with coordinates kept in lexicographic order."""

    coords: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.int64)
        v = np.asarray(self.values, dtype=np.complex128).ravel()
        if c.ndim != 2 or len(c) != len(v):
            raise DomainError("coords must be (M, d0) matching values of length M")
        c, inv = _lex_unique(c)
        v = np.bincount(inv, weights=v.real, minlength=len(c)) + 1j * np.bincount(
            inv, weights=v.imag, minlength=len(c)
        ) if len(v) else v
        keep = v != 0
        object.__setattr__(self, "coords", c[keep])
        object.__setattr__(self, "values", v[keep])

    @property
    def d0(self) -> int:
        return self.coords.shape[1]

    @classmethod
    def zero(cls, d0: int) -> "SparseFunction":
        return cls(np.zeros((0, d0), np.int64), np.zeros(0, complex))

    @classmethod
    def delta(cls, d0: int = 1, at=None) -> "SparseFunction":
        at = np.zeros(d0, np.int64) if at is None else np.asarray(at, np.int64)
        return cls(at.reshape(1, d0), np.ones(1, complex))

    @classmethod
    def from_dict(cls, d0: int, mapping: dict) -> "SparseFunction":
        if not mapping:
            return cls.zero(d0)
        keys = [k if isinstance(k, tuple) else (k,) for k in mapping]
        return cls(np.array(keys, np.int64).reshape(-1, d0), np.array(list(mapping.values()), complex))

    @classmethod
    def random(cls, rng: np.random.Generator, d0: int, size: int, radius: int = 20) -> "SparseFunction":
        coords = rng.integers(-radius, radius + 1, size=(size, d0))
        vals = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        return cls(coords, vals)

    def __len__(self):
        return len(self.values)

    def to_dict(self) -> dict:
        return {tuple(int(c) for c in row): complex(v) for row, v in zip(self.coords, self.values)}

    def __call__(self, x) -> complex:
        return self.to_dict().get(tuple(int(c) for c in np.atleast_1d(x)), 0j)

    def __add__(self, other: "SparseFunction") -> "SparseFunction":
        return SparseFunction(np.concatenate([self.coords, other.coords]),
                              np.concatenate([self.values, other.values]))

    def scale(self, alpha: complex) -> "SparseFunction":
        return SparseFunction(self.coords, self.values * alpha)

    def translate(self, v) -> "SparseFunction":
        """The function x -> f(x - v)."""
        return SparseFunction(self.coords + np.asarray(v, np.int64), self.values)

    def norm(self, p: float = 2.0) -> float:
        a = np.abs(self.values)
        if len(a) == 0:
            return 0.0
        if math.isinf(p):
            return float(a.max())
        return float(np.sum(a**p) ** (1.0 / p))

    def fourier(self, xis) -> np.ndarray:
        """f^(xi) = sum_x f(x) e^{2 pi i <xi, x>} for each row of `xis`."""
        xis = np.atleast_2d(np.asarray(xis, dtype=float))
        phase = xis @ self.coords.T.astype(float)
        phase -= np.floor(phase)
        return np.exp(2j * np.pi * phase) @ self.values

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join([f"x{j}" for j in range(self.d0)] + ["re", "im"]) + "\n")
            for row, v in zip(self.coords, self.values):
                fh.write(",".join([str(int(c)) for c in row] + [repr(float(v.real)), repr(float(v.imag))]) + "\n")

    @classmethod
    def from_csv(cls, path) -> "SparseFunction":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            d0 = len(header) - 2
            rows = [line.strip().split(",") for line in fh if line.strip()]
        if not rows:
            return cls.zero(d0)
        coords = np.array([[int(c) for c in r[:d0]] for r in rows], np.int64)
        vals = np.array([complex(float(r[d0]), float(r[d0 + 1])) for r in rows])
        return cls(coords, vals)

    def to_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(np.array([len(self), self.d0], dtype="<i8").tobytes())
            fh.write(self.coords.astype("<i8").tobytes())
            fh.write(self.values.astype("<c16").tobytes())

    @classmethod
    def from_binary(cls, path) -> "SparseFunction":
        with open(path, "rb") as fh:
            if fh.read(len(BINARY_MAGIC)) != BINARY_MAGIC:
                raise DomainError(f"{path}: not a sparse-function file")
            n, d0 = np.frombuffer(fh.read(16), dtype="<i8")
            coords = np.frombuffer(fh.read(8 * n * d0), dtype="<i8").reshape(n, d0)
            vals = np.frombuffer(fh.read(16 * n), dtype="<c16")
        return cls(coords.copy(), vals.copy())


# ---------------------------------------------------------------- kernels


@dataclass(frozen=True)
class CZKernel:
    """Kernel K on R^k minus the origin, with its gradient."""

    k: int
    evaluate: Callable = field(repr=False)
    gradient: Callable = field(repr=False)
    name: str = "custom"
    odd: bool = False

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(np.asarray(x, dtype=float).reshape(-1, self.k))

    @classmethod
    def builtin(cls, k: int = 1) -> "CZKernel":
        """K(x) = x_1 / ((k+1)|x|^{k+1}); for k = 1 this is 1/(2x).

        Size and gradient terms add up to at most 1:
        |x|^k |K| = |u_1|/(k+1) and |x|^{k+1}|grad K| = sqrt(1 + (k^2-1)u_1^2)/(k+1),
        with u = x/|x|, and both peak together at u_1 = +-1.
        """

        def ev(x):
            r = np.linalg.norm(x, axis=1)
            return x[:, 0] / ((k + 1) * r ** (k + 1))

        def grad(x):
            r = np.linalg.norm(x, axis=1)[:, None]
            e1 = np.zeros_like(x)
            e1[:, 0] = 1.0
            return (e1 / r ** (k + 1) - (k + 1) * x[:, :1] * x / r ** (k + 3)) / (k + 1)

        return cls(k, ev, grad, name=f"riesz-{k}", odd=True)


@dataclass
class KernelReport:
    size_bound_max: float
    shell_integrals: list
    size_ok: bool
    cancellation_ok: bool

    @property
    def ok(self) -> bool:
        return self.size_ok and self.cancellation_ok


def validate_kernel(kernel: CZKernel, body: ConvexBody | None = None, samples: int = 10_000,
                    shells: int = 20, seed: int = 0, tol: float = 1e-9) -> KernelReport:
    """Sample the size/gradient bound and shell cancellation of a kernel.

    Size: |x|^k |K(x)| + |x|^{k+1} |grad K(x)| <= 1 at random |x| >= 1.
    Cancellation: integral of K over B_lam minus B_lam' by antithetic Monte Carlo.
    """
    k = kernel.k
    body = body or ConvexBody.cube(k)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, k))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    x = u * np.exp(rng.uniform(0, 6, size=(samples, 1)))
    r = np.linalg.norm(x, axis=1)
    lhs = r**k * np.abs(kernel(x)) + r ** (k + 1) * np.linalg.norm(kernel.gradient(x), axis=1)
    size_max = float(lhs.max())
    ints = []
    for _ in range(shells):
        lam_small, lam_big = np.sort(rng.uniform(0.5, 50, size=2))
        y = rng.uniform(-lam_big, lam_big, size=(4096, k))
        pts = np.concatenate([y, -y])
        inside = body.contains(pts, lam_big) & ~body.contains(pts, lam_small)
        vals = np.where(inside, kernel(np.where(inside[:, None], pts, 1.0)), 0.0)
        ints.append(float(vals.mean() * (2 * lam_big) ** k))
    return KernelReport(size_max, ints, size_max <= 1 + 1e-12, max(abs(v) for v in ints) <= tol)


# ---------------------------------------------------------------- operators


def _shifts(orbit: WeightedOrbit, L) -> np.ndarray:
    if orbit.images is None:
        raise DomainError("orbit has no monomial images; enumerate it with a gamma")
    L = np.asarray(L, dtype=np.int64)
    return orbit.images @ L.T


def _gather(f: SparseFunction, shifts: np.ndarray, coeffs: np.ndarray) -> SparseFunction:
    """g(x) = sum_j f(x - shifts_j) coeffs_j."""
    d0 = shifts.shape[1]
    if f.d0 != d0:
        raise DomainError(f"function lives on Z^{f.d0} but the operator maps into Z^{d0}")
    if len(f) == 0 or len(shifts) == 0:
        return SparseFunction.zero(d0)
    targets = (f.coords[:, None, :] + shifts[None, :, :]).reshape(-1, d0)
    contrib = (f.values[:, None] * coeffs[None, :]).ravel()
    uniq, inv = _lex_unique(targets)
    re = np.bincount(inv, weights=contrib.real, minlength=len(uniq))
    im = np.bincount(inv, weights=contrib.imag, minlength=len(uniq))
    return SparseFunction(uniq, re + 1j * im)


def apply_average(f: SparseFunction, orbit: WeightedOrbit, L, weighted: bool = True) -> SparseFunction:
    """Weighted average M_N f (normalized by theta_B(N)) or plain average A_N f (by pi_B(N))."""
    if len(orbit) == 0:
        raise DomainError(f"empty orbit at N={orbit.N}: the average has no normalizer")
    if weighted:
        coeffs = orbit.weights / orbit.total_weight
    else:
        coeffs = np.full(len(orbit), 1.0 / len(orbit))
    return _gather(f, _shifts(orbit, L), coeffs)


def apply_singular(f: SparseFunction, kernel: CZKernel, orbit: WeightedOrbit, L) -> SparseFunction:
    """Truncated singular operator H_N f over a signed orbit."""
    if kernel.k != orbit.k:
        raise DomainError(f"kernel dimension {kernel.k} differs from orbit dimension {orbit.k}")
    if len(orbit) and np.any(np.all(orbit.points == 0, axis=1)):
        raise DomainError("orbit contains the origin, where the kernel is singular")
    if len(orbit) == 0:
        d0 = np.asarray(L).shape[0]
        return SparseFunction.zero(d0)
    coeffs = kernel(orbit.points) * orbit.weights
    return _gather(f, _shifts(orbit, L), coeffs)


# ---------------------------------------------------------------- comparisons


@dataclass
class ComparisonRow:
    N: int
    norm: float
    scaled: float | None  # norm * ln N / ||f||
    skipped: bool = False


@dataclass
class ComparisonTable:
    rows: list
    C_fit: float
    stable: bool


def compare_weighted_unweighted(f: SparseFunction, gamma: MultiIndexSet, L, body: ConvexBody, Nlist,
                                p: float = 1.0, primes: PrimeTable | None = None, kprime: int = 0,
                                kdoubleprime: int = 1) -> ComparisonTable:
    """||M_N f - A_N f||_p for each N, with the fitted C in C/ln N.

    The fit is called stable when the scaled values norm*ln N/||f|| on the
    second half of `Nlist` stay within a factor 2 of each other.
    """
    Nlist = list(Nlist)
    if any(b <= a for a, b in zip(Nlist, Nlist[1:])):
        raise DomainError("Nlist must be strictly increasing")
    fn = f.norm(p)
    rows = []
    for N in Nlist:
        orbit = enumerate_orbit(body, N, kprime, kdoubleprime, primes, gamma=gamma)
        if len(orbit) == 0:
            rows.append(ComparisonRow(N, float("nan"), None, skipped=True))
            continue
        diff = apply_average(f, orbit, L, True) + apply_average(f, orbit, L, False).scale(-1)
        nv = diff.norm(p)
        scaled = nv * math.log(N) / fn if fn > 0 and N > 1 else 0.0
        rows.append(ComparisonRow(N, nv, scaled))
    scaled = [r.scaled for r in rows if not r.skipped]
    C = max(scaled, default=0.0)
    tail = scaled[len(scaled) // 2:]
    stable = bool(tail) and (min(tail) == max(tail) == 0 or (min(tail) > 0 and max(tail) / min(tail) <= 2))
    return ComparisonTable(rows, C, stable)


# ---------------------------------------------------------------- telescoping


@dataclass
class TelescopingSetup:
    body: ConvexBody
    kprime: int
    kdoubleprime: int
    primes: PrimeTable | None
    kernel: CZKernel | None = None


@dataclass
class TelescopingResult:
    lhs: float
    rhs_unit: float  # N1^{-k} (theta_B(N2) - theta_B(N1)); the bound is C times this
    pointwise_direct: np.ndarray
    pointwise_closed: np.ndarray
    points: np.ndarray

    @property
    def max_pointwise_error(self) -> float:
        if len(self.points) == 0:
            return 0.0
        return float(np.max(np.abs(self.pointwise_direct - self.pointwise_closed)))


def first_scale(body: ConvexBody, points: np.ndarray) -> np.ndarray:
    """Smallest integer n with the point in B_n."""
    if body.kind == "cube":
        return np.abs(points).max(axis=1)
    if body.kind == "ball":
        sq = (points.astype(np.int64) ** 2).sum(axis=1)
        r = np.array([math.isqrt(int(s)) for s in sq], dtype=np.int64)
        return r + (r * r < sq)
    raise DomainError("first_scale needs a built-in body")


def telescoping_l1(kind: str, N1: int, N2: int, setup: TelescopingSetup) -> TelescopingResult:
    """Sum over n in [N1, N2) of |kappa_{n+1} - kappa_n| in l^1, directly and in closed form.

    kappa_n is the average kernel w 1_{B_n}/theta_B(n) (kind="average") or the
    singular kernel K w 1_{B_n} on a signed orbit (kind="singular"). Both are
    computed on the orbit points of B_{N2}; the closed forms are

        average, y in B_{N1}:           (1/theta(N1) - 1/theta(N2)) w(y)
        average, first scale n0 > N1:   (2/theta(n0) - 1/theta(N2)) w(y)
        singular:                       |K(y)| w(y) on B_{N2} minus B_{N1}, else 0
    """
    if N1 >= N2:
        raise DomainError(f"need N1 < N2, got N1={N1}, N2={N2}")
    if kind not in ("average", "singular"):
        raise DomainError(f"unknown kernel kind {kind!r}")
    B, kp, kpp, P = setup.body, setup.kprime, setup.kdoubleprime, setup.primes
    signed = kind == "singular"
    orbit = enumerate_orbit(B, N2, kp, kpp, P, signed=signed, punctured=signed)
    pts, w = orbit.points, orbit.weights
    n0 = first_scale(B, pts)
    direct = np.zeros(len(pts))
    if kind == "average":
        theta = {n: counting(B, n, kp, kpp, P)[1] for n in range(N1, N2 + 1)}

        def kappa(n):
            return np.where(n0 <= n, w / theta[n], 0.0) if theta[n] > 0 else np.zeros(len(pts))

        prev = kappa(N1)
        for n in range(N1, N2):
            cur = kappa(n + 1)
            direct += np.abs(cur - prev)
            prev = cur
        tN2 = theta[N2]
        inner = n0 <= N1
        closed = np.zeros(len(pts))
        if theta[N1] > 0:
            closed[inner] = (1 / theta[N1] - 1 / tN2) * w[inner]
        tn0 = np.array([theta[int(n)] for n in n0[~inner]])
        closed[~inner] = (2 / tn0 - 1 / tN2) * w[~inner]
        t1, t2 = theta[N1], tN2
    else:
        if setup.kernel is None:
            raise DomainError("singular telescoping needs a kernel")
        kw = setup.kernel(pts) * w if len(pts) else np.zeros(0)
        prev = np.where(n0 <= N1, kw, 0.0)
        for n in range(N1, N2):
            cur = np.where(n0 <= n + 1, kw, 0.0)
            direct += np.abs(cur - prev)
            prev = cur
        closed = np.where(n0 > N1, np.abs(kw), 0.0)
        t1 = counting(B, N1, kp, kpp, P, signed=True, punctured=True)[1]
        t2 = counting(B, N2, kp, kpp, P, signed=True, punctured=True)[1]
    lhs = float(np.sum(direct))
    return TelescopingResult(lhs, (t2 - t1) / float(N1) ** B.k, direct, closed, pts)
