"""
Multi-indices, the canonical monomial map, convex bodies and weighted orbits.

The canonical map sends x in Z^k to (x^gamma : gamma in Gamma), where Gamma
holds every nonzero exponent vector with all entries <= degree, listed in
lexicographic order. Any integer polynomial map P without constant term
factors as P = L o Q for an integer matrix L (`lift_polynomial`).

An orbit is the set of points (n, p) with n on integer axes and p on prime
axes lying in the dilate B_N, stored column-wise together with the weight
prod ln|p_j| and the monomial images Q(n, p).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ._parallel import chunks, default_threads, ordered_map
from .errors import DomainError, ImageOverflowError, SizeError
from .numtheory import PrimeTable

GAMMA_CAP = 10**6
DEFAULT_ORBIT_CAP = 10**7
ORBIT_FORMAT_VERSION = 1
INT64_SAFE = 2**62


@dataclass(frozen=True)
class MultiIndexSet:
    k: int
    degree: int
    gammas: tuple[tuple[int, ...], ...]

    @property
    def d(self) -> int:
        return len(self.gammas)

    @property
    def sizes(self) -> np.ndarray:
        """|gamma| for each entry; the diagonal of the scaling matrix A."""
        return np.array([sum(g) for g in self.gammas], dtype=np.int64)

    @property
    def exponents(self) -> np.ndarray:
        return np.array(self.gammas, dtype=np.int64).reshape(self.d, self.k)

    def index(self, gamma) -> int:
        return self.gammas.index(tuple(gamma))

    def scale(self, N: float, xi) -> np.ndarray:
        """N^A xi: component gamma multiplied by N^{|gamma|}."""
        return np.asarray(xi, dtype=float) * float(N) ** self.sizes

    def images(self, points: np.ndarray) -> np.ndarray:
        """Q(x) for each row x of an integer array of shape (M, k)."""
        points = np.asarray(points, dtype=np.int64).reshape(-1, self.k)
        if len(points):
            bound = int(np.abs(points).max())
            if bound > 1 and bound ** int(self.sizes.max()) > INT64_SAFE:
                raise ImageOverflowError(
                    f"monomials of degree {int(self.sizes.max())} at |x|={bound} exceed 2^62"
                )
        out = np.ones((len(points), self.d), dtype=np.int64)
        for i, g in enumerate(self.gammas):
            for j, e in enumerate(g):
                if e:
                    out[:, i] *= points[:, j] ** e
        return out

    def images_exact(self, x: Sequence[int]) -> list[int]:
        """Q(x) for one point using Python integers (no overflow)."""
        return [math.prod(int(v) ** e for v, e in zip(x, g)) for g in self.gammas]


def build_gamma(k: int, degree: int) -> MultiIndexSet:
    """All gamma in {0..degree}^k minus the zero vector, lexicographically."""
    if k < 1 or degree < 1:
        raise DomainError(f"need k >= 1 and degree >= 1, got k={k}, degree={degree}")
    size = (degree + 1) ** k - 1
    if size > GAMMA_CAP:
        raise SizeError(f"|Gamma| = {size} exceeds cap {GAMMA_CAP}", size=size)
    gammas = tuple(g for g in itertools.product(range(degree + 1), repeat=k) if any(g))
    return MultiIndexSet(k, degree, gammas)


@dataclass(frozen=True)
class PolynomialMap:
    """Integer polynomial map Z^k -> Z^{d0}, stored as {(j, gamma): c}."""

    k: int
    d0: int
    coeffs: dict = field(hash=False)

    def __post_init__(self):
        for (j, g), c in self.coeffs.items():
            if not 0 <= j < self.d0 or len(g) != self.k or min(g) < 0:
                raise DomainError(f"bad term (j={j}, gamma={g})")
            if int(c) != c:
                raise DomainError(f"coefficient {c} is not an integer")

    @classmethod
    def from_rows(cls, k: int, rows: Sequence[dict]) -> "PolynomialMap":
        """Build from one {gamma: coefficient} dict per output component."""
        coeffs = {(j, tuple(g)): int(c) for j, row in enumerate(rows) for g, c in row.items() if c}
        return cls(k, len(rows), coeffs)

    @property
    def degree(self) -> int:
        """Total degree."""
        return max((sum(g) for (_, g) in self.coeffs), default=0)

    @property
    def box_degree(self) -> int:
        """Largest single-variable exponent."""
        return max((max(g) for (_, g) in self.coeffs), default=0)

    def has_constant_term(self) -> bool:
        return any(not any(g) for (_, g) in self.coeffs)

    def evaluate(self, x: Sequence[int]) -> list[int]:
        out = [0] * self.d0
        for (j, g), c in self.coeffs.items():
            out[j] += c * math.prod(int(v) ** e for v, e in zip(x, g))
        return out


def lift_polynomial(P: PolynomialMap, degree: int | None = None, seed: int = 0, checks: int = 100):
    """Return (Gamma, L) with L Q = P, L an integer matrix of shape (d0, d).

    Gamma uses `degree` (default: the largest single-variable exponent of P,
    the smallest box containing every monomial). The identity is confirmed
    on `checks` random points of [-10, 10]^k in exact integer arithmetic.
    """
    if P.has_constant_term():
        raise DomainError("polynomial map has a constant term; it cannot be lifted")
    deg = degree if degree is not None else max(P.box_degree, 1)
    gamma = build_gamma(P.k, deg)
    L = np.zeros((P.d0, gamma.d), dtype=np.int64)
    for (j, g), c in P.coeffs.items():
        if max(g) > deg:
            raise DomainError(f"monomial {g} does not fit in degree {deg}")
        L[j, gamma.index(g)] += c
    rng = np.random.default_rng(seed)
    for x in rng.integers(-10, 11, size=(checks, P.k)):
        q = gamma.images_exact(x)
        lq = [sum(int(L[j, i]) * q[i] for i in range(gamma.d)) for j in range(P.d0)]
        if lq != P.evaluate(x):
            raise DomainError(f"lift identity failed at {x.tolist()}")
    return gamma, L


# ---------------------------------------------------------------- bodies


@dataclass(frozen=True)
class ConvexBody:
    """Bounded convex body B containing the origin, with [-iota, iota]^k in B in [-1, 1]^k.

    Membership in the dilate B_N is closed: x in B_N iff x/N in the closure of B.
    Built-in kinds are "cube" and "ball"; "custom" wraps a vectorized predicate
    on points of the unit-scale body.
    """

    kind: str
    k: int
    iota: float
    volume: float
    predicate: Callable | None = field(default=None, compare=False, repr=False)
    volume_stderr: float = 0.0
    positive_volume: float | None = None

    @classmethod
    def cube(cls, k: int = 1) -> "ConvexBody":
        return cls("cube", k, 1.0, 2.0**k, positive_volume=1.0)

    @classmethod
    def interval(cls) -> "ConvexBody":
        return cls.cube(1)

    @classmethod
    def ball(cls, k: int = 2) -> "ConvexBody":
        vol = math.pi ** (k / 2) / math.gamma(k / 2 + 1)
        return cls("ball", k, 1 / math.sqrt(k), vol, positive_volume=vol / 2**k)

    @classmethod
    def custom(cls, k, predicate, iota, volume=None, samples=200_000, seed=0) -> "ConvexBody":
        """Custom body; missing volumes are estimated by Monte Carlo (stderr kept)."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, size=(samples, k))
        inside = np.asarray(predicate(x), dtype=bool)
        frac = inside.mean()
        pos = inside[(x > 0).all(axis=1)].mean() if k else 1.0
        stderr = 0.0
        if volume is None:
            volume = frac * 2.0**k
            stderr = math.sqrt(frac * (1 - frac) / samples) * 2.0**k
        return cls("custom", k, float(iota), float(volume), predicate, stderr, float(pos))

    @property
    def orthant_volume(self) -> float:
        """|B ∩ [0, inf)^k|, the volume seen by sums over positive coordinates."""
        return self.positive_volume

    def contains(self, points, N: float = 1.0) -> np.ndarray:
        pts = np.asarray(points)
        pts = pts.reshape(-1, self.k)
        if self.kind == "cube":
            return np.abs(pts).max(axis=1) <= N if self.k else np.ones(len(pts), bool)
        if self.kind == "ball":
            if pts.dtype.kind in "iu" and float(N).is_integer():
                return (pts.astype(np.int64) ** 2).sum(axis=1) <= int(N) ** 2
            return (pts.astype(float) ** 2).sum(axis=1) <= float(N) ** 2
        return np.asarray(self.predicate(pts / float(N)), dtype=bool)

    def check_inclusions(self, grid: int = 21) -> bool:
        """Sample [-iota, iota]^k inside B and B inside [-1, 1]^k on a boundary grid."""
        t = np.linspace(-1, 1, grid)
        pts = np.array(list(itertools.product(t, repeat=self.k)))
        shell = pts[np.abs(pts).max(axis=1) == 1.0]
        inner_ok = self.contains(shell * self.iota * (1 - 1e-12)).all()
        outer_ok = not self.contains(shell * (1 + 1e-9)).any()
        return bool(inner_ok and outer_ok)


# ---------------------------------------------------------------- orbits


@dataclass(frozen=True)
class WeightedOrbit:
    """Points (n, p) of B_N with weights prod ln|p_j| and monomial images, column-wise."""

    N: int
    kprime: int
    kdoubleprime: int
    signed: bool
    points: np.ndarray
    weights: np.ndarray
    images: np.ndarray | None = None
    gamma: MultiIndexSet | None = None

    @property
    def k(self) -> int:
        return self.kprime + self.kdoubleprime

    def __len__(self):
        return len(self.points)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def with_gamma(self, gamma: MultiIndexSet) -> "WeightedOrbit":
        return WeightedOrbit(self.N, self.kprime, self.kdoubleprime, self.signed,
                             self.points, self.weights, gamma.images(self.points), gamma)

    def save(self, path) -> None:
        """Columnar .npz with a versioned JSON header."""
        meta = dict(format="rvl-orbit", version=ORBIT_FORMAT_VERSION, N=self.N, kprime=self.kprime,
                    kdoubleprime=self.kdoubleprime, signed=self.signed,
                    gamma=None if self.gamma is None else [self.gamma.k, self.gamma.degree])
        arrays = dict(points=self.points, weights=self.weights)
        if self.images is not None:
            arrays["images"] = self.images
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path) -> "WeightedOrbit":
        with np.load(path) as z:
            meta = json.loads(z["meta"].tobytes().decode())
            if meta.get("format") != "rvl-orbit" or meta.get("version") != ORBIT_FORMAT_VERSION:
                raise DomainError(f"{path}: unsupported orbit file header {meta}")
            images = z["images"] if "images" in z else None
            gamma = build_gamma(*meta["gamma"]) if meta["gamma"] else None
            return cls(meta["N"], meta["kprime"], meta["kdoubleprime"], meta["signed"],
                       z["points"], z["weights"], images, gamma)

    def to_csv(self, path) -> None:
        cols = [f"x{j}" for j in range(self.k)] + ["weight"]
        if self.images is not None:
            cols += [f"q{i}" for i in range(self.images.shape[1])]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(len(self)):
                row = [str(int(v)) for v in self.points[i]] + [repr(float(self.weights[i]))]
                if self.images is not None:
                    row += [str(int(v)) for v in self.images[i]]
                fh.write(",".join(row) + "\n")


def _axis_values(kind: str, N: int, primes: PrimeTable | None) -> tuple[np.ndarray, np.ndarray]:
    """(values, log-weights) on one axis within [-N, N]."""
    if kind == "naturals":
        v = np.arange(1, N + 1, dtype=np.int64)
        return v, np.zeros(len(v))
    if kind == "integers":
        v = np.arange(-N, N + 1, dtype=np.int64)
        return v, np.zeros(len(v))
    if N < 2:
        return np.zeros(0, np.int64), np.zeros(0)
    ps = primes.upto(N)
    lg = primes.logs[: len(ps)]
    if kind == "primes":
        return ps.copy(), lg.copy()
    if kind == "signed-primes":
        return np.concatenate([-ps[::-1], ps]), np.concatenate([lg[::-1], lg])
    raise DomainError(f"unknown axis kind {kind!r}")


def axis_kinds(kprime: int, kdoubleprime: int, signed: bool) -> list[str]:
    return (["integers" if signed else "naturals"] * kprime
            + ["signed-primes" if signed else "primes"] * kdoubleprime)


def _check_args(B: ConvexBody, N: int, kprime: int, kdoubleprime: int, primes):
    if kprime < 0 or kdoubleprime < 0 or kprime + kdoubleprime != B.k:
        raise DomainError(f"k'={kprime}, k''={kdoubleprime} do not match body dimension {B.k}")
    if N < 0:
        raise DomainError(f"scale must be non-negative, got {N}")
    if kdoubleprime:
        if primes is None:
            raise DomainError("prime axes need a PrimeTable")
        primes.check_covers(N)


def _expand(B: ConvexBody, N: int, axes, prefix_pts, prefix_logs):
    """Extend partial points axis by axis, pruning with the body's coordinate bound."""
    pts, logs = prefix_pts, prefix_logs
    sq = (pts.astype(np.int64) ** 2).sum(axis=1) if B.kind == "ball" else None
    for vals, lw in axes:
        if B.kind == "ball":
            keep = sq[:, None] + vals[None, :] ** 2 <= N * N
            i, j = np.nonzero(keep)
            sq = sq[i] + vals[j] ** 2
        else:
            i = np.repeat(np.arange(len(pts)), len(vals))
            j = np.tile(np.arange(len(vals)), len(pts))
        pts = np.concatenate([pts[i], vals[j, None]], axis=1)
        logs = [lg[i] for lg in logs] + [lw[j]]
    return pts, logs


def enumerate_orbit(B: ConvexBody, N: int, kprime: int, kdoubleprime: int, primes: PrimeTable | None = None,
                    signed: bool = False, gamma: MultiIndexSet | None = None, cap: int = DEFAULT_ORBIT_CAP,
                    punctured: bool = False, threads: int | None = None) -> WeightedOrbit:
    """All (n, p) in B_N with n on integer axes and p on prime axes.

    Unsigned orbits use n >= 1 and positive primes; signed orbits use all of
    Z on integer axes and +-primes on prime axes. `punctured` drops the origin.
    """
    N = int(N)
    _check_args(B, N, kprime, kdoubleprime, primes)
    count, _ = counting(B, N, kprime, kdoubleprime, primes, signed=signed, punctured=punctured)
    if count > cap:
        raise SizeError(f"orbit has {count} points, above the cap {cap}", size=count)
    axes = [_axis_values(kind, N, primes) for kind in axis_kinds(kprime, kdoubleprime, signed)]
    k = B.k
    if count == 0 or k == 0:
        pts = np.zeros((0, k), np.int64)
        logs = [np.zeros(0) for _ in range(k)]
    else:
        lead_vals, lead_lw = axes[0]
        threads = threads or default_threads()

        def work(sl):
            p0 = lead_vals[sl, None]
            return _expand(B, N, axes[1:], p0, [lead_lw[sl]])

        parts = ordered_map(work, chunks(len(lead_vals), threads * 4 if threads > 1 else 1), threads)
        pts = np.concatenate([p for p, _ in parts]) if parts else np.zeros((0, k), np.int64)
        logs = [np.concatenate([lg[a] for _, lg in parts]) for a in range(k)]
        if B.kind == "custom":
            keep = B.contains(pts, N)
            pts = pts[keep]
            logs = [lg[keep] for lg in logs]
    if punctured and len(pts):
        keep = np.any(pts != 0, axis=1)
        pts = pts[keep]
        logs = [lg[keep] for lg in logs]
    weights = np.ones(len(pts))
    for a in range(kprime, k):
        weights = weights * logs[a]
    images = gamma.images(pts) if gamma is not None else None
    return WeightedOrbit(N, kprime, kdoubleprime, signed, pts, weights, images, gamma)


def counting(B: ConvexBody, N: int, kprime: int, kdoubleprime: int, primes: PrimeTable | None = None,
             signed: bool = False, punctured: bool = False) -> tuple[int, float]:
    """(pi_B(N), theta_B(N)) without storing the orbit.

    For built-in bodies the last coordinate is summed in closed form through
    cumulative prime counts, so the cost is that of the (k-1)-dimensional prefix.
    """
    N = int(N)
    _check_args(B, N, kprime, kdoubleprime, primes)
    kinds = axis_kinds(kprime, kdoubleprime, signed)
    if B.k == 0:
        return 0, 0.0
    if B.kind == "custom":
        orb = _custom_orbit(B, N, kinds, primes, kprime, punctured)
        return len(orb[1]), float(np.sum(orb[1]))
    axes = [_axis_values(kind, N, primes) for kind in kinds[:-1]]
    pts, logs = _expand(B, N, axes, np.zeros((1, 0), np.int64), [])
    wts = np.ones(len(pts))
    for a in range(kprime, B.k - 1):
        wts = wts * logs[a]
    if B.kind == "ball":
        rem = N * N - (pts**2).sum(axis=1)
        ext = np.array([math.isqrt(int(r)) for r in rem], dtype=np.int64)
    else:
        ext = np.full(len(pts), N, dtype=np.int64)
    last = kinds[-1]
    if last in ("primes", "signed-primes"):
        if primes is None:
            cnt = np.zeros(len(ext), np.int64)
            th = np.zeros(len(ext))
        else:
            idx = np.searchsorted(primes.primes, ext, side="right")
            cnt = idx
            th = primes.theta_cum[idx]
        if last == "signed-primes":
            cnt, th = 2 * cnt, 2 * th
    elif last == "naturals":
        cnt, th = ext, ext.astype(float)
    else:
        cnt, th = 2 * ext + 1, (2 * ext + 1).astype(float)
    total = int(np.sum(cnt))
    theta = float(np.sum(wts * th))
    if punctured and signed and kdoubleprime == 0:
        total -= 1
        theta -= 1.0
    return total, theta


def _custom_orbit(B, N, kinds, primes, kprime, punctured):
    axes = [_axis_values(kind, N, primes) for kind in kinds]
    pts, logs = _expand(ConvexBody.cube(B.k), N, axes, np.zeros((1, 0), np.int64), [])
    keep = B.contains(pts, N)
    if punctured:
        keep &= np.any(pts != 0, axis=1)
    w = np.ones(int(keep.sum()))
    for a in range(kprime, B.k):
        w = w * logs[a][keep]
    return pts[keep], w
