"""
Fourier multipliers of the prime averages and their continuous models.

Conventions: e(t) = exp(2 pi i t), and for an orbit with monomial images Q(y)

    m_N(xi) = theta_B(N)^{-1} sum_y e(<xi, Q(y)>) w(y)
    h_N(xi) = sum_y e(<xi, Q(y)>) K(y) w(y)          (signed orbit)
    Phi_N(xi) = |B|^{-1} int_B e(<xi, Q(N x)>) dx = Phi_1(N^A xi)
    Psi_N(xi) = p.v. int_{B_N} e(<xi, Q(x)>) K(x) dx

G(a/q) is the complete sum of e(<a, Q>/q) over N_q^{k'} x A_q^{k''},
normalized by q^{k'} phi(q)^{k''}. At a rational point a/q + theta the
circle method predicts m_N ~ G(a/q) Phi_N(theta).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, QuadratureError, SizeError
from .lattice import ConvexBody, MultiIndexSet, WeightedOrbit
from .numtheory import factorize, roots_of_unity, totient, units
from .operators import CZKernel

GAUSS_DIRECT_CAP = 10**8
XI_BLOCK = 64


def e(t):
    return np.exp(2j * np.pi * t)


# ---------------------------------------------------------------- frequencies


@dataclass(frozen=True)
class RationalFrequency:
    """xi = a/q + theta on the torus, with a in N_q^d and gcd(q, a_1, ..., a_d) = 1.

    Entries of `a` are stored in 1..q (0 is written as q).
    """

    a: tuple
    q: int
    theta: tuple = None

    def __post_init__(self):
        if self.q < 1:
            raise DomainError(f"denominator must be positive, got {self.q}")
        a = tuple(int(v) % self.q or self.q for v in self.a)
        if math.gcd(self.q, *a) != 1:
            raise DomainError(f"a={a} is not in A_q for q={self.q}")
        object.__setattr__(self, "a", a)
        th = (0.0,) * len(a) if self.theta is None else tuple(float(t) for t in self.theta)
        if len(th) != len(a):
            raise DomainError("theta and a must have the same length")
        object.__setattr__(self, "theta", th)

    @property
    def d(self) -> int:
        return len(self.a)

    @property
    def value(self) -> np.ndarray:
        v = np.array(self.a, dtype=float) / self.q + np.array(self.theta)
        return v - np.floor(v)

    @classmethod
    def scalar(cls, a: int, q: int, d: int, theta=None) -> "RationalFrequency":
        """The frequency with every component equal to a/q."""
        return cls((a,) * d, q, theta)


@dataclass(frozen=True)
class MultiplierSample:
    xi: tuple
    value: complex
    N: int
    kind: str  # discrete-average | discrete-singular | continuous-average | continuous-singular


def _as_xi_matrix(xis, d: int) -> np.ndarray:
    x = np.asarray(xis, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, d) if d > 1 else x.reshape(-1, 1)
    if x.shape[1] != d:
        raise DomainError(f"frequencies have dimension {x.shape[1]}, orbit images have {d}")
    return x


def _phase_sums(xis, orbit: WeightedOrbit, coeffs: np.ndarray) -> np.ndarray:
    """sum_y coeffs_y e(<xi, Q(y)>) for each frequency; rational inputs use exact residues."""
    if orbit.images is None:
        raise DomainError("orbit has no monomial images")
    imgs = orbit.images
    d = imgs.shape[1]
    if isinstance(xis, RationalFrequency):
        xis = [xis]
    if len(xis) and isinstance(xis[0], RationalFrequency):
        out = np.empty(len(xis), complex)
        for i, rf in enumerate(xis):
            if rf.d != d:
                raise DomainError(f"frequency dimension {rf.d} differs from {d}")
            res = (imgs % rf.q) @ (np.array(rf.a, np.int64) % rf.q) % rf.q
            ph = roots_of_unity(rf.q)[res]
            if any(rf.theta):
                t = imgs.astype(float) @ np.array(rf.theta)
                ph = ph * e(t - np.floor(t))
            out[i] = np.sum(ph * coeffs)
        return out
    x = _as_xi_matrix(xis, d)
    out = np.empty(len(x), complex)
    fimgs = imgs.astype(float)
    for s in range(0, len(x), XI_BLOCK):
        blk = x[s : s + XI_BLOCK]
        # reduce each term mod 1 before summing to keep the phase small
        t = blk[:, None, :] * fimgs[None, :, :]
        t = (t - np.floor(t)).sum(axis=2)
        out[s : s + XI_BLOCK] = e(t - np.floor(t)) @ coeffs
    return out


def m_hat(xis, orbit: WeightedOrbit) -> np.ndarray:
    """Discrete average multiplier m_N at each frequency (floats or RationalFrequency)."""
    if len(orbit) == 0:
        raise DomainError(f"empty orbit at N={orbit.N}: m_N has no normalizer")
    # divide once at the end so that integral phases give exactly 1
    return _phase_sums(xis, orbit, orbit.weights.astype(complex)) / orbit.total_weight


def h_hat(xis, orbit: WeightedOrbit, kernel: CZKernel) -> np.ndarray:
    """Discrete singular multiplier h_N at each frequency."""
    n = 1 if isinstance(xis, RationalFrequency) else len(xis)
    if len(orbit) == 0:
        return np.zeros(n, complex)
    if np.any(np.all(orbit.points == 0, axis=1)):
        raise DomainError("orbit contains the origin, where the kernel is singular")
    return _phase_sums(xis, orbit, kernel(orbit.points) * orbit.weights)


def multiplier_sweep(xis, orbit: WeightedOrbit, kind: str = "discrete-average", kernel=None) -> list:
    xs = _as_xi_matrix(xis, orbit.images.shape[1])
    if kind == "discrete-average":
        vals = m_hat(xs, orbit)
    elif kind == "discrete-singular":
        vals = h_hat(xs, orbit, kernel)
    else:
        raise DomainError(f"unknown sweep kind {kind!r}")
    return [MultiplierSample(tuple(map(float, x)), complex(v), orbit.N, kind) for x, v in zip(xs, vals)]


# ---------------------------------------------------------------- continuous models


@lru_cache(maxsize=512)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = w.flags.writeable = False
    return x, w


def _gl(n: int, lo: float, hi: float):
    x, w = _leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1), w * half


def _phase(eta, gamma: MultiIndexSet, pts: np.ndarray) -> np.ndarray:
    """<eta, Q(x)> for real points of shape (M, k)."""
    out = np.zeros(len(pts))
    for i, g in enumerate(gamma.gammas):
        if eta[i]:
            out += eta[i] * np.prod(pts ** np.array(g, float), axis=1)
    return out


def _node_count(eta, gamma: MultiIndexSet) -> int:
    omega = 2 * np.pi * float(np.sum(np.abs(eta) * gamma.sizes))
    return int(omega) + 32


def _box_integral(eta, gamma, k, lo, n, exact_inner=True):
    """int over [lo, 1]^k of e(<eta, Q(x)>); the last coordinate is done exactly when it enters linearly."""
    linear_last = exact_inner and all(g[-1] <= 1 for g in gamma.gammas)
    if linear_last:
        xs, ws = _gl(n, lo, 1.0)
        if k == 1:
            pts, wts = np.zeros((1, 0)), np.ones(1)
        else:
            grid = list(itertools.product(range(n), repeat=k - 1))
            idx = np.array(grid, dtype=np.int64)
            pts, wts = xs[idx], np.prod(ws[idx], axis=1)
        alpha = np.zeros(len(pts))
        beta = np.zeros(len(pts))
        for i, g in enumerate(gamma.gammas):
            if not eta[i]:
                continue
            mono = np.prod(pts ** np.array(g[:-1], float), axis=1) if k > 1 else np.ones(1)
            if g[-1] == 0:
                alpha += eta[i] * mono
            else:
                beta += eta[i] * mono
        if lo < 0:  # symmetric interval [-1, 1]
            inner = 2 * np.sinc(2 * beta)
        else:  # [0, 1]
            inner = e(beta / 2) * np.sinc(beta)
        return complex(np.sum(wts * e(alpha) * inner))
    xs, ws = _gl(n, lo, 1.0)
    idx = np.array(list(itertools.product(range(n), repeat=k)), dtype=np.int64)
    pts, wts = xs[idx], np.prod(ws[idx], axis=1)
    return complex(np.sum(wts * e(_phase(eta, gamma, pts))))


def _disk_integral(eta, gamma, orthant, n, exact_inner=True):
    """Unit disk (or its positive quadrant) with x1 = sin u, x2 = t cos u."""
    us, wu = _gl(n, 0.0 if orthant else -np.pi / 2, np.pi / 2)
    linear_last = exact_inner and all(g[-1] <= 1 for g in gamma.gammas)
    x1, h = np.sin(us), np.cos(us)
    if linear_last:
        alpha = np.zeros(n)
        beta = np.zeros(n)
        for i, g in enumerate(gamma.gammas):
            if eta[i]:
                mono = x1 ** g[0]
                if g[1] == 0:
                    alpha += eta[i] * mono
                else:
                    beta += eta[i] * mono
        if orthant:
            inner = h * e(beta * h / 2) * np.sinc(beta * h)
        else:
            inner = 2 * h * np.sinc(2 * beta * h)
        return complex(np.sum(wu * h * e(alpha) * inner))
    ts, wt = _gl(n, 0.0 if orthant else -1.0, 1.0)
    U, T = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    pts = np.stack([x1[U.ravel()], h[U.ravel()] * ts[T.ravel()]], axis=1)
    jac = (wu[U] * wt[T] * h[U] ** 2).ravel()
    return complex(np.sum(jac * e(_phase(eta, gamma, pts))))


def _raw_integral(eta, body, gamma, orthant, n, exact_inner=True) -> complex:
    if body.kind == "cube" or (body.kind == "ball" and body.k == 1):
        return _box_integral(eta, gamma, body.k, 0.0 if orthant else -1.0, n, exact_inner)
    if body.kind == "ball" and body.k == 2:
        return _disk_integral(eta, gamma, orthant, n, exact_inner)
    raise DomainError(f"no tensor rule for body {body.kind} in dimension {body.k}")


def _qmc_integral(eta, body, gamma, orthant, m):
    from scipy.stats import qmc

    pts = qmc.Sobol(body.k, scramble=True, seed=12345).random_base2(m)
    pts = pts if orthant else 2 * pts - 1
    inside = body.contains(pts)
    box = 1.0 if orthant else 2.0**body.k
    return complex(np.sum(e(_phase(eta, gamma, pts[inside]))) / len(pts) * box)


@dataclass
class QuadResult:
    value: complex
    error: float
    nodes: int


def phi_integral(xi, body: ConvexBody, N: float, gamma: MultiIndexSet, region: str = "full",
                 tol: float = 1e-10, max_nodes: int = 20_000, exact_inner: bool = True) -> QuadResult:
    """Phi_N(xi) by Gauss-Legendre at two resolutions (quasi-Monte Carlo for custom bodies).

    region="orthant" integrates over B intersected with the positive orthant,
    normalized by that volume; this is the continuous model of sums over
    positive integers and primes. With `exact_inner` (default) a last
    coordinate that enters Q linearly is integrated in closed form; set it
    False to force the full tensor rule.
    """
    eta = gamma.scale(N, xi)
    orthant = region == "orthant"
    if region not in ("full", "orthant"):
        raise DomainError(f"unknown region {region!r}")
    vol = body.orthant_volume if orthant else body.volume
    if not np.any(eta):
        return QuadResult(1.0 + 0j, 0.0, 0)
    if body.kind == "custom":
        v1 = _qmc_integral(eta, body, gamma, orthant, 14) / vol
        v2 = _qmc_integral(eta, body, gamma, orthant, 16) / vol
        return QuadResult(v2, abs(v2 - v1), 2**16)
    n1 = _node_count(eta, gamma)
    n2 = int(1.25 * n1) + 8
    full_tensor = not (exact_inner and all(g[-1] <= 1 for g in gamma.gammas))
    if n2 > max_nodes or (full_tensor and n2**body.k > 4 * 10**6):
        raise SizeError(f"phase too oscillatory for the tensor rule ({n2} nodes per axis)", size=n2)
    v1 = _raw_integral(eta, body, gamma, orthant, n1, exact_inner) / vol
    v2 = _raw_integral(eta, body, gamma, orthant, n2, exact_inner) / vol
    err = abs(v2 - v1)
    if err > tol:
        raise QuadratureError(f"Phi quadrature levels disagree by {err:.3e}", coarse=v1, fine=v2)
    return QuadResult(v2, err, n2)


@dataclass
class PsiResult:
    value: complex  # Richardson extrapolation in eps
    at_eps: complex
    at_half_eps: complex
    eps: float


def _sym_kernel_integrand(xi, gamma, kernel, pts):
    """(e(<xi,Q(x)>) - e(<xi,Q(-x)>)) K(x): the odd part, integrable at the origin."""
    return (e(_phase(xi, gamma, pts)) - e(_phase(xi, gamma, -pts))) * kernel(pts)


def _psi_eps(xi, body, N, gamma, kernel, eps, panels, order):
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.unique(np.concatenate([np.geomspace(eps, N, 24), np.linspace(eps, N, panels + 1)]))
    if body.k == 1:
        lo, hi = edges[:-1, None], edges[1:, None]
        r = (lo + (hi - lo) * (xg + 1) / 2).ravel()
        w = ((hi - lo) / 2 * wg).ravel()
        return complex(np.sum(w * _sym_kernel_integrand(xi, gamma, kernel, r[:, None])))
    if body.k == 2:
        # polar coordinates over the half circle [0, pi); the other half is the reflection
        breaks = [0, np.pi / 4, np.pi / 2, 3 * np.pi / 4, np.pi]
        angle_panels = max(4, panels // 8)
        phis, wphi = [], []
        for a, b in zip(breaks, breaks[1:]):
            sub = np.linspace(a, b, angle_panels // 4 + 2)
            for s0, s1 in zip(sub, sub[1:]):
                phis.append(s0 + (s1 - s0) * (xg + 1) / 2)
                wphi.append((s1 - s0) / 2 * wg)
        phis, wphi = np.concatenate(phis), np.concatenate(wphi)
        total = 0j
        for ph, wp in zip(phis, wphi):
            u = np.array([np.cos(ph), np.sin(ph)])
            R = N / np.abs(u).max() if body.kind == "cube" else N
            rr = eps + (edges - eps) * (R - eps) / (N - eps)
            lo, hi = rr[:-1, None], rr[1:, None]
            r = (lo + (hi - lo) * (xg + 1) / 2).ravel()
            w = ((hi - lo) / 2 * wg).ravel()
            total += wp * np.sum(w * r * _sym_kernel_integrand(xi, gamma, kernel, r[:, None] * u))
        return complex(total)
    raise DomainError("psi_pv supports k = 1 and k = 2")


def psi_pv(xi, body: ConvexBody, N: float, gamma: MultiIndexSet, kernel: CZKernel,
           eps: float = 1e-4, tol: float = 1e-8) -> PsiResult:
    """Psi_N(xi) with a symmetric eps-exclusion, extrapolated to eps -> 0.

    Needs an odd kernel: the integrand is folded onto half the body, which
    makes it bounded near the origin, and I(eps) ~ I(0) - c eps.
    """
    if not kernel.odd:
        raise DomainError("principal values are only evaluated for odd kernels")
    if body.kind not in ("cube", "ball"):
        raise DomainError("psi_pv needs a built-in symmetric body")
    xi = np.asarray(xi, float)
    omega = 2 * np.pi * float(np.sum(np.abs(xi) * float(N) ** gamma.sizes * gamma.sizes))
    panels = int(omega / 4) + 16
    vals = []
    for order in (16, 24):
        a = _psi_eps(xi, body, N, gamma, kernel, eps * N, panels, order)
        b = _psi_eps(xi, body, N, gamma, kernel, eps * N / 2, panels, order)
        vals.append((a, b, 2 * b - a))
    if abs(vals[0][2] - vals[1][2]) > tol * max(1.0, abs(vals[1][2])):
        raise QuadratureError("Psi quadrature orders disagree", coarse=vals[0][2], fine=vals[1][2])
    a, b, r = vals[1]
    return PsiResult(r, a, b, eps * N)


# ---------------------------------------------------------------- Gaussian sums


@dataclass(frozen=True)
class SumStructure:
    """Which axes are integers (first k') and which are units (last k''), and Gamma."""

    kprime: int
    kdoubleprime: int
    gamma: MultiIndexSet

    def __post_init__(self):
        if self.kprime + self.kdoubleprime != self.gamma.k:
            raise DomainError("k' + k'' must equal the number of variables of Gamma")


def _residue_points(q: int, s: SumStructure) -> np.ndarray:
    axes = [np.arange(1, q + 1, dtype=np.int64)] * s.kprime + [units(q)] * s.kdoubleprime
    size = math.prod(len(a) for a in axes)
    if size > GAUSS_DIRECT_CAP:
        raise SizeError(f"direct Gaussian sum needs {size} terms", size=size)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _images_mod(pts: np.ndarray, gamma: MultiIndexSet, q: int) -> np.ndarray:
    out = np.ones((len(pts), gamma.d), dtype=np.int64)
    base = pts % q
    for i, g in enumerate(gamma.gammas):
        for j, ex in enumerate(g):
            for _ in range(ex):
                out[:, i] = out[:, i] * base[:, j] % q
    return out


def _complete_sum(q: int, a, s: SumStructure) -> complex:
    """S(q, a) = sum over N_q^{k'} x A_q^{k''} of e(<a, Q>/q), unnormalized."""
    if q == 1:
        return 1.0 + 0j
    pts = _residue_points(q, s)
    res = _images_mod(pts, s.gamma, q) @ (np.asarray(a, np.int64) % q) % q
    counts = np.bincount(res, minlength=q)
    return complex(np.dot(counts, roots_of_unity(q)))


def _normalizer(q: int, s: SumStructure) -> float:
    return float(q) ** s.kprime * float(totient(q)) ** s.kdoubleprime


def _check_a(a, q, s):
    a = tuple(int(v) for v in a)
    if len(a) != s.gamma.d:
        raise DomainError(f"a has {len(a)} entries, Gamma has {s.gamma.d}")
    if math.gcd(q, *a) != 1:
        raise DomainError(f"a={a} is not in A_q for q={q}")
    return a


def gaussian_sum(a, q: int, structure: SumStructure, method: str = "auto") -> complex:
    """G(a/q), directly (method="direct") or through prime-power factors (method="factor").

    For q = q1 q2 coprime the complete sum splits as S(q1, a') S(q2, a'') with
    a'_g = a_g q2^{|g|-1} mod q1 and a''_g = a_g q1^{|g|-1} mod q2.
    """
    if q < 1:
        raise DomainError(f"q must be positive, got {q}")
    a = _check_a(a, q, structure)
    k = structure.gamma.k
    if method == "auto":
        method = "direct" if float(q) ** k <= GAUSS_DIRECT_CAP else "factor"
    if method == "direct":
        return _complete_sum(q, a, structure) / _normalizer(q, structure)
    if method != "factor":
        raise DomainError(f"unknown method {method!r}")
    sizes = structure.gamma.sizes
    total = 1.0 + 0j
    for p, j in factorize(q).items():
        pj = p**j
        m = q // pj
        ap = [int(ag) * pow(m, int(sg) - 1, pj) % pj for ag, sg in zip(a, sizes)]
        total *= _complete_sum(pj, ap, structure) / _normalizer(pj, structure)
    return total


def gauss_table(q: int, structure: SumStructure, cap: int = 10**7) -> np.ndarray:
    """G(a/q) for every a in {0..q-1}^d at once (index 0 stands for a_g = q).

    The complete sum is a d-dimensional DFT of the residue counts of Q,
    so one FFT of size q^d gives all numerators.
    """
    d = structure.gamma.d
    if float(q) ** d > cap:
        raise SizeError(f"table of size q^d = {q}^{d} exceeds cap {cap}", size=q**d)
    pts = _residue_points(q, structure)
    res = _images_mod(pts, structure.gamma, q)
    counts = np.zeros((q,) * d)
    np.add.at(counts, tuple(res.T), 1.0)
    return np.fft.ifftn(counts) * float(q) ** d / _normalizer(q, structure)


def admissible_mask(q: int, d: int) -> np.ndarray:
    """Boolean array over {0..q-1}^d marking a with gcd(q, a) = 1."""
    g = np.full((q,) * d, q, dtype=np.int64)
    for j in range(d):
        shape = [1] * d
        shape[j] = q
        g = np.gcd(g, np.arange(q, dtype=np.int64).reshape(shape))
    return g == 1


@dataclass
class GaussScanRow:
    q: int
    max_abs: float
    argmax: tuple


def gauss_scan(qmax: int, structure: SumStructure) -> list:
    """max over a in A_q of |G(a/q)| for q = 1..qmax."""
    rows = []
    d = structure.gamma.d
    for q in range(1, qmax + 1):
        tab = np.abs(gauss_table(q, structure))
        tab[~admissible_mask(q, d)] = -1.0
        flat = int(np.argmax(tab))
        idx = np.unravel_index(flat, tab.shape)
        rows.append(GaussScanRow(q, float(tab[idx]), tuple(int(i) or q for i in idx)))
    return rows


@dataclass
class DecayFit:
    """Bound max|G| <= C q^{-delta} read off the data.

    For each delta the smallest valid constant is C(delta) = max_q M(q) q^delta,
    increasing in delta. `delta` is the largest exponent whose constant stays
    within `C_cap`; the least-squares slope of log M on log q is kept for
    reference (it describes the mean trend, not a bound).
    """

    delta: float
    C: float
    C_cap: float
    ols_delta: float
    ols_C: float

    def constant_at(self, delta: float) -> float:
        return float(np.max(self._m * self._q**delta))


def fit_decay(rows, C_cap: float = 5.0) -> DecayFit:
    q = np.array([r.q for r in rows], float)
    m = np.array([r.max_abs for r in rows])

    def C_of(delta):
        return float(np.max(m * q**delta))

    big = q > 1
    ols = float(-np.polyfit(np.log(q[big]), np.log(m[big]), 1)[0])
    if C_of(0.0) > C_cap:
        delta = 0.0
    else:
        lo, hi = 0.0, 1.0
        while C_of(hi) <= C_cap and hi < 64:
            lo, hi = hi, 2 * hi
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if C_of(mid) <= C_cap else (lo, mid)
        delta = lo
    fit = DecayFit(delta, C_of(delta), C_cap, ols, C_of(ols))
    fit._q, fit._m = q, m
    return fit


# ---------------------------------------------------------------- major arcs


@dataclass
class MajorArcResult:
    error: float
    q: int
    L: float
    N: int
    discrete: complex
    model: complex
    flags: list = field(default_factory=list)


def major_arc_error(freq: RationalFrequency, N: int, structure: SumStructure, body: ConvexBody,
                    orbit: WeightedOrbit, kind: str = "average", L: float = 1.0, beta_prime: float = 2.0,
                    kernel: CZKernel | None = None, orbit2: WeightedOrbit | None = None) -> MajorArcResult:
    """Distance between a discrete multiplier and its circle-method model at a/q + theta.

    kind="average": |m_N(xi) - G(a/q) Phi_N(theta)| with Phi over the positive
    orthant part of B (the sums run over positive integers and primes).
    kind="singular": |(h_{N'} - h_N)(xi) - G(a/q)(Psi_{N'} - Psi_N)(theta)| where
    `orbit2` is the signed orbit at N' (default N' = 2N is the caller's choice).
    """
    gamma = structure.gamma
    theta = np.array(freq.theta)
    Lneed = float(np.max(np.abs(theta) * float(N) ** gamma.sizes)) if len(theta) else 0.0
    flags = []
    if Lneed > L:
        flags.append("theta outside the admissible box")
    if N > 1 and freq.q > math.log(N) ** beta_prime:
        flags.append("q above (log N)^beta' hypothesis")
    G = gaussian_sum(freq.a, freq.q, structure)
    if kind == "average":
        disc = complex(m_hat([freq], orbit)[0])
        model = G * phi_integral(theta, body, N, gamma, region="orthant").value
    elif kind == "singular":
        if kernel is None or orbit2 is None:
            raise DomainError("singular major-arc error needs a kernel and the orbit at N'")
        disc = complex(h_hat([freq], orbit2, kernel)[0] - h_hat([freq], orbit, kernel)[0])
        if np.any(theta):
            d_psi = psi_pv(theta, body, orbit2.N, gamma, kernel).value - psi_pv(theta, body, N, gamma, kernel).value
        else:
            d_psi = 0.0  # odd kernel on symmetric shells
        model = G * d_psi
    else:
        raise DomainError(f"unknown kind {kind!r}")
    return MajorArcResult(abs(disc - model), freq.q, Lneed, N, disc, model, flags)


# ---------------------------------------------------------------- envelopes


@dataclass
class EnvelopeReport:
    C_fit: float
    C_bound: float
    violations: int
    points: int
    decay_ratio_max: float  # max |Phi| / min(1, |N^A xi|^{-1/d})
    near_one_ratio_max: float  # max |Phi - 1| / min(1, |N^A xi|)

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.C_fit <= self.C_bound


def envelope_check(xis, N: float, body: ConvexBody, gamma: MultiIndexSet, C_bound: float = 10.0,
                   tol: float = 1e-10) -> EnvelopeReport:
    """Test |Phi_N| <= C min(1, |N^A xi|^{-1/d}) and |Phi_N - 1| <= C min(1, |N^A xi|)."""
    xs = _as_xi_matrix(xis, gamma.d)
    d = gamma.d
    r1, r2 = [], []
    for xi in xs:
        s = float(np.max(np.abs(gamma.scale(N, xi))))
        val = phi_integral(xi, body, N, gamma, tol=tol).value
        b1 = min(1.0, s ** (-1.0 / d)) if s > 0 else 1.0
        b2 = min(1.0, s)
        r1.append(abs(val) / b1)
        r2.append(abs(val - 1) / b2 if b2 > 0 else (0.0 if abs(val - 1) <= tol else math.inf))
    r1, r2 = np.array(r1), np.array(r2)
    C = float(max(r1.max(initial=0), r2.max(initial=0)))
    violations = int(np.sum((r1 > C_bound) | (r2 > C_bound)))
    return EnvelopeReport(C, C_bound, violations, len(xs), float(r1.max(initial=0)), float(r2.max(initial=0)))


def envelope_grid(n: int, gamma: MultiIndexSet, N: float, lo: float = 1e-3, hi: float = 30.0,
                  seed: int = 0) -> np.ndarray:
    """Random frequencies whose scaled size |N^A xi|_inf is log-uniform on [lo, hi]."""
    rng = np.random.default_rng(seed)
    dirs = rng.uniform(-1, 1, size=(n, gamma.d))
    dirs /= np.abs(dirs).max(axis=1, keepdims=True)
    size = np.exp(rng.uniform(math.log(lo), math.log(hi), size=(n, 1)))
    return dirs * size / float(N) ** gamma.sizes
