"""
The acceptance suite: fifteen named checks, one per exit criterion.

Each check measures a value, compares it with its bound, and also has to
finish inside its runtime budget. Fitted constants are frozen in
reference.json next to this file; `refit=True` recomputes and rewrites
them instead of comparing against them.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..iw import build_Pn, disjointness_check, lower_inclusion_scan
from ..lattice import ConvexBody, PolynomialMap, build_gamma, counting, enumerate_orbit, lift_polynomial
from ..multipliers import (SumStructure, envelope_check, envelope_grid, fit_decay, gauss_scan, gaussian_sum,
                           m_hat, phi_integral)
from ..numtheory import factorize, ramanujan_average, ramanujan_closed_form, sieve_primes
from ..operators import CZKernel, SparseFunction, TelescopingSetup, apply_average, compare_weighted_unweighted, \
    telescoping_l1
from ..variation import IndexedSequence, concatenation_bound, oscillation, vr, vr_bruteforce, vr_dyadic_bound
from .experiments import _body_axes, environment_stamp, major_arc_table, minor_arc_table, strictly_decreasing, \
    theta_table

REFERENCE_PATH = Path(__file__).with_name("reference.json")
TELESCOPING_FIT_SEED = 2024


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    value: float
    bound: float
    tolerance: float
    elapsed: float
    budget: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} [{self.criterion:2d}] {self.name:<20s} value={self.value:.6g} bound={self.bound:.6g} "
                f"tol={self.tolerance:g} time={self.elapsed:.1f}s/{self.budget:g}s")


@dataclass
class Context:
    tol: float
    reference: dict
    refit: bool
    fitted: dict = field(default_factory=dict)


@dataclass
class Check:
    criterion: int
    name: str
    fn: Callable
    tol: float
    budget: float  # seconds


CHECKS: dict[str, Check] = {}


def check(criterion: int, name: str, tol: float, budget: float):
    def deco(fn):
        CHECKS[name] = Check(criterion, name, fn, tol, budget)
        return fn
    return deco


def _frozen(ctx: Context, key: str, value: float, rel: float = 1e-6, abs_floor: float = 1e-12) -> bool:
    """Record `value` on a refit, otherwise compare it with the frozen one."""
    if ctx.refit:
        ctx.fitted[key] = value
        return True
    if key not in ctx.reference:
        raise KeyError(f"no frozen reference for {key!r}; run the suite with --refit")
    ref = ctx.reference[key]
    return abs(value - ref) <= max(rel * abs(ref), abs_floor)


def _ref(ctx: Context, key: str, value: float) -> float:
    if ctx.refit:
        ctx.fitted[key] = value
        return value
    if key not in ctx.reference:
        raise KeyError(f"no frozen reference for {key!r}; run the suite with --refit")
    return ctx.reference[key]


def _rel(a, b) -> float:
    return abs(a - b) / max(abs(b), 1e-300) if a != b else 0.0


# ---------------------------------------------------------------- variation


@check(1, "vr-oracle", 1e-12, 5)
def _vr_oracle(ctx):
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 13))
        a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        for r in (2.0, 2.5, 3.0, 10.0):
            worst = max(worst, _rel(vr(a, r), vr_bruteforce(a, r)))
    return worst, ctx.tol, worst < ctx.tol, {}


@check(2, "dyadic-bound", 1e-12, 10)
def _dyadic(ctx):
    rng = np.random.default_rng(1)
    worst, bad = 0.0, 0
    for i in range(1000):
        a = rng.standard_normal(65) + 1j * rng.standard_normal(65)
        if i % 2:
            a = np.cumsum(a)
        for r in (2.0, 3.0):
            lhs, rhs = vr_dyadic_bound(a, r)
            worst = max(worst, lhs / rhs)
            bad += lhs > rhs * (1 + ctx.tol)
    return worst, 1.0, bad == 0, {"violations": int(bad)}


@check(3, "variation-algebra", 1e-12, 30)
def _algebra(ctx):
    rng = np.random.default_rng(2)
    slack = 1 + ctx.tol
    viol = dict.fromkeys(["sup", "concatenation", "monotone", "minkowski", "holder"], 0)
    for i in range(1000):
        n = int(rng.integers(2, 40))
        a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        if i % 2:
            a = np.cumsum(a)
        r = float(rng.choice([1.0, 1.5, 2.0, 2.5, 3.0, 10.0]))
        r2 = max(2.0, r)
        v = vr(a, r)
        viol["sup"] += np.abs(a).max() > (v + np.abs(a).min()) * slack
        K = int(rng.integers(1, min(n - 1, 6) + 1))
        cuts = [0, *sorted(rng.choice(np.arange(1, n - 1), size=K - 1, replace=False).tolist()), n - 1] \
            if K > 1 else [0, n - 1]
        lhs, rhs = concatenation_bound(a, cuts, r)
        viol["concatenation"] += lhs > rhs * slack
        rr = r + float(rng.uniform(0, 5))
        viol["monotone"] += vr(a, rr) > v * slack
        viol["minkowski"] += v > 2 * np.sum(np.abs(a) ** r) ** (1 / r) * slack
        lac = sorted({0, *rng.choice(np.arange(1, n), size=min(n - 1, 4), replace=False).tolist()})
        seq = IndexedSequence(np.arange(n), a)
        J = len(lac) - 1
        viol["holder"] += oscillation(seq, lac) > J ** (0.5 - 1 / r2) * vr(a, r2) * slack
    total = sum(viol.values())
    return total, 0, total == 0, {k: int(v) for k, v in viol.items()}


# ---------------------------------------------------------------- arithmetic


@check(4, "ramanujan", 1e-12, 30)
def _ramanujan(ctx):
    worst = 0.0
    for q in range(1, 501):
        for a in range(1, q + 1):
            worst = max(worst, abs(ramanujan_average(a, q) - ramanujan_closed_form(a, q)))
    return worst, ctx.tol, worst < ctx.tol, {}


def _random_admissible(rng, q: int, d: int) -> tuple:
    while True:
        a = tuple(int(x) for x in rng.integers(1, q + 1, size=d))
        if math.gcd(q, *a) == 1:
            return a


@check(5, "gauss-crt", 1e-10, 60)
def _gauss_crt(ctx):
    rng = np.random.default_rng(3)
    structures = [SumStructure(0, 1, build_gamma(1, 2)), SumStructure(1, 1, build_gamma(2, 2))]
    worst, count = 0.0, 0
    for q in range(4, 101):
        f = factorize(q)
        if len(f) == 1 and next(iter(f.values())) == 1:
            continue  # prime
        for s in structures:
            for _ in range(20):
                a = _random_admissible(rng, q, s.gamma.d)
                worst = max(worst, abs(gaussian_sum(a, q, s, "direct") - gaussian_sum(a, q, s, "factor")))
                count += 1
    return worst, ctx.tol, worst < ctx.tol, {"comparisons": count}


@check(6, "gauss-decay", 1e-6, 300)
def _gauss_decay(ctx):
    rows = gauss_scan(200, SumStructure(0, 1, build_gamma(1, 2)))
    fit = fit_decay(rows, C_cap=5.0)
    same = _frozen(ctx, "gauss-decay.delta", fit.delta, ctx.tol) & _frozen(ctx, "gauss-decay.C", fit.C, ctx.tol)
    ok = fit.delta >= 0.2 and fit.C <= 5.0 and same
    return fit.delta, 0.2, ok, {"C": fit.C, "ols_delta": fit.ols_delta, "ols_C": fit.ols_C,
                                "C_at_0.2": fit.constant_at(0.2), "matches_frozen": same}


@check(7, "theta-asymptotic", 3.0, 120)
def _theta(ctx):
    P = sieve_primes(10**5)
    detail, ok, worst = {}, True, 0.0
    for name in ("interval", "cube", "ball"):
        rows = theta_table(name, range(8, 15), P)
        errs = [r[5] for r in rows]
        N = rows[-1][1]
        bound = ctx.tol / math.log(N)
        good = errs[-1] < bound and strictly_decreasing(errs[-5:])
        ok &= good
        worst = max(worst, errs[-1] * math.log(N))
        detail[name] = {"errors": errs, "final_bound": bound, "ok": good}
    return worst, ctx.tol, ok, detail


# ---------------------------------------------------------------- multipliers


FRACTIONS = [(0, 1), (1, 2), (1, 3)]


@check(8, "major-arc", 0.05, 180)
def _major_arc(ctx):
    P = sieve_primes(2**13)
    rows = major_arc_table(FRACTIONS, range(6, 13), ["average"], P)
    ok, detail, worst = True, {}, 0.0
    for a, q in FRACTIONS:
        errs = [r[4] for r in rows if (r[1], r[2]) == (a, q)]
        dec = strictly_decreasing(errs)
        frozen = _frozen(ctx, f"major-arc.{a}/{q}", errs[-1])
        good = dec and errs[-1] < ctx.tol and frozen
        ok &= good
        worst = max(worst, errs[-1])
        detail[f"{a}/{q}"] = {"errors": errs, "decreasing": dec, "matches_frozen": frozen, "ok": good}
    return worst, ctx.tol, ok, detail


@check(9, "singular-arc", 1e-6, 180)
def _singular_arc(ctx):
    P = sieve_primes(2**12)
    rows = major_arc_table(FRACTIONS, range(6, 12), ["singular"], P)
    ok, detail, worst = True, {}, 0.0
    for a, q in FRACTIONS:
        errs = [r[4] for r in rows if (r[1], r[2]) == (a, q)]
        dec = strictly_decreasing(errs)
        frozen = _frozen(ctx, f"singular-arc.{a}/{q}", errs[-1], ctx.tol)
        ok &= dec and frozen
        worst = max(worst, errs[-1])
        detail[f"{a}/{q}"] = {"errors": errs, "decreasing": dec, "matches_frozen": frozen}
    return worst, 0.0, ok, detail


TELESCOPING_SETUPS = [("average", "interval"), ("singular", "interval"), ("average", "cube"), ("singular", "ball")]


def telescoping_runs(seed: int, n: int, P) -> list:
    """(kind, body, N1, N2, result, sampled point index) for n random setups."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        kind, name = TELESCOPING_SETUPS[i % len(TELESCOPING_SETUPS)]
        B, kp, kpp = _body_axes(name)
        N1 = int(rng.integers(2, 40))
        N2 = int(rng.integers(N1 + 1, 2 * N1 + 1))
        setup = TelescopingSetup(B, kp, kpp, P, CZKernel.builtin(B.k) if kind == "singular" else None)
        res = telescoping_l1(kind, N1, N2, setup)
        idx = int(rng.integers(0, len(res.points))) if len(res.points) else -1
        out.append((kind, name, N1, N2, res, idx))
    return out


@check(10, "telescoping", 1e-12, 60)
def _telescoping(ctx):
    P = sieve_primes(1000)
    if ctx.refit:
        fit = telescoping_runs(TELESCOPING_FIT_SEED, 200, P)
        for kind in ("average", "singular"):
            ctx.fitted[f"telescoping.C_{kind}"] = max(r.lhs / r.rhs_unit for k, _, _, _, r, _ in fit
                                                      if k == kind and r.rhs_unit > 0)
    runs = telescoping_runs(0, 50, P)
    C = {k: (ctx.fitted if ctx.refit else ctx.reference)[f"telescoping.C_{k}"] for k in ("average", "singular")}
    point_err, all_err, bound_viol = 0.0, 0.0, 0
    for kind, name, N1, N2, res, idx in runs:
        if idx >= 0:
            point_err = max(point_err, abs(res.pointwise_direct[idx] - res.pointwise_closed[idx]))
        all_err = max(all_err, res.max_pointwise_error)
        bound_viol += res.lhs > C[kind] * res.rhs_unit * (1 + 1e-12) + 1e-15
    ok = point_err < ctx.tol and all_err < ctx.tol and bound_viol == 0
    return all_err, ctx.tol, ok, {"sampled_point_error": point_err, "bound_violations": bound_viol, "C": C}


@check(11, "fourier-consistency", 1e-10, 60)
def _fourier(ctx):
    P = sieve_primes(1000)
    gamma, L = lift_polynomial(PolynomialMap(1, 2, {(0, (1,)): 1, (0, (2,)): 1, (1, (2,)): 3}))
    orbit = enumerate_orbit(ConvexBody.interval(), 64, 0, 1, P, gamma=gamma)
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(10):
        f = SparseFunction.random(rng, 2, 20)
        g = apply_average(f, orbit, L)
        xis = rng.uniform(0, 1, size=(100, 2))
        lhs = g.fourier(xis)
        rhs = m_hat(xis @ np.asarray(L, float), orbit) * f.fourier(xis)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst, ctx.tol, worst < ctx.tol, {}


@check(12, "vdc-envelope", 1e-10, 120)
def _vdc(ctx):
    N = 64
    cases = {"k1": (build_gamma(1, 2), ConvexBody.interval()), "k2": (build_gamma(2, 1), ConvexBody.cube(2))}
    ok, detail, worst = True, {}, 0.0
    for key, (gamma, body) in cases.items():
        rep = envelope_check(envelope_grid(10_000, gamma, N, seed=5), N, body, gamma, C_bound=10.0)
        frozen = _frozen(ctx, f"vdc-envelope.C_{key}", rep.C_fit)
        ok &= rep.ok and frozen
        worst = max(worst, rep.C_fit)
        detail[key] = {"C_fit": rep.C_fit, "violations": rep.violations, "matches_frozen": frozen}
    g1 = build_gamma(1, 1)
    rng = np.random.default_rng(6)
    closed = 0.0
    for xi in rng.uniform(-0.2, 0.2, 200):
        val = phi_integral([xi], ConvexBody.interval(), N, g1, exact_inner=False).value
        t = 2 * math.pi * xi * N
        closed = max(closed, abs(val - math.sin(t) / t))
    detail["closed_form_error"] = closed
    ok &= closed < ctx.tol
    return worst, 10.0, ok, detail


@check(13, "weighted-unweighted", 1e-9, 120)
def _weighted(ctx):
    P = sieve_primes(2**13)
    gamma, L = lift_polynomial(PolynomialMap(1, 1, {(0, (1,)): 1}))
    rng = np.random.default_rng(7)
    fs = [SparseFunction.delta(1), SparseFunction.random(rng, 1, 10), SparseFunction.random(rng, 1, 30, 100)]
    Ns = [2**j for j in range(6, 14)]
    tables = [compare_weighted_unweighted(f, gamma, L, ConvexBody.interval(), Ns, primes=P) for f in fs]
    fitted = max(t.C_fit for t in tables)
    C = _ref(ctx, "weighted-unweighted.C_fit", fitted)
    worst = max(r.scaled for t in tables for r in t.rows if not r.skipped)
    ok = worst <= C * (1 + ctx.tol)
    return worst, C, ok, {"C_fit": fitted, "stable": [t.stable for t in tables],
                          "scaled": [[r.scaled for r in t.rows] for t in tables]}


# ---------------------------------------------------------------- IW and minor arcs


@check(14, "iw-construction", 0.0, 60)
def _iw(ctx):
    from ..variation import ScaleLadder

    sets_ok = all(build_Pn(1, b).qs == [1] for b in (1, 2, 3))
    sets_ok &= build_Pn(2, 1).qs == [2**j for j in range(22)]
    low = lower_inclusion_scan(10**4, range(1, 14))
    gamma = build_gamma(1, 1)
    ladder = ScaleLadder(0.5, gamma.d)
    failures = []
    for beta in (1, 2):
        for s in range(4):
            for m in range(s + 1, 11):
                r = disjointness_check(s, m, beta, ladder, gamma)
                if not r.ok:
                    failures.append({"s": s, "m": m, "beta": beta, "method": r.method, "witness": r.witness})
    ok = sets_ok and not low and not failures
    return len(failures), 0, ok, {"sets_ok": sets_ok, "lower_inclusion_failures": len(low),
                                  "disjointness_failures": failures[:4], "disjointness_failure_count": len(failures)}


@check(15, "minor-arc-trend", 0.9, 300)
def _minor_arc(ctx):
    P = sieve_primes(2**13)
    rows = minor_arc_table(10, [10, 13], 2.0, 0, P)
    lo = {r[0]: r[4] for r in rows if r[3] == 2**10}
    hi = {r[0]: r[4] for r in rows if r[3] == 2**13}
    dec = sum(hi[i] < lo[i] for i in lo)
    need = math.ceil(ctx.tol * len(lo) - 1e-9)
    return dec, need, dec >= need, {"normalized_2^10": [lo[i] for i in sorted(lo)],
                                    "normalized_2^13": [hi[i] for i in sorted(hi)]}


# ---------------------------------------------------------------- driver


def load_reference(path=None) -> dict:
    path = Path(path or REFERENCE_PATH)
    return json.loads(path.read_text())["constants"] if path.exists() else {}


def run_acceptance(names=None, tolerance=None, refit: bool = False, reference_path=None, echo=None) -> dict:
    """Run the selected checks (all by default).

    `tolerance` is a number applied to every selected check or a mapping
    name -> number. Returns the JSON verdict; on refit the frozen constants
    are rewritten.
    """
    names = list(CHECKS) if not names or names == ["all"] else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown check(s) {unknown}; known: {', '.join(CHECKS)}")
    reference = load_reference(reference_path)
    fitted = {}
    results = []
    for name in sorted(names, key=lambda n: CHECKS[n].criterion):
        c = CHECKS[name]
        tol = c.tol
        if isinstance(tolerance, dict):
            tol = tolerance.get(name, tol)
        elif tolerance is not None:
            tol = float(tolerance)
        ctx = Context(tol, reference, refit)
        t0 = time.perf_counter()
        try:
            value, bound, ok, detail = c.fn(ctx)
        except KeyError as exc:
            value, bound, ok, detail = math.nan, math.nan, False, {"error": str(exc)}
        elapsed = time.perf_counter() - t0
        within = elapsed <= c.budget
        detail["within_budget"] = within
        res = CheckResult(c.criterion, name, bool(ok) and within, float(value), float(bound), tol, elapsed,
                          c.budget, detail)
        results.append(res)
        fitted.update(ctx.fitted)
        if echo:
            echo(res.line())
    if refit:
        merged = {**reference, **fitted}
        path = Path(reference_path or REFERENCE_PATH)
        path.write_text(json.dumps({"environment": environment_stamp(), "constants": merged}, indent=2,
                                   sort_keys=True) + "\n")
    return {"passed": all(r.passed for r in results), "environment": environment_stamp(),
            "checks": [asdict(r) for r in results]}
