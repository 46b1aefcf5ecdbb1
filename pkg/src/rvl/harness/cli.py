"""
Command-line entry point `rvl`.

Exit status: 0 on success, 1 when a check fails, 2 on bad input
(config, domain or size errors). The sieve cache directory is taken from
the RVL_SIEVE_CACHE environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .. import __version__
from ..errors import ConfigError, RVLError
from ..lattice import ConvexBody, PolynomialMap, build_gamma, enumerate_orbit, lift_polynomial
from ..numtheory import sieve_primes
from ..operators import CZKernel, SparseFunction, TelescopingSetup, apply_average, apply_singular, telescoping_l1
from ..variation import IndexedSequence, oscillation, pad_to_dyadic, split_variation, vr, vr_dyadic_bound
from .acceptance import CHECKS, run_acceptance
from .config import ExperimentConfig, load_config, parse_config
from .experiments import _json_default, body_from_name, run_experiment, write_csv

BODIES = ["interval", "cube", "ball"]


def _common(p: argparse.ArgumentParser, out_default: str = "results") -> None:
    p.add_argument("--config", help="YAML experiment config; explicit flags override its params")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--out", default=None, help=f"output directory (default {out_default!r})")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default 1)")
    p.set_defaults(out_default=out_default)


def _body_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--body", choices=BODIES, default="interval")
    p.add_argument("--kprime", type=int, default=0, help="number of integer axes")
    p.add_argument("--kdoubleprime", type=int, default=1, help="number of prime axes")
    p.add_argument("--N", type=int, default=64, help="dilation scale")
    p.add_argument("--sieve-limit", type=int, default=None, help="sieve bound (default max(N, 2))")


def _poly_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--degree", type=int, default=2, help="degree of the canonical monomial map")
    p.add_argument("--poly", default=None,
                   help='polynomial map as JSON, one {"e1,...,ek": coeff} object per output component; '
                        'default is the canonical map')


def _tolerance(text: str):
    """A single number, or comma-separated name=value pairs."""
    if "=" not in text:
        return float(text)
    out = {}
    for item in text.split(","):
        name, _, val = item.partition("=")
        if name.strip() not in CHECKS:
            raise argparse.ArgumentTypeError(f"unknown check {name.strip()!r}")
        out[name.strip()] = float(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rvl", description="Prime-orbit averages, multipliers and variation toolkit.")
    ap.add_argument("--version", action="version", version=f"rvl {__version__}")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("sieve", help="sieve primes (cached under RVL_SIEVE_CACHE)")
    p.add_argument("--limit", type=int, required=True)
    p.add_argument("--out", default=None, help="optional CSV path for the primes")

    p = sub.add_parser("orbit", help="enumerate a weighted orbit")
    _body_flags(p)
    _poly_flags(p)
    p.add_argument("--signed", action="store_true")
    _common(p, "orbit")

    for verb in ("apply-average", "apply-singular"):
        p = sub.add_parser(verb, help=f"{verb.split('-')[1]} operator on a sparse function")
        _body_flags(p)
        _poly_flags(p)
        p.add_argument("--input", help="sparse function CSV (coordinates..., re, im); default delta at 0")
        p.add_argument("--random", type=int, default=None, help="use a random sparse function of this size")
        if verb == "apply-average":
            p.add_argument("--unweighted", action="store_true", help="plain average instead of log-weighted")
        _common(p, verb)

    p = sub.add_parser("multiplier-sweep", help="sample discrete and continuous multipliers")
    _body_flags(p)
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--kinds", nargs="+", default=None,
                   choices=["discrete-average", "discrete-singular", "continuous-average", "continuous-singular"])
    _common(p, "multiplier-sweep")

    p = sub.add_parser("gauss-scan", help="max |G(a/q)| over q and the decay fit")
    p.add_argument("--qmax", type=int, default=None)
    p.add_argument("--kprime", type=int, default=None)
    p.add_argument("--kdoubleprime", type=int, default=None)
    p.add_argument("--degree", type=int, default=None)
    _common(p, "gauss-scan")

    p = sub.add_parser("weyl-scan", help="regularity ratios of progression-restricted Weyl sums")
    p.add_argument("--axes", choices=["integers", "primes"], default=None)
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--N", type=int, nargs="+", default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--Q", type=int, default=None)
    _common(p, "weyl-scan")

    p = sub.add_parser("variation", help="variation seminorms of a sequence read from CSV")
    p.add_argument("input", help="CSV with one column (real) or two columns (re, im); header optional")
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--mode", choices=["vr", "dyadic", "oscillation", "split"], default="vr")

    p = sub.add_parser("iw-build", help="denominator set P_n, set sizes and disjointness table")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--beta", type=int, default=None)
    p.add_argument("--s-max", type=int, default=None)
    p.add_argument("--m-max", type=int, default=None)
    _common(p, "iw-build")

    p = sub.add_parser("xi-eval", help="evaluate the partition function at random frequencies")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--beta", type=int, default=None)
    p.add_argument("--points", type=int, default=None)
    _common(p, "xi-eval")

    p = sub.add_parser("telescoping", help="l1 telescoping sum, direct and closed form")
    p.add_argument("--kind", choices=["average", "singular"], default="average")
    p.add_argument("--body", choices=BODIES, default="interval")
    p.add_argument("--N1", type=int, required=True)
    p.add_argument("--N2", type=int, required=True)
    p.add_argument("--out", default=None, help="optional CSV of per-point values")

    p = sub.add_parser("run", help="run any experiment from a YAML config")
    _common(p, "results")

    p = sub.add_parser("acceptance", help="run the acceptance checks")
    p.add_argument("names", nargs="*", default=["all"], help=f"'all' or any of: {', '.join(CHECKS)}")
    p.add_argument("--tolerance", type=_tolerance, default=None,
                   help="override tolerance: one number for all selected checks, or name=value,...")
    p.add_argument("--refit", action="store_true", help="recompute and rewrite the frozen constants")
    p.add_argument("--out", default=None, help="path of the JSON verdict")
    return ap


# ---------------------------------------------------------------- helpers


def _primes(args, N: int):
    return sieve_primes(args.sieve_limit or max(N, 2))


def _body(args) -> ConvexBody:
    return body_from_name(args.body, args.kprime + args.kdoubleprime)


def _lift(args, k: int):
    if args.poly is None:
        gamma = build_gamma(k, args.degree)
        return gamma, np.eye(gamma.d, dtype=np.int64)
    rows = json.loads(args.poly)
    rows = [{tuple(int(e) for e in key.split(",")): c for key, c in row.items()} for row in rows]
    return lift_polynomial(PolynomialMap.from_rows(k, rows))


def _dump(obj) -> None:
    print(json.dumps(obj, indent=2, default=_json_default))


def _config_run(args, experiment: str, params: dict) -> int:
    """Merge flags into the config (if any) and run the experiment."""
    if args.config:
        cfg = load_config(args.config)
        if cfg.experiment != experiment:
            raise ConfigError(f"config key 'experiment': {cfg.experiment!r} does not match verb ({experiment!r})")
        data = {"experiment": experiment, "seed": cfg.seed, "out": cfg.out, "threads": cfg.threads,
                "sieve": {"limit": cfg.sieve_limit}, "params": {**cfg.params}, "tolerance": cfg.tolerance}
    else:
        data = {"experiment": experiment, "out": args.out_default}
    data["params"] = {**data.get("params", {}), **{k: v for k, v in params.items() if v is not None}}
    for key in ("seed", "out", "threads"):
        if getattr(args, key, None) is not None:
            data[key] = getattr(args, key)
    return _report(run_experiment(parse_config(data)))


def _report(report) -> int:
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: value={c.value} bound={c.bound}")
    for a in report.artifacts:
        print(f"wrote {a}")
    return 0 if report.passed else 1


def _read_sequence(path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        parts = [x.strip() for x in line.split(",") if x.strip()]
        if not parts:
            continue
        try:
            vals = [float(x) for x in parts]
        except ValueError:
            if rows:
                raise ConfigError(f"{path}: non-numeric row {line!r}") from None
            continue  # header
        rows.append(vals[0] + 1j * vals[1] if len(vals) > 1 else vals[0])
    if not rows:
        raise ConfigError(f"{path}: no values")
    return np.asarray(rows, dtype=complex)


# ---------------------------------------------------------------- verbs


def cmd_sieve(args) -> int:
    P = sieve_primes(args.limit)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(args.out, P.primes, fmt="%d", header="p", comments="")
    _dump({"limit": args.limit, "count": P.count(args.limit), "theta": P.theta(args.limit)})
    return 0


def cmd_orbit(args) -> int:
    body = _body(args)
    gamma, _ = _lift(args, body.k)
    orbit = enumerate_orbit(body, args.N, args.kprime, args.kdoubleprime, _primes(args, args.N),
                            signed=args.signed, gamma=gamma, punctured=args.signed, threads=args.threads)
    out = Path(args.out or args.out_default)
    out.mkdir(parents=True, exist_ok=True)
    orbit.save(out / "orbit.npz")
    orbit.to_csv(out / "orbit.csv")
    _dump({"points": len(orbit), "total_weight": orbit.total_weight, "files": [str(out / "orbit.npz"),
                                                                                str(out / "orbit.csv")]})
    return 0


def cmd_apply(args) -> int:
    body = _body(args)
    gamma, L = _lift(args, body.k)
    d0 = np.asarray(L).shape[0]
    singular = args.verb == "apply-singular"
    if args.input:
        f = SparseFunction.from_csv(args.input)
    elif args.random:
        f = SparseFunction.random(np.random.default_rng(args.seed or 0), d0, args.random)
    else:
        f = SparseFunction.delta(d0)
    orbit = enumerate_orbit(body, args.N, args.kprime, args.kdoubleprime, _primes(args, args.N), signed=singular,
                            gamma=gamma, punctured=singular, threads=args.threads)
    if singular:
        g = apply_singular(f, CZKernel.builtin(body.k), orbit, L)
    else:
        g = apply_average(f, orbit, L, weighted=not args.unweighted)
    out = Path(args.out or args.out_default)
    out.mkdir(parents=True, exist_ok=True)
    g.to_csv(out / "result.csv")
    _dump({"support": len(g), "l1": g.norm(1), "l2": g.norm(2), "file": str(out / "result.csv")})
    return 0


def cmd_multiplier_sweep(args) -> int:
    return _config_run(args, "multiplier-sweep", {"body": args.body, "kprime": args.kprime,
                                                  "kdoubleprime": args.kdoubleprime, "N": args.N,
                                                  "degree": args.degree, "points": args.points,
                                                  "kinds": args.kinds})


def cmd_gauss_scan(args) -> int:
    return _config_run(args, "gauss-decay", {"qmax": args.qmax, "kprime": args.kprime,
                                             "kdoubleprime": args.kdoubleprime, "degree": args.degree})


def cmd_weyl_scan(args) -> int:
    return _config_run(args, "weyl-scan", {"axes": args.axes, "degree": args.degree, "N": args.N,
                                           "trials": args.trials, "Q": args.Q})


def cmd_iw_build(args) -> int:
    return _config_run(args, "iw-build", {"n": args.n, "beta": args.beta, "s_max": args.s_max,
                                          "m_max": args.m_max})


def cmd_xi_eval(args) -> int:
    return _config_run(args, "xi-eval", {"n": args.n, "s": args.s, "beta": args.beta, "points": args.points})


def cmd_variation(args) -> int:
    a = _read_sequence(args.input)
    out = {"length": len(a), "r": args.r, "mode": args.mode}
    if args.mode == "vr":
        out["vr"] = vr(a, args.r)
    elif args.mode == "dyadic":
        lhs, rhs = vr_dyadic_bound(pad_to_dyadic(a), args.r)
        out.update(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs * (1 + 1e-12)))
    elif args.mode == "oscillation":
        lac = [m for m in (2**j for j in range(64)) if m <= len(a)]
        out.update(lacunary=lac, oscillation=oscillation(IndexedSequence(np.arange(1, len(a) + 1), a), lac))
    else:
        sp = split_variation(IndexedSequence(np.arange(1, len(a) + 1), a), args.rho, args.r)
        out.update(rho=args.rho, long=sp.long, short=sp.short, total=sp.total, holds=sp.holds)
    _dump(out)
    return 0


def cmd_telescoping(args) -> int:
    if args.body == "interval":
        body, kp, kpp = ConvexBody.interval(), 0, 1
    else:
        body, kp, kpp = body_from_name(args.body, 2), 1, 1
    setup = TelescopingSetup(body, kp, kpp, sieve_primes(max(args.N2, 2)),
                             CZKernel.builtin(body.k) if args.kind == "singular" else None)
    res = telescoping_l1(args.kind, args.N1, args.N2, setup)
    if args.out:
        header = [f"x{j}" for j in range(body.k)] + ["direct", "closed"]
        write_csv(Path(args.out), header, [(*map(int, p), d, c) for p, d, c in
                                           zip(res.points, res.pointwise_direct, res.pointwise_closed)])
    _dump({"kind": args.kind, "body": args.body, "N1": args.N1, "N2": args.N2, "lhs": res.lhs,
           "rhs_unit": res.rhs_unit, "max_pointwise_error": res.max_pointwise_error})
    return 0


def cmd_run(args) -> int:
    if not args.config:
        raise ConfigError("config key 'experiment': `run` needs --config")
    cfg: ExperimentConfig = load_config(args.config)
    for key in ("seed", "out", "threads"):
        if getattr(args, key, None) is not None:
            setattr(cfg, key, getattr(args, key))
    return _report(run_experiment(cfg))


def cmd_acceptance(args) -> int:
    verdict = run_acceptance(args.names, args.tolerance, args.refit, echo=print)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(verdict, indent=2, default=_json_default) + "\n")
    print(json.dumps({"passed": verdict["passed"],
                      "failed": [c["name"] for c in verdict["checks"] if not c["passed"]]}))
    return 0 if verdict["passed"] else 1


VERBS = {
    "sieve": cmd_sieve, "orbit": cmd_orbit, "apply-average": cmd_apply, "apply-singular": cmd_apply,
    "multiplier-sweep": cmd_multiplier_sweep, "gauss-scan": cmd_gauss_scan, "weyl-scan": cmd_weyl_scan,
    "variation": cmd_variation, "iw-build": cmd_iw_build, "xi-eval": cmd_xi_eval, "telescoping": cmd_telescoping,
    "run": cmd_run, "acceptance": cmd_acceptance,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return VERBS[args.verb](args)
    except (RVLError, KeyError, json.JSONDecodeError, yaml.YAMLError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"rvl {args.verb}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
