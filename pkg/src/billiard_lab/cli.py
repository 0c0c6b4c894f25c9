"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import BilliardState, PHI_MIN, iterate, map_jacobian, twist_check
from .errors import BilliardError, ConfigError, NumericalError
from .fitting import ExpansionFit, fit_expansion, plot_rows, ratio_consistency, relative_spread
from .geometry import TWO_PI, build_domain, domain_to_spec, integrate_boundary
from .invariants import (
    compute_invariants,
    gauss_bonnet,
    verify_completed_square,
    verify_ibp_identity,
    verify_log_curvature_bound,
)
from .orbits import OrbitCache, SolverOptions, solve_orbit
from .spectrum import CausticEstimate, beta_table, caustic_estimates, default_threads

log = logging.getLogger("billiard_lab")

EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 1, 2, 3


def _num(x) -> str:
    return repr(float(x))


def _q_range(text: str):
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if lo > hi:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad q range {text!r}; use A..B or A,B,C") from exc


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_num(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _summary(msg: str, args):
    # keep stdout clean when it carries the payload
    stream = sys.stderr if not getattr(args, "out", None) else sys.stdout
    print(msg, file=stream)


def _cache(args, domain):
    if not getattr(args, "cache_dir", None):
        return None
    return OrbitCache(Path(args.cache_dir) / f"{domain.digest}.json")


def _opts(args) -> SolverOptions:
    return SolverOptions(tol=getattr(args, "tol", None),
                         restarts=getattr(args, "restarts", 4))


def cmd_domain(args):
    dom = build_domain(args.domain)
    info = {
        "type": dom.label,
        "perimeter": dom.perimeter,
        "mode_count": dom.mode_count,
        "nodes": dom.node_count,
        "digest": dom.digest,
        "min_rho": float(dom.node_rho.min()),
        "max_rho": float(dom.node_rho.max()),
        "spec": domain_to_spec(dom),
    }
    _emit(_json_text(info), args.out)
    _summary(f"domain {dom.label}: perimeter {dom.perimeter:.12g}, {dom.mode_count} modes", args)
    return 0


def cmd_map(args):
    dom = build_domain(args.domain)
    start = BilliardState.at(dom, args.s, args.phi)
    traj = iterate(dom, start, args.steps, phi_min=args.phi_min)
    rows = []
    sign = 1 if args.steps >= 0 else -1
    for i, st in enumerate(traj):
        k = sign * i
        theta = float(dom.theta_of_s(st.lift_s))
        x, y = dom.point(theta)
        rows.append((k, st.s, st.phi, float(x), float(y)))
    _emit(_csv_text(["k", "s", "phi", "x", "y"], rows), args.out)
    _summary(f"map: {abs(args.steps)} bounces from s={args.s}, phi={args.phi}", args)
    return 0


def cmd_orbit(args):
    dom = build_domain(args.domain)
    orbit = solve_orbit(dom, args.p, args.q, _opts(args))
    _emit(_json_text(orbit.to_json()), args.out)
    _summary(f"orbit {args.p}/{args.q}: length {orbit.length:.15g}, residual {orbit.residual:.2e}", args)
    return 0


def cmd_beta(args):
    dom = build_domain(args.domain)
    cache = _cache(args, dom)
    pairs = [(args.p, q) for q in args.q if math.gcd(args.p, q) == 1 and q > args.p]
    samples = beta_table(dom, pairs, _opts(args), cache, args.threads)
    if cache:
        cache.save()
    rows = [(b.p, b.q, b.p / b.q, b.mls, b.beta) for b in samples]
    _emit(_csv_text(["p", "q", "omega", "mls", "beta"], rows), args.out)
    _summary(f"beta: {len(rows)} samples", args)
    return 0


def cmd_caustics(args):
    dom = build_domain(args.domain)
    cache = _cache(args, dom)
    est = caustic_estimates(dom, args.q, p=args.p, stencil=args.stencil, opts=_opts(args),
                            cache=cache, threads=args.threads)
    if cache:
        cache.save()
    rows = [(e.q, e.omega_mid, e.gamma_length, e.lazutkin_Q, e.err_bar) for e in est]
    _emit(_csv_text(["q", "omega", "gamma_length", "Q", "err_bar"], rows), args.out)
    _summary(f"caustics: {len(rows)} estimates", args)
    return 0


def invariants_report(dom) -> dict:
    inv = compute_invariants(dom)
    _, _, ibp_gap = verify_ibp_identity(dom)
    csq = verify_completed_square(dom)
    chain = verify_log_curvature_bound(dom)
    out = inv.to_json()
    out["checks"] = {
        "gauss_bonnet": gauss_bonnet(dom),
        "ibp_gap": ibp_gap,
        "csq_gap": max(c.gap for c in csq),
        "csq_nonnegative": all(c.nonnegative for c in csq),
        "lemma41": {"checks": chain.checks(), "slack": chain.slack()},
    }
    return out


def cmd_invariants(args):
    dom = build_domain(args.domain)
    report = invariants_report(dom)
    _emit(_json_text(report), args.out)
    _summary("invariants: " + ", ".join(f"I{k}={report[f'I{k}']:.10g}" for k in range(5)), args)
    return 0


def read_caustics_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"q", "omega", "gamma_length", "Q", "err_bar"}
        if not reader.fieldnames or not need <= set(reader.fieldnames):
            raise ConfigError(f"{path}: expected columns {sorted(need)}")
        return [CausticEstimate(int(r["q"]), float(r["omega"]), float(r["gamma_length"]),
                                float(r["Q"]), float(r["err_bar"]), 0) for r in reader]


def cmd_fit(args):
    est = read_caustics_csv(args.input)
    if args.perimeter is not None:
        ell = args.perimeter
    elif args.domain:
        ell = build_domain(args.domain).perimeter
    else:
        raise ConfigError("fit needs --domain or --perimeter")
    fit = fit_expansion(est, ell, args.K, weighted=not args.unweighted)
    _emit(_json_text(fit.to_json()), args.out)
    if args.plot:
        Path(args.plot).write_text(_csv_text(["u", "y", "y_fit"], plot_rows(fit, est)))
    _summary(f"fit K={fit.order}: c={list(fit.coefficients)}, cond {fit.condition_number:.3g}", args)
    return 0


def cmd_ratios(args):
    if len(args.fit) != len(args.invariants):
        raise ConfigError("--fit and --invariants need the same number of files")
    names = args.names or [Path(f).stem for f in args.fit]
    if len(names) != len(args.fit):
        raise ConfigError("--names must match the number of fits")
    fits, invs = {}, {}
    for name, fpath, ipath in zip(names, args.fit, args.invariants):
        fits[name] = ExpansionFit.from_json(json.loads(Path(fpath).read_text()))
        blob = json.loads(Path(ipath).read_text())
        invs[name] = [blob[f"I{k}"] for k in range(5)]
    entries = ratio_consistency(fits, invs, args.k)
    rows = [(e.domain, e.k, e.c_k, e.I_k, "" if e.ratio is None else e.ratio, e.status)
            for e in entries]
    _emit(_csv_text(["domain", "k", "c_k", "I_k", "ratio", "status"], rows), args.out)
    _summary(f"ratios k={args.k}: relative spread {relative_spread(entries):.3g}", args)
    return 0


def run_checks(dom, samples=10_000, seed=0):
    """Identity and inequality suite; returns ``[(name, ok, detail), ...]``."""
    checks = []
    gb = gauss_bonnet(dom)
    checks.append(("gauss_bonnet", abs(gb - TWO_PI) <= 1e-9 * TWO_PI, f"{gb!r}"))
    per = integrate_boundary(dom, lambda j: np.ones_like(j[0]))
    checks.append(("perimeter", abs(per - dom.perimeter) <= 1e-10 * dom.perimeter, f"{per!r}"))
    lhs, rhs, gap = verify_ibp_identity(dom)
    checks.append(("ibp_identity", gap < 1e-8, f"gap {gap:.2e}"))
    for c in verify_completed_square(dom):
        checks.append((f"completed_square[B={c.b:.6f}]", c.gap < 1e-7 and c.nonnegative,
                       f"gap {c.gap:.2e}"))
    chain = verify_log_curvature_bound(dom)
    for name, ok in chain.checks().items():
        checks.append((f"log_curvature.{name}", ok, f"slack {chain.slack()[name]:.4g}"))
    tmin, used = twist_check(dom, samples, seed=seed)
    checks.append(("twist", tmin > 0, f"min {tmin:.3e} over {used} chords"))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(8):
        st = BilliardState.at(dom, rng.uniform(0, dom.perimeter), rng.uniform(0.2, math.pi - 0.2))
        worst = max(worst, abs(np.linalg.det(map_jacobian(dom, st)) - 1.0))
    checks.append(("symplectic", worst < 1e-6, f"max |det-1| {worst:.2e}"))
    return checks


def cmd_verify(args):
    dom = build_domain(args.domain)
    checks = run_checks(dom, args.samples)
    failed = 0
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
        failed += not ok
    print(f"verify: {len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="billiard-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solver=False):
        p.add_argument("--domain", required=p.prog.split()[-1] not in ("fit", "ratios"),
                       help="domain spec JSON file")
        p.add_argument("--out", help="output path (default stdout)")
        if solver:
            p.add_argument("--tol", type=float, default=None)
            p.add_argument("--restarts", type=int, default=4)
            p.add_argument("--threads", type=int, default=default_threads())
            p.add_argument("--cache-dir", help="directory for the on-disk orbit cache")
        return p

    p = common(sub.add_parser("domain", help="validate a domain spec"))
    p.set_defaults(func=cmd_domain)

    p = common(sub.add_parser("map", help="iterate the billiard map"))
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--phi-min", type=float, default=PHI_MIN)
    p.set_defaults(func=cmd_map)

    p = common(sub.add_parser("orbit", help="solve one maximal periodic orbit"), solver=True)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--q", type=int, required=True)
    p.set_defaults(func=cmd_orbit)

    p = common(sub.add_parser("beta", help="tabulate beta(p/q)"), solver=True)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--q", type=_q_range, required=True)
    p.set_defaults(func=cmd_beta)

    p = common(sub.add_parser("caustics", help="caustic length / Lazutkin parameter table"),
               solver=True)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--q", type=_q_range, required=True)
    p.add_argument("--stencil", type=int, default=5)
    p.set_defaults(func=cmd_caustics)

    p = common(sub.add_parser("invariants", help="I0..I4 and identity checks"))
    p.set_defaults(func=cmd_invariants)

    p = common(sub.add_parser("fit", help="fit the caustic-length expansion"))
    p.add_argument("--input", required=True, help="caustics CSV")
    p.add_argument("--perimeter", type=float)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--unweighted", action="store_true")
    p.add_argument("--plot", help="write (u, y, y_fit) CSV here")
    p.set_defaults(func=cmd_fit)

    p = common(sub.add_parser("ratios", help="c_k / I_k across domains"))
    p.add_argument("--fit", nargs="+", required=True)
    p.add_argument("--invariants", nargs="+", required=True)
    p.add_argument("--names", nargs="+")
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_ratios)

    p = common(sub.add_parser("verify", help="run the identity/inequality suite"))
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_verify)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (BilliardError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run())
