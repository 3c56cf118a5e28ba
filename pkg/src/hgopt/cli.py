"""Command-line front end: ``hgopt run | verify | bench``.

Exit codes: 0 all checks pass, 1 invariant or certificate violation,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import ConfigError, as_array, build_manifold, build_objective, build_start, load_config
from .geometry import ContractViolation, GeometryError, NumericalFailure
from .manifolds import EuclideanSpace, HyperbolicSpace, SpdManifold, WarpedProduct
from .objectives import StochasticObjective, philox
from .oracles import reference_minimize
from .solvers import format_field, proximal_gradient, rgd_baseline, stochastic_proximal_gradient
from .suites import DEFAULT_SEED, SUITES, run_suite

log = logging.getLogger("hgopt")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
SUMMARY_COLUMNS = (
    "label", "algorithm", "seed", "status", "iters", "final_f", "final_gap", "d0",
    "L", "rate_ratio", "rate_check", "monotone_check", "inner_iters_total", "kappa_lb", "zeta_max", "message",
)
MONOTONE_TOL = 1e-9
RATE_TOL = 1e-3


@dataclass
class CellResult:
    label: str
    algorithm: str
    seed: int
    status: str
    csv_path: str = ""
    summary: dict = field(default_factory=dict)
    gaps: list = field(default_factory=list)
    inner: list = field(default_factory=list)

    @property
    def exit_code(self):
        return {"ok": EXIT_OK, "violation": EXIT_VIOLATION, "config_error": EXIT_CONFIG}.get(
            self.status, EXIT_NUMERICAL)


def curvature_lower_bound(m, points, margin=0.5):
    """Lower curvature bound for RGD: exact where constant, sampled on the warped product."""
    if isinstance(m, EuclideanSpace):
        return 0.0
    if isinstance(m, HyperbolicSpace):
        return float(m.curvature)
    if isinstance(m, SpdManifold):
        return -0.5
    if isinstance(m, WarpedProduct):
        r = np.array([as_array(p)[0] for p in points])
        lo, hi = m.interval
        a = max(float(r.min()) - margin, lo)
        b = min(float(r.max()) + margin, hi)
        return m.sectional_curvature_bound((a, b))
    raise TypeError(f"no curvature bound for {m!r}")


def estimate_smoothness(f, x0, xstar, seed):
    """Sampled L over the ball around ``x*`` (or ``x0``) holding ``x0`` and the anchors."""
    m = f.manifold
    c = as_array(xstar if xstar is not None else x0)
    pts = np.vstack([as_array(x0)[None], f.anchors])
    radius = float(np.max(m.dist(np.broadcast_to(c, pts.shape), pts)))
    return f.local_smoothness(c, max(radius, 1e-3), philox(seed, 5))


def _run_cell(cfg, spec, seed, out_dir):
    """One (seed, solver) cell; never raises on numerical trouble."""
    res = CellResult(spec.label, spec.algorithm, seed, "ok")
    row = {"label": spec.label, "algorithm": spec.algorithm, "seed": seed}
    try:
        m = build_manifold(cfg.manifold)
        obj = build_objective(m, cfg.objective, seed)
        f = obj.mean if isinstance(obj, StochasticObjective) else obj
        x0 = build_start(m, cfg.objective, seed)
        fstar = xstar = None
        if f.minimizer is not None:
            xstar, fstar = f.minimizer, f.fstar()
        elif cfg.reference:
            ref = reference_minimize(f, x0)
            xstar, fstar = ref.point, ref.value
        scfg = replace(spec.config, seed=seed)
        if scfg.L is None and scfg.step_schedule != "constant":
            scfg = replace(scfg, L=f.L or estimate_smoothness(f, x0, xstar, seed))
            row["L"] = scfg.L
        if spec.algorithm == "proximal_gradient":
            trace = proximal_gradient(f, x0, scfg, fstar, xstar)
        elif spec.algorithm == "stochastic_proximal_gradient":
            trace = stochastic_proximal_gradient(obj, x0, scfg, fstar, xstar)
        else:
            pts = [x0] + list(f.anchors) + ([xstar] if xstar is not None else [])
            kappa = spec.kappa_lb if spec.kappa_lb is not None else curvature_lower_bound(m, pts)
            eta = scfg.eta
            trace = rgd_baseline(f, x0, eta, scfg.max_outer_iters, kappa, fstar, xstar)
            row["kappa_lb"] = kappa
            row["zeta_max"] = trace.meta.get("zeta_max")
    except ContractViolation as exc:
        res.status = "config_error"
        row.update(status=res.status, message=str(exc))
        res.summary = row
        return res
    except GeometryError as exc:
        res.status = "numerical_failure"
        row.update(status=res.status, message=f"{type(exc).__name__}: {exc}")
        res.summary = row
        return res
    except FloatingPointError as exc:
        res.status = "numerical_failure"
        row.update(status=res.status, message=str(exc))
        res.summary = row
        return res

    path = Path(out_dir) / f"{spec.label}_seed{seed}.csv"
    trace.to_csv(path)
    res.csv_path = str(path)
    fv = np.r_[trace.meta["f0"], trace.column("f")]
    gaps = trace.column("gap")
    res.gaps = gaps.tolist()
    res.inner = trace.column("inner_iters").tolist()
    row.update(iters=len(trace), final_f=fv[-1], inner_iters_total=int(np.nansum(trace.column("inner_iters"))))
    if fstar is not None:
        row["final_gap"] = gaps[-1]
    if "d0" in trace.meta:
        row["d0"] = trace.meta["d0"]
    if not np.all(np.isfinite(fv)):
        res.status = "numerical_failure"
        row["message"] = "non-finite objective value"
    deterministic = spec.algorithm != "stochastic_proximal_gradient"
    if deterministic and spec.algorithm == "proximal_gradient":
        mono = bool(np.all(np.diff(fv) <= MONOTONE_TOL))
        row["monotone_check"] = "pass" if mono else "fail"
        if not mono:
            res.status = "violation"
        if scfg.step_schedule == "constant" and fstar is not None and trace.meta.get("d0", 0) > 0:
            ratio = float(np.max(trace.rate_product())) / trace.meta["d0"] ** 2
            row["rate_ratio"] = ratio
            ok = ratio <= 1.0 + RATE_TOL
            row["rate_check"] = "pass" if ok else "fail"
            if not ok:
                res.status = "violation"
    row["status"] = res.status
    res.summary = row
    return res


def _cells(cfg, seeds):
    return [(spec, s) for s in seeds for spec in cfg.solvers]


def execute(cfg, out_dir, seeds, jobs=1):
    """Run every cell; returns results in (seed, solver) order."""
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = _cells(cfg, seeds)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_run_cell, cfg, spec, s, out_dir) for spec, s in cells]
            results = [f.result() for f in futs]
    else:
        results = [_run_cell(cfg, spec, s, out_dir) for spec, s in cells]
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in results:
            w.writerow([_summary_field(r.summary.get(c)) for c in SUMMARY_COLUMNS])
    return results


def _summary_field(v):
    if isinstance(v, str):
        return v
    return format_field(v)


def _exit_of(results):
    codes = {r.exit_code for r in results}
    if EXIT_CONFIG in codes:
        return EXIT_CONFIG
    if EXIT_NUMERICAL in codes:
        return EXIT_NUMERICAL
    return EXIT_VIOLATION if EXIT_VIOLATION in codes else EXIT_OK


def _out_dir(args, cfg):
    d = args.out or cfg.output or os.environ.get("HGOPT_OUT")
    if not d:
        raise ConfigError("no output directory: pass --out, set output in the config or HGOPT_OUT")
    return Path(d)


def _seeds(args, cfg):
    return [args.seed] if args.seed is not None else list(cfg.seeds)


def cmd_run(args):
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    results = execute(cfg, out, _seeds(args, cfg), args.jobs)
    for r in results:
        s = r.summary
        gap = s.get("final_gap")
        gap_s = "n/a" if gap is None else f"{gap:.3e}"
        extra = f"  rate ratio {s['rate_ratio']:.4f}" if "rate_ratio" in s else ""
        msg = f"  {s['message']}" if s.get("message") else ""
        print(f"{r.status:<18} {r.label:<24} seed {r.seed:<6} final gap {gap_s}{extra}{msg}")
    print(f"wrote {out / 'summary.csv'}")
    return _exit_of(results)


def iters_to(gaps, eps):
    for i, g in enumerate(gaps, 1):
        if g is not None and math.isfinite(g) and g <= eps:
            return i
    return None


def cmd_bench(args):
    cfg = load_config(args.config)
    if len(cfg.solvers) < 2:
        raise ConfigError("bench needs at least two [[solver]] entries", "solver")
    out = _out_dir(args, cfg)
    results = execute(cfg, out, _seeds(args, cfg), args.jobs)
    warped = cfg.manifold["kind"] == "warped"
    header = f"{'method':<30} {'seed':>6} {'final gap':>11} {'iters<=eps':>10} {'inner cost':>10}  curvature factor"
    print(f"eps = {cfg.bench_eps:g}")
    print(header)
    print("-" * len(header))
    for r in results:
        s = r.summary
        if r.status == "numerical_failure":
            print(f"{r.label:<30} {r.seed:>6}  numerical failure: {s.get('message', '')}")
            continue
        gap = s.get("final_gap")
        k = iters_to(r.gaps, cfg.bench_eps)
        if r.algorithm == "rgd":
            z = s.get("zeta_max")
            zs = "n/a" if z is None else f"{z:.6g}"
            tag = "sampled " if warped else ""
            curv = f"zeta={zs} ({tag}kappa_lb={s['kappa_lb']:.6g})"
        else:
            curv = "not required"
        print(f"{r.label:<30} {r.seed:>6} {'n/a' if gap is None else format(gap, '.3e'):>11} "
              f"{'-' if k is None else k:>10} {s.get('inner_iters_total', 0):>10}  {curv}")
    print(f"wrote {out / 'summary.csv'}")
    return _exit_of(results)


def cmd_verify(args):
    names = args.suites or list(SUITES)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    rows = []
    ok = True
    for name in names:
        report = run_suite(name, seed, args.n)
        for c in report.checks:
            print(c.line())
            rows.append(c)
        worst = min(report.checks, key=lambda c: c.slack)
        print(f"== {name}: {'pass' if report.passed else 'FAIL'}; worst slack {worst.slack:.3e} "
              f"({worst.manifold}, {worst.name})")
        ok &= report.passed
    out = args.out or os.environ.get("HGOPT_OUT")
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        with open(Path(out) / "verify.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("suite", "check", "manifold", "worst_slack", "count", "passed"))
            for c in rows:
                w.writerow((c.suite, c.name, c.manifold, format_field(c.slack), c.count, int(c.passed)))
    return EXIT_OK if ok else EXIT_VIOLATION


def build_parser():
    p = argparse.ArgumentParser(prog="hgopt", description="Proximal methods on Hadamard manifolds.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required):
        sp.add_argument("--config", required=config_required, metavar="PATH", help="TOML experiment file")
        sp.add_argument("--out", metavar="DIR", help="output directory (fallback: $HGOPT_OUT)")
        sp.add_argument("--seed", type=int, metavar="N", help="override the config seeds")
        sp.add_argument("--jobs", type=int, default=1, metavar="K", help="parallel cells")

    common(sub.add_parser("run", help="run an experiment grid"), True)
    common(sub.add_parser("bench", help="compare two or more solvers"), True)
    v = sub.add_parser("verify", help="run randomized property suites")
    v.add_argument("suites", nargs="*", metavar="SUITE",
                   help=f"any of {', '.join(SUITES)} (default: all)")
    v.add_argument("--suite", action="append", dest="suite_opt", choices=SUITES, help="same as positional")
    v.add_argument("-n", type=int, help="samples per manifold")
    v.add_argument("--seed", type=int, metavar="N")
    v.add_argument("--out", metavar="DIR", help="also write verify.csv here")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "verify":
        args.suites = list(dict.fromkeys((args.suites or []) + (args.suite_opt or [])))
        bad = [s for s in args.suites if s not in SUITES]
        if bad:
            print(f"error: unknown suite {bad[0]!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
            return EXIT_CONFIG
    handler = {"run": cmd_run, "bench": cmd_bench, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
