"""Experiment configuration files (TOML).

Example::

    seeds = [0, 1]
    reference = true

    [manifold]
    kind = "hyperbolic"
    dim = 2

    [objective]
    kind = "frechet"
    random = { n = 8, radius = 2.0, seed = 3 }
    x0_radius = 1.5

    [[solver]]
    algorithm = "proximal_gradient"
    eta = 0.5
    T = 200

Unknown keys are rejected.  Errors carry the line number and dotted field
path.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geometry import ManifoldPoint
from .manifolds import WARPS, EuclideanSpace, HyperbolicSpace, SpdManifold, WarpedProduct
from .objectives import (
    frechet_mean_objective,
    philox,
    squared_distance_objective,
    stochastic_frechet,
)
from .solvers import L0_MODES, SCHEDULES, STEP_RULES, InnerConfig, SolverConfig

ALGORITHMS = ("proximal_gradient", "stochastic_proximal_gradient", "rgd")

TOP_KEYS = {"seeds", "output", "reference", "manifold", "objective", "solver", "bench"}
MANIFOLD_KEYS = {
    "euclidean": {"kind", "dim"},
    "hyperbolic": {"kind", "dim", "curvature"},
    "spd": {"kind", "n"},
    "warped": {"kind", "phi", "interval", "min_steps", "max_step", "shoot_tol"},
}
OBJECTIVE_KINDS = ("sqdist", "frechet", "stochastic_frechet")
OBJECTIVE_KEYS = {"kind", "anchor", "anchors", "random", "weights", "x0", "x0_radius", "sigma_samples"}
RANDOM_KEYS = {"n", "radius", "seed"}
SOLVER_KEYS = {"algorithm", "label", "schedule", "eta", "T", "L", "kappa_lb", "early_stop_grad", "inner"}
INNER_KEYS = {"grad_tol", "max_inner_iters", "step_rule", "L0", "l0_mode"}
BENCH_KEYS = {"eps"}


class ConfigError(ValueError):
    """Invalid experiment configuration, with location."""

    def __init__(self, message, path="", line=None):
        self.path = path
        self.line = line
        loc = f"line {line}: " if line else ""
        where = f"{path}: " if path else ""
        super().__init__(f"{loc}{where}{message}")


@dataclass
class SolverSpec:
    algorithm: str
    label: str
    config: SolverConfig
    kappa_lb: Optional[float] = None


@dataclass
class ExperimentConfig:
    manifold: dict
    objective: dict
    solvers: list
    seeds: list = field(default_factory=lambda: [0])
    output: Optional[str] = None
    reference: bool = True
    bench_eps: float = 1e-8
    source: str = ""


def _line_of(text, section, key):
    """Best-effort line number of ``key`` inside TOML table ``section``."""
    lines = text.splitlines()
    current = ""
    header = re.compile(r"^\s*\[\[?\s*([^\]]+?)\s*\]\]?\s*$")
    keyre = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    inline = re.compile(r"\b" + re.escape(key) + r"\s*=")
    first = None
    for i, ln in enumerate(lines, 1):
        m = header.match(ln)
        if m:
            current = m.group(1)
            if current == (section + "." + key if section else key):
                return i
            continue
        if keyre.match(ln) and current == section:
            return i
        if first is None and inline.search(ln):
            first = i
    return first


class _Ctx:
    def __init__(self, text):
        self.text = text

    def fail(self, message, section, key=None):
        path = ".".join(p for p in (section, key) if p)
        line = _line_of(self.text, section, key) if key else _line_of(self.text, "", section.split(".")[-1])
        raise ConfigError(message, path, line)

    def check_keys(self, table, allowed, section):
        for k in table:
            if k not in allowed:
                self.fail(f"unknown key (allowed: {', '.join(sorted(allowed))})", section, k)

    def number(self, table, key, section, default=None, positive=False, integer=False, minimum=None):
        if key not in table:
            if default is None:
                return None
            return default
        v = table[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"expected a number, got {v!r}", section, key)
        if integer and not isinstance(v, int):
            self.fail(f"expected an integer, got {v!r}", section, key)
        if not math.isfinite(v):
            self.fail("must be finite", section, key)
        if positive and not v > 0:
            self.fail(f"must be positive, got {v}", section, key)
        if minimum is not None and v < minimum:
            self.fail(f"must be >= {minimum}, got {v}", section, key)
        return v

    def choice(self, table, key, options, section, default=None):
        v = table.get(key, default)
        if v is None:
            self.fail("missing required key", section, key)
        if v not in options:
            self.fail(f"must be one of {', '.join(options)}, got {v!r}", section, key)
        return v


def parse_config(text, source="<string>") -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", source, int(m.group(1)) if m else None) from None
    ctx = _Ctx(text)
    ctx.check_keys(data, TOP_KEYS, "")
    for key in ("manifold", "objective", "solver"):
        if key not in data:
            raise ConfigError("missing required section", key)

    man = data["manifold"]
    if not isinstance(man, dict):
        ctx.fail("must be a table", "manifold")
    kind = ctx.choice(man, "kind", tuple(MANIFOLD_KEYS), "manifold")
    ctx.check_keys(man, MANIFOLD_KEYS[kind], "manifold")
    if kind in ("euclidean", "hyperbolic"):
        ctx.number(man, "dim", "manifold", default=2, positive=True, integer=True)
    if kind == "hyperbolic":
        c = ctx.number(man, "curvature", "manifold", default=-1.0)
        if not c < 0:
            ctx.fail("curvature must be negative", "manifold", "curvature")
    if kind == "spd":
        ctx.number(man, "n", "manifold", default=2, positive=True, integer=True)
    if kind == "warped":
        ctx.choice(man, "phi", tuple(WARPS), "manifold", default="exp_r2")
        if "interval" in man:
            iv = man["interval"]
            if not (isinstance(iv, list) and len(iv) == 2 and all(isinstance(a, (int, float)) for a in iv)
                    and iv[0] < iv[1]):
                ctx.fail("interval must be [lo, hi] with lo < hi", "manifold", "interval")
        ctx.number(man, "min_steps", "manifold", positive=True, integer=True)
        ctx.number(man, "max_step", "manifold", positive=True)
        ctx.number(man, "shoot_tol", "manifold", positive=True)

    obj = data["objective"]
    if not isinstance(obj, dict):
        ctx.fail("must be a table", "objective")
    okind = ctx.choice(obj, "kind", OBJECTIVE_KINDS, "objective")
    ctx.check_keys(obj, OBJECTIVE_KEYS, "objective")
    if okind == "sqdist":
        if "anchor" not in obj:
            ctx.fail("sqdist needs an anchor", "objective", "kind")
    else:
        if ("anchors" in obj) == ("random" in obj):
            ctx.fail("give exactly one of anchors or random", "objective", "kind")
        if "random" in obj:
            r = obj["random"]
            if not isinstance(r, dict):
                ctx.fail("must be a table", "objective", "random")
            ctx.check_keys(r, RANDOM_KEYS, "objective.random")
            n = ctx.number(r, "n", "objective.random", positive=True, integer=True)
            if n is None:
                ctx.fail("missing required key", "objective.random", "n")
            ctx.number(r, "radius", "objective.random", positive=True)
            ctx.number(r, "seed", "objective.random", integer=True, minimum=0)
            if okind == "stochastic_frechet" and n < 2:
                ctx.fail("stochastic_frechet needs at least 2 anchors", "objective.random", "n")
    if "x0" in obj and "x0_radius" in obj:
        ctx.fail("give at most one of x0 and x0_radius", "objective", "x0")
    ctx.number(obj, "x0_radius", "objective", positive=True)

    solvers_raw = data["solver"]
    if isinstance(solvers_raw, dict):
        solvers_raw = [solvers_raw]
    solvers = []
    labels = set()
    for i, s in enumerate(solvers_raw):
        sec = "solver"
        ctx.check_keys(s, SOLVER_KEYS, sec)
        alg = ctx.choice(s, "algorithm", ALGORITHMS, sec)
        if alg == "stochastic_proximal_gradient" and okind != "stochastic_frechet":
            ctx.fail("stochastic solver needs a stochastic_frechet objective", sec, "algorithm")
        if alg != "stochastic_proximal_gradient" and okind == "stochastic_frechet":
            pass  # deterministic solvers run on the mean objective
        schedule = ctx.choice(s, "schedule", SCHEDULES, sec, default="constant")
        if alg == "rgd" and schedule != "constant":
            ctx.fail("rgd supports only the constant schedule", sec, "schedule")
        eta = ctx.number(s, "eta", sec, default=1.0, positive=True)
        T = ctx.number(s, "T", sec, default=100, integer=True, minimum=1)
        L = ctx.number(s, "L", sec, positive=True)
        kappa = ctx.number(s, "kappa_lb", sec)
        if kappa is not None and kappa > 0:
            ctx.fail("kappa_lb must be <= 0", sec, "kappa_lb")
        early = ctx.number(s, "early_stop_grad", sec, positive=True)
        inner_raw = s.get("inner", {})
        if not isinstance(inner_raw, dict):
            ctx.fail("must be a table", sec, "inner")
        ctx.check_keys(inner_raw, INNER_KEYS, "solver.inner")
        inner = InnerConfig(
            grad_tol=ctx.number(inner_raw, "grad_tol", "solver.inner", default=1e-9, positive=True),
            max_inner_iters=ctx.number(inner_raw, "max_inner_iters", "solver.inner", default=10_000,
                                       integer=True, minimum=0),
            step_rule=ctx.choice(inner_raw, "step_rule", STEP_RULES, "solver.inner", default="backtracking"),
            L0=ctx.number(inner_raw, "L0", "solver.inner", positive=True),
            l0_mode=ctx.choice(inner_raw, "l0_mode", L0_MODES, "solver.inner", default="lipschitz"),
        )
        cfg = SolverConfig(step_schedule=schedule, eta=float(eta), max_outer_iters=int(T), inner=inner,
                           L=L, early_stop_grad=early)
        label = s.get("label", alg if alg not in labels else f"{alg}_{i}")
        if not isinstance(label, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", label):
            ctx.fail("label must be a simple file-name token", sec, "label")
        if label in labels:
            ctx.fail(f"duplicate solver label {label!r}", sec, "label")
        labels.add(label)
        solvers.append(SolverSpec(alg, label, cfg, kappa))

    seeds = data.get("seeds", [0])
    if not (isinstance(seeds, list) and seeds and all(isinstance(v, int) and not isinstance(v, bool) and v >= 0
                                                     for v in seeds)):
        ctx.fail("seeds must be a non-empty list of nonnegative integers", "seeds")
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        ctx.fail("output must be a path string", "output")
    reference = data.get("reference", True)
    if not isinstance(reference, bool):
        ctx.fail("reference must be true or false", "reference")
    bench = data.get("bench", {})
    ctx.check_keys(bench, BENCH_KEYS, "bench")
    eps = ctx.number(bench, "eps", "bench", default=1e-8, positive=True)
    return ExperimentConfig(man, obj, solvers, seeds, output, reference, float(eps), source)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ConfigError("config is not valid UTF-8", str(path)) from None
    return parse_config(text, str(path))


def build_manifold(spec):
    kind = spec["kind"]
    if kind == "euclidean":
        return EuclideanSpace(spec.get("dim", 2))
    if kind == "hyperbolic":
        return HyperbolicSpace(spec.get("dim", 2), spec.get("curvature", -1.0))
    if kind == "spd":
        return SpdManifold(spec.get("n", 2))
    kw = {k: spec[k] for k in ("min_steps", "max_step", "shoot_tol") if k in spec}
    interval = tuple(spec["interval"]) if "interval" in spec else None
    return WarpedProduct(spec.get("phi", "exp_r2"), interval=interval, **kw)


def _point(m, coords, path):
    try:
        return m.point(coords)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid point: {exc}", path) from None


def build_anchors(m, spec):
    if "anchors" in spec:
        return [_point(m, a, "objective.anchors") for a in spec["anchors"]]
    r = spec["random"]
    rng = philox(r.get("seed", 0), 0)
    o = m.origin()
    return [ManifoldPoint(m.exp(o, m.random_tangent(rng, o, r.get("radius", 1.0))), m) for _ in range(r["n"])]


def build_objective(m, spec, seed=0):
    """Objective (or stochastic objective) described by ``spec``."""
    kind = spec["kind"]
    if kind == "sqdist":
        return squared_distance_objective(_point(m, spec["anchor"], "objective.anchor"))
    anchors = build_anchors(m, spec)
    if kind == "frechet":
        return frechet_mean_objective(anchors, spec.get("weights"))
    return stochastic_frechet(anchors, seed)


def build_start(m, spec, seed):
    """Initial point: explicit ``x0`` or a seeded random point within ``x0_radius``."""
    if "x0" in spec:
        return _point(m, spec["x0"], "objective.x0")
    rng = philox(seed, 11)
    o = m.origin()
    return ManifoldPoint(m.exp(o, m.random_tangent(rng, o, spec.get("x0_radius", 1.0))), m)


def as_array(p):
    return np.asarray(p.coords if isinstance(p, ManifoldPoint) else p, float)
