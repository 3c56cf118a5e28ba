"""Proximal solvers on Hadamard manifolds.

* :func:`inner_gd` -- Riemannian gradient descent for strongly convex
  subproblems (backtracking or fixed ``1/L0`` step).
* :func:`prox_step` -- inexact proximal map, warm-started at ``x``.
* :func:`proximal_gradient` -- implicit outer iteration ``x_t = Exp_{x_{t+1}}(eta grad f(x_{t+1}))``.
* :func:`stochastic_proximal_gradient` -- same with one sampled component per step.
* :func:`rgd_baseline` -- explicit RGD, recording the curvature factor ``zeta``.

Solvers run on raw coordinates internally and accept :class:`ManifoldPoint`
inputs at the public boundary.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (
    ContractViolation,
    DomainExitError,
    ManifoldPoint,
    NumericalFailure,
)
from .objectives import FrechetObjective, Objective, StochasticObjective, philox
from .quasilinear import quasi_inner_raw

COLUMNS = ("iter", "f", "gap", "grad_norm", "dist_to_opt", "inner_iters", "eta", "wall_ms")
SCHEDULES = ("constant", "inv_sqrt", "inv_sqrt_log")
STEP_RULES = ("backtracking", "fixed")
L0_MODES = ("lipschitz", "grad_bound")
MAX_HALVINGS = 60
_EPS = np.finfo(float).eps


class InnerIterationWarning(RuntimeWarning):
    """Inner solver stopped on its iteration budget."""


@dataclass
class InnerConfig:
    """Inner gradient-descent settings.

    Attributes
    ----------
    grad_tol : float
        Target gradient norm.  Outer loops tighten it to ``min(grad_tol, tol_c / t^2)``.
    step_rule : str
        ``"backtracking"`` (sufficient decrease, halving) or ``"fixed"`` (step ``1/L0``).
    L0 : float, optional
        Constant for the fixed rule; estimated on the initial sublevel set if omitted.
    l0_mode : str
        How a missing ``L0`` is estimated: ``"lipschitz"`` (sampled gradient
        Lipschitz constant) or ``"grad_bound"`` (max gradient norm).
    """

    grad_tol: float = 1e-9
    max_inner_iters: int = 10_000
    step_rule: str = "backtracking"
    L0: Optional[float] = None
    l0_mode: str = "lipschitz"
    tol_c: float = 0.1

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ContractViolation(f"grad_tol must be positive, got {self.grad_tol}")
        if self.max_inner_iters < 0:
            raise ContractViolation("max_inner_iters must be nonnegative")
        if self.step_rule not in STEP_RULES:
            raise ContractViolation(f"step_rule must be one of {STEP_RULES}")
        if self.l0_mode not in L0_MODES:
            raise ContractViolation(f"l0_mode must be one of {L0_MODES}")
        if self.L0 is not None and not self.L0 > 0:
            raise ContractViolation("L0 must be positive")

    def tol_at(self, t):
        if t is None:
            return self.grad_tol
        return min(self.grad_tol, self.tol_c / float(t) ** 2)


@dataclass
class SolverConfig:
    """Outer-loop settings.

    ``eta`` is the constant step for ``"constant"`` and the numerator ``c`` of
    ``c / (2 L sqrt(t))`` for ``"inv_sqrt"``.  ``"inv_sqrt_log"`` uses
    ``1 / (sqrt(s) log s)`` with ``s = t + 1`` so the first step is finite.
    """

    step_schedule: str = "constant"
    eta: float = 1.0
    max_outer_iters: int = 100
    inner: InnerConfig = field(default_factory=InnerConfig)
    seed: int = 0
    record_trace: bool = True
    L: Optional[float] = None
    early_stop_grad: Optional[float] = None
    record_wall: bool = False

    def __post_init__(self):
        if self.step_schedule not in SCHEDULES:
            raise ContractViolation(f"step_schedule must be one of {SCHEDULES}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ContractViolation(f"eta must be positive and finite, got {self.eta}")
        if self.max_outer_iters < 1:
            raise ContractViolation("max_outer_iters must be at least 1")
        if self.step_schedule == "inv_sqrt" and self.L is not None and not self.L > 0:
            raise ContractViolation("L must be positive")

    def eta_at(self, t):
        if self.step_schedule == "constant":
            return self.eta
        if self.step_schedule == "inv_sqrt":
            if self.L is None:
                raise ContractViolation("the inv_sqrt schedule needs L")
            return self.eta / (2.0 * self.L * math.sqrt(t))
        s = t + 1.0
        return 1.0 / (math.sqrt(s) * math.log(s))


@dataclass
class InnerResult:
    point: object
    iterations: int
    converged: bool
    grad_norm: float
    values: Optional[list] = None
    step: float = float("nan")


@dataclass
class RunTrace:
    """Per-iteration record of a solver run.

    ``rows`` hold the CSV columns; ``extras`` hold per-row diagnostics
    (certificate slacks, residuals, sampled indices) and ``meta`` run-level data.
    """

    method: str
    rows: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    final: object = None

    def __len__(self):
        return len(self.rows)

    def add(self, row, **extra):
        self.rows.append(row)
        for k, v in extra.items():
            self.extras.setdefault(k, []).append(v)

    def column(self, name):
        if name in COLUMNS:
            vals = [r.get(name) for r in self.rows]
        else:
            vals = self.extras.get(name, [])
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def rate_product(self):
        """``eta_t * t * gap_t`` per row."""
        return self.column("eta") * self.column("iter") * self.column("gap")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in self.rows:
                w.writerow([format_field(r.get(c)) for c in COLUMNS])


def format_field(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".17g")


def _coords(p):
    return p.coords if isinstance(p, ManifoldPoint) else np.asarray(p, float)


def _value_grad(h):
    if hasattr(h, "value_and_grad"):
        return h.value_and_grad
    return lambda z: (h.value(z), h.grad(z))


def _prox_objective(f, x, eta):
    """``h(y) = f(y) + d(x, y)^2 / (2 eta)``; strongly convex with ``mu + 1/eta``."""
    if isinstance(f, FrechetObjective):
        return f.with_anchor(x, 1.0 / eta)
    m = f.manifold

    def value(y):
        d = m.dist(x, y)
        return f.value(y) + d * d / (2.0 * eta)

    def grad(y):
        return f.grad(y) - m.log(y, x) / eta

    return Objective(m, value, grad, mu=f.mu + 1.0 / eta, name=f"prox[{f.name}]")


def estimate_l0(h, z0, rng, mode="lipschitz", samples=200):
    """Estimate ``L0`` over a ball that contains the sublevel set of ``h`` at ``z0``.

    Strong convexity gives ``d(z, z0) <= 2 ||grad h(z0)|| / mu`` on that set.
    ``"lipschitz"`` samples the gradient Lipschitz constant (times 1.5);
    ``"grad_bound"`` takes the largest sampled gradient norm.
    """
    m = h.manifold
    z0 = _coords(z0)
    g0 = h.grad(z0)
    if not h.mu > 0:
        raise ContractViolation("estimating L0 needs a strongly convex subproblem")
    radius = max(2.0 * float(m.norm(z0, g0)) / h.mu, 1e-6)
    if mode == "lipschitz":
        return max(h.local_smoothness(z0, radius, rng, samples=samples), h.mu)
    best = 0.0
    for _ in range(samples):
        p = m.exp(z0, m.random_tangent(rng, z0, radius))
        best = max(best, float(m.norm(p, h.grad(p))))
    return best


def _inner(h, z0, cfg: InnerConfig, grad_tol, record, rng=None):
    m = h.manifold
    vg = _value_grad(h)
    z = np.array(z0, float)
    fz, g = vg(z)
    gn = float(m.norm(z, g))
    values = [fz] if record else None
    s_max = 1.0 / h.mu if h.mu > 0 else 1.0
    if cfg.step_rule == "fixed":
        L0 = cfg.L0
        if L0 is None:
            L0 = estimate_l0(h, z, rng if rng is not None else philox(0, 3), cfg.l0_mode)
        step = 1.0 / L0
    else:
        step = s_max
    it = 0
    while True:
        if not (math.isfinite(fz) and math.isfinite(gn)):
            raise NumericalFailure("inner solver produced a non-finite value", gn)
        if gn <= grad_tol:
            return InnerResult(z, it, True, gn, values, step)
        if it >= cfg.max_inner_iters:
            warnings.warn(f"inner solver hit {cfg.max_inner_iters} iterations (grad norm {gn:.3e})",
                          InnerIterationWarning, stacklevel=3)
            return InnerResult(z, it, False, gn, values, step)
        if cfg.step_rule == "fixed":
            z = m.exp(z, -step * g)
            fz, g = vg(z)
            gn = float(m.norm(z, g))
        else:
            trial = min(2.0 * step, s_max) if it > 0 else step
            noise = 16.0 * _EPS * (abs(fz) + 1.0)
            for _ in range(MAX_HALVINGS):
                try:
                    zn = m.exp(z, -trial * g)
                    fn, gnv = vg(zn)
                except DomainExitError:
                    trial *= 0.5
                    continue
                gnn = float(m.norm(zn, gnv))
                decrease = 0.5 * trial * gn * gn
                if decrease > noise:
                    ok = fn <= fz - decrease
                else:
                    # value differences are below rounding; accept on gradient decrease
                    ok = fn <= fz + noise and gnn < gn
                if ok:
                    break
                trial *= 0.5
            else:
                warnings.warn(f"line search failed (grad norm {gn:.3e})", InnerIterationWarning, stacklevel=3)
                return InnerResult(z, it, False, gn, values, step)
            step = trial
            z, fz, g, gn = zn, fn, gnv, gnn
        it += 1
        if record:
            values.append(fz)


def _wrap(result, like, m):
    if isinstance(like, ManifoldPoint):
        result.point = ManifoldPoint(result.point, m)
    return result


def inner_gd(h: Objective, z0, cfg: Optional[InnerConfig] = None, record=False, rng=None) -> InnerResult:
    """Minimize a strongly convex ``h`` from ``z0`` until ``||grad h|| <= cfg.grad_tol``.

    Returns an :class:`InnerResult`; ``converged`` is False (with a warning)
    when the iteration budget runs out.  ``values`` holds ``h(z_k)`` when
    ``record`` is set.
    """
    cfg = cfg or InnerConfig()
    if isinstance(z0, ManifoldPoint) and z0.manifold is not h.manifold:
        raise ContractViolation("start point is not on the objective's manifold")
    res = _inner(h, _coords(z0), cfg, cfg.grad_tol, record, rng)
    return _wrap(res, z0, h.manifold)


def prox_solve(f, x, eta, cfg: InnerConfig, grad_tol=None, record=False):
    """Raw-coordinate proximal solve, warm-started at ``x``."""
    if not eta > 0:
        raise ContractViolation(f"eta must be positive, got {eta}")
    x = _coords(x)
    h = _prox_objective(f, x, eta)
    return _inner(h, x, cfg, cfg.grad_tol if grad_tol is None else grad_tol, record)


def prox_step(f: Objective, x, eta: float, cfg: Optional[InnerConfig] = None):
    """Inexact proximal point ``argmin_y f(y) + d(x, y)^2 / (2 eta)``.

    The result satisfies ``x = Exp_y(eta grad f(y))`` up to ``eta * grad_tol``.
    """
    cfg = cfg or InnerConfig()
    res = prox_solve(f, x, eta, cfg)
    if isinstance(x, ManifoldPoint):
        return ManifoldPoint(res.point, f.manifold)
    return res.point


def prox_residual(m, f, x_prev, x_next, eta):
    """``||log_{x_next}(x_prev) - eta grad f(x_next)||``."""
    g = f.grad(x_next)
    return float(m.norm(x_next, m.log(x_next, x_prev) - eta * g))


def _row(t, fval, fstar, gnorm, dist, inner_iters, eta, wall):
    return {
        "iter": t,
        "f": fval,
        "gap": None if fstar is None else fval - fstar,
        "grad_norm": gnorm,
        "dist_to_opt": dist,
        "inner_iters": inner_iters,
        "eta": eta,
        "wall_ms": wall,
    }


def proximal_gradient(f: Objective, x0, cfg: SolverConfig, fstar=None, xstar=None) -> RunTrace:
    """Run ``max_outer_iters`` inexact proximal steps from ``x0``.

    With ``xstar`` and ``fstar`` the trace records the per-step certificate
    slack ``<x_t x_{t+1}, x_{t+1} x*> - eta (f(x_{t+1}) - f*)`` under ``tele_slack``.
    """
    m = f.manifold
    x = _coords(x0).copy()
    xs = None if xstar is None else _coords(xstar)
    vg = _value_grad(f)
    trace = RunTrace("proximal_gradient")
    trace.meta["f0"] = f.value(x)
    if xs is not None:
        trace.meta["d0"] = float(m.dist(x, xs))
    for t in range(1, cfg.max_outer_iters + 1):
        eta = cfg.eta_at(t)
        tic = time.perf_counter()
        res = prox_solve(f, x, eta, cfg.inner, cfg.inner.tol_at(t))
        wall = (time.perf_counter() - tic) * 1e3 if cfg.record_wall else None
        y = res.point
        fy, gy = vg(y)
        gnorm = float(m.norm(y, gy))
        extra = {
            "prox_residual": float(m.norm(y, m.log(y, x) - eta * gy)),
            "inner_converged": res.converged,
        }
        if cfg.record_trace and xs is not None and fstar is not None:
            q = float(quasi_inner_raw(m, x, y, y, xs))
            extra["tele_slack"] = q - eta * (fy - fstar)
        dist = None if xs is None else float(m.dist(y, xs))
        trace.add(_row(t, fy, fstar, gnorm, dist, res.iterations, eta, wall), **extra)
        x = y
        if cfg.early_stop_grad is not None and gnorm <= cfg.early_stop_grad:
            break
    trace.final = x
    return trace


def alpha_weights(L, T):
    """``alpha_t = 1 / (4 L sqrt(t))`` for ``t = 1..T``."""
    t = np.arange(1, T + 1, dtype=float)
    return 1.0 / (4.0 * L * np.sqrt(t))


def rate1_bound(d0_sq, sigma2, L, T):
    """``d0^2 / (2 A) + sigma^2 log(T + 1) / A`` with ``A = sum alpha_t``."""
    A = float(alpha_weights(L, T).sum())
    return d0_sq / (2.0 * A) + sigma2 * math.log(T + 1.0) / A


def weighted_average_gap(trace: RunTrace, L):
    gap = trace.column("gap")
    a = alpha_weights(L, len(gap))
    return float(np.dot(a, gap) / a.sum())


def partial_sums(trace: RunTrace, L):
    """Running sums of ``(eta_s - L eta_s^2) (F(x_s) - F*)``."""
    eta = trace.column("eta")
    return np.cumsum((eta - L * eta * eta) * trace.column("gap"))


def stochastic_proximal_gradient(F: StochasticObjective, x0, cfg: SolverConfig,
                                 fstar=None, xstar=None) -> RunTrace:
    """Stochastic proximal method: ``x_t = prox_{eta_t f(.; xi_t)}(x_{t-1})``.

    Components are drawn uniformly with a generator derived from ``cfg.seed``.
    Rows report the mean objective ``F`` at each iterate.
    """
    m = F.manifold
    x = _coords(x0).copy()
    xs = None if xstar is None else _coords(xstar)
    rng = philox(cfg.seed, 2)
    n = F.n_components
    comps = [F.component_objective(i) for i in range(n)]
    vg = _value_grad(F.mean)
    trace = RunTrace("stochastic_proximal_gradient")
    trace.meta["f0"] = F.mean.value(x)
    if xs is not None:
        trace.meta["d0"] = float(m.dist(x, xs))
    for t in range(1, cfg.max_outer_iters + 1):
        eta = cfg.eta_at(t)
        xi = int(rng.integers(n))
        tic = time.perf_counter()
        res = prox_solve(comps[xi], x, eta, cfg.inner, cfg.inner.tol_at(t))
        wall = (time.perf_counter() - tic) * 1e3 if cfg.record_wall else None
        y = res.point
        fy, gy = vg(y)
        dist = None if xs is None else float(m.dist(y, xs))
        trace.add(_row(t, fy, fstar, float(m.norm(y, gy)), dist, res.iterations, eta, wall),
                  xi=xi, inner_converged=res.converged)
        x = y
    trace.final = x
    return trace


def zeta(kappa, c):
    """Curvature factor ``sqrt(|kappa|) c / tanh(sqrt(|kappa|) c)``; 1 in the flat limit."""
    s = math.sqrt(abs(kappa)) * c
    if s < 1e-4:
        return 1.0 + s * s / 3.0
    return s / math.tanh(s)


def rgd_baseline(f: Objective, x0, eta: float, T: int, kappa_lb: float,
                 fstar=None, xstar=None, record_wall=False) -> RunTrace:
    """Explicit Riemannian gradient descent ``x_t = Exp_{x_{t-1}}(-eta grad f(x_{t-1}))``.

    With ``xstar`` each row also records ``zeta(kappa_lb, d(x_{t-1}, x*))``.
    """
    if kappa_lb > 0:
        raise ContractViolation("kappa_lb must be nonpositive")
    if not eta > 0 or T < 1:
        raise ContractViolation("need eta > 0 and T >= 1")
    m = f.manifold
    vg = _value_grad(f)
    x = _coords(x0).copy()
    xs = None if xstar is None else _coords(xstar)
    trace = RunTrace("rgd")
    trace.meta["kappa_lb"] = float(kappa_lb)
    trace.meta["f0"] = f.value(x)
    _, g = vg(x)
    for t in range(1, T + 1):
        tic = time.perf_counter()
        extra = {}
        if xs is not None:
            extra["zeta"] = zeta(kappa_lb, float(m.dist(x, xs)))
        x = m.exp(x, -eta * g)
        fx, g = vg(x)
        wall = (time.perf_counter() - tic) * 1e3 if record_wall else None
        if not math.isfinite(fx):
            raise NumericalFailure("RGD produced a non-finite value")
        dist = None if xs is None else float(m.dist(x, xs))
        trace.add(_row(t, fx, fstar, float(m.norm(x, g)), dist, 0, eta, wall), **extra)
    trace.final = x
    if xs is not None:
        trace.meta["zeta_max"] = max(trace.extras["zeta"])
    return trace
