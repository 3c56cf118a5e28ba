"""Randomized property suites behind ``hgopt verify`` and the acceptance tests.

Every check reports its worst observed slack (``tol`` minus the worst
violation measure) so that a negative number means failure.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeodesicSegment, ManifoldPoint
from .manifolds import EuclideanSpace, HyperbolicSpace, SpdManifold, WarpedProduct
from .objectives import (
    FrechetObjective,
    Objective,
    frechet_mean_objective,
    philox,
    prox_closed_form,
    squared_distance_objective,
)
from .oracles import appendix_inequality_check, finite_diff_gradient, reference_minimize
from .quasilinear import combine, compare_to_tangent_raw, q_convexity_gap, quasi_inner
from .solvers import (
    InnerConfig,
    SolverConfig,
    estimate_l0,
    inner_gd,
    prox_solve,
    proximal_gradient,
    zeta,
)

SUITES = ("quasilinear", "geometry", "convexity", "rates", "appendix")
DEFAULT_SEED = 20240607


@dataclass
class Check:
    suite: str
    name: str
    manifold: str
    slack: float
    count: int
    seconds: float = 0.0
    detail: str = ""

    @property
    def passed(self):
        return bool(self.slack >= 0.0)

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag}  {self.suite:<11} {self.manifold:<12} {self.name:<28} "
                f"worst slack {self.slack: .3e}  n={self.count}{'  ' + self.detail if self.detail else ''}")


@dataclass
class SuiteReport:
    name: str
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def worst(self):
        return min((c.slack for c in self.checks), default=float("inf"))


def standard_manifolds():
    """The four test manifolds with the sampling radius used for each."""
    return {
        "euclidean": (EuclideanSpace(5), 3.0),
        "hyperbolic": (HyperbolicSpace(3), 2.5),
        "spd": (SpdManifold(3), 1.5),
        # shooting is reliable for pairs within this radius of the waist
        "warped": (WarpedProduct("exp_r2"), 1.5),
    }


def random_tangents(m, rng, base, n, radius):
    """``n`` tangents at ``base`` with uniform direction and norm uniform in [0, radius]."""
    frame = m.frame(base)
    c = rng.standard_normal((n, len(frame)))
    c *= (radius * rng.uniform(size=n) / np.linalg.norm(c, axis=1))[:, None]
    return np.tensordot(c, frame, axes=1)


def random_points(m, rng, n, radius):
    o = m.origin()
    v = random_tangents(m, rng, o, n, radius)
    return m.exp(np.broadcast_to(o, v.shape), v)


def random_tangents_at(m, rng, X, radius):
    """One random tangent per row of ``X``."""
    out = np.empty_like(X)
    for i in range(len(X)):
        out[i] = random_tangents(m, rng, X[i], 1, radius)[0]
    return out


def _slack(tol, viol):
    """``min(tol - viol)`` over samples, ``tol`` may be an array."""
    return float(np.min(np.asarray(tol, float) - np.asarray(viol, float)))


def _scale(D):
    return np.maximum(1.0, D * D)


# -- quasilinear ----------------------------------------------------------

def quasilinear_checks(name, m, radius, n, rng, public_samples=50):
    """Axioms of the quasilinearized inner product plus the tangent comparison."""
    out = []
    tic = time.perf_counter()
    P = [random_points(m, rng, n, radius) for _ in range(5)]
    D, d2 = {}, {}
    for i in range(5):
        for j in range(i, 5):
            d2[i, j] = d2[j, i] = m.sqdist(P[i], P[j])
            # lengths only scale tolerances, so the sqrt round trip is harmless
            D[i, j] = D[j, i] = np.sqrt(d2[i, j])
    diam = np.max(np.stack(list(D.values())), axis=0)
    scale = _scale(diam)

    def q(a, b, c, d):
        return combine(d2[a, d], d2[b, c], d2[a, c], d2[b, d])

    x, y, z, u, w = range(5)
    base = q(x, y, z, w)
    sym = q(z, w, x, y)
    flip = q(y, x, z, w)
    n_sym = int(np.sum(base != sym))
    n_flip = int(np.sum(flip != -base))
    t_table = time.perf_counter() - tic
    out.append(Check("quasilinear", "symmetry (exact)", name, float(-n_sym), n, t_table,
                     f"{n_sym} mismatches"))
    out.append(Check("quasilinear", "sign flip (exact)", name, float(-n_flip), n, 0.0,
                     f"{n_flip} mismatches"))
    add = np.abs(q(x, z, u, w) - q(x, y, u, w) - q(y, z, u, w))
    out.append(Check("quasilinear", "additivity", name, _slack(1e-8 * scale, add), n))
    self_res = np.abs(q(x, y, x, y) - d2[x, y])
    out.append(Check("quasilinear", "self product = d^2", name, _slack(1e-10 * scale, self_res), n))
    lens = D[x, y] * D[z, w]
    ok = (D[x, y] > 1e-12) & (D[z, w] > 1e-12)
    cosq = np.abs(base[ok]) / lens[ok]
    out.append(Check("quasilinear", "cauchy-schwarz", name, _slack(1.0 + 1e-9, cosq), int(ok.sum())))

    # the public value type API must agree bitwise with the table
    k = min(public_samples, n)
    mismatch = 0
    for i in range(k):
        pts = [ManifoldPoint(P[j][i], m) for j in (x, y, z, w)]
        r = quasi_inner(GeodesicSegment(pts[0], pts[1]), GeodesicSegment(pts[2], pts[3]))
        if r.value != base[i] and not (r.cosq is None and r.value == 0.0):
            mismatch += 1
    out.append(Check("quasilinear", "public api agrees", name, float(-mismatch), k))

    tic = time.perf_counter()
    quasi, tangent = compare_to_tangent_raw(m, P[0], P[1], P[2])
    dd = np.max(np.stack([D[0, 1], D[0, 2], D[1, 2]]), axis=0)
    out.append(Check("quasilinear", "tangent comparison", name,
                     _slack(1e-8 * _scale(dd), quasi - tangent), n, time.perf_counter() - tic))
    return out


def run_quasilinear(n=1000, seed=DEFAULT_SEED, manifolds=None):
    rep = SuiteReport("quasilinear")
    for i, (name, (m, radius)) in enumerate((manifolds or standard_manifolds()).items()):
        rep.checks += quasilinear_checks(name, m, radius, n, philox(seed, 100 + i))
    return rep


# -- geometry -------------------------------------------------------------

def lemma1_check(name, m, radius, n, rng, tol=1e-6):
    """``||v1 - v2||_x <= d(Exp_x v1, Exp_x v2) + tol``."""
    tic = time.perf_counter()
    X = random_points(m, rng, n, radius)
    V1 = random_tangents_at(m, rng, X, radius)
    V2 = random_tangents_at(m, rng, X, radius)
    lhs = m.norm(X, V1 - V2)
    rhs = m.dist(m.exp(X, V1), m.exp(X, V2))
    return Check("geometry", "triangle comparison", name, _slack(tol, lhs - rhs), n,
                 time.perf_counter() - tic)


def geometry_checks(name, m, radius, n, rng):
    out = []
    X = random_points(m, rng, n, radius)
    vmax = 2.0 if isinstance(m, WarpedProduct) else 5.0
    V = random_tangents_at(m, rng, X, vmax)
    Y = m.exp(X, V)
    back = m.log(X, Y)
    nv = m.norm(X, V)
    rel = m.norm(X, back - V) / np.maximum(nv, 1e-300)
    tol = 1e-4 if isinstance(m, WarpedProduct) else 1e-6
    out.append(Check("geometry", "exp/log round trip", name, _slack(tol, rel[nv > 0]), n))
    W = random_tangents_at(m, rng, X, 1.0)
    Z = random_points(m, rng, n, radius)
    TW = m.transp(X, Z, W)
    iso = np.abs(m.norm(Z, TW) - m.norm(X, W))
    out.append(Check("geometry", "transport isometry", name, _slack(1e-8, iso), n))
    dist_log = np.abs(m.dist(X, Z) - m.norm(X, m.log(X, Z)))
    out.append(Check("geometry", "distance = |log|", name, _slack(1e-8, dist_log), n))
    out.append(lemma1_check(name, m, radius, n, rng))
    dxy, dyz, dxz = m.dist(X, Y), m.dist(Y, Z), m.dist(X, Z)
    out.append(Check("geometry", "triangle inequality", name,
                     _slack(1e-10 * np.maximum(1.0, dxy + dyz), dxz - dxy - dyz), n))
    return out


def lorentz_from_warped(p):
    """Isometry from ``dr^2 + cosh(r)^2 dtheta^2`` onto the hyperboloid."""
    r, t = p[..., 0], p[..., 1]
    return np.stack([np.cosh(r) * np.cosh(t), np.cosh(r) * np.sinh(t), np.sinh(r)], axis=-1)


def lorentz_push(p, v):
    """Differential of :func:`lorentz_from_warped` at ``p`` applied to ``v``."""
    r, t = p[..., 0], p[..., 1]
    vr, vt = v[..., 0], v[..., 1]
    return np.stack([
        np.sinh(r) * np.cosh(t) * vr + np.cosh(r) * np.sinh(t) * vt,
        np.sinh(r) * np.sinh(t) * vr + np.cosh(r) * np.cosh(t) * vt,
        np.cosh(r) * vr,
    ], axis=-1)


def cross_manifold_check(n, rng, max_dist=3.0):
    """Warped product with ``phi = cosh`` against the Lorentz hyperbolic plane."""
    w = WarpedProduct("cosh")
    h = HyperbolicSpace(2)
    X = random_points(w, rng, n, 1.5)
    Y = random_points(w, rng, n, 1.5)
    dw = w.dist(X, Y)
    keep = dw <= max_dist
    X, Y, dw = X[keep], Y[keep], dw[keep]
    LX, LY = lorentz_from_warped(X), lorentz_from_warped(Y)
    dh = h.dist(LX, LY)
    logw = lorentz_push(X, w.log(X, Y))
    logh = h.log(LX, LY)
    err_log = np.sqrt(np.maximum(h.inner(LX, logw - logh, logw - logh), 0.0))
    return [
        Check("geometry", "cosh warp = H2 distance", "warped-cosh", _slack(1e-5, np.abs(dw - dh)), int(keep.sum())),
        Check("geometry", "cosh warp = H2 log", "warped-cosh", _slack(1e-5, err_log), int(keep.sum())),
    ]


def run_geometry(n=1000, seed=DEFAULT_SEED, manifolds=None):
    rep = SuiteReport("geometry")
    for i, (name, (m, radius)) in enumerate((manifolds or standard_manifolds()).items()):
        rep.checks += geometry_checks(name, m, radius, n, philox(seed, 200 + i))
    rep.checks += cross_manifold_check(n, philox(seed, 250))
    z = zeta(-1.0, 1.0)
    rep.checks.append(Check("geometry", "zeta(-1, 1) = coth(1)", "-", 1e-12 - abs(z - 1.0 / math.tanh(1.0)), 1))
    return rep


# -- convexity ------------------------------------------------------------

def sample_objectives(m, radius, rng, n_anchors=5):
    """A squared-distance and a Fréchet objective with anchors inside ``radius``."""
    A = [ManifoldPoint(p, m) for p in random_points(m, rng, n_anchors, radius)]
    w = rng.uniform(0.5, 1.5, size=n_anchors)
    return {"sqdist": squared_distance_objective(A[0]), "frechet": frechet_mean_objective(A, w)}


def gradient_check(name, oname, f, m, radius, n, rng):
    """Analytic gradient against central differences (criterion-level tolerance)."""
    warped = isinstance(m, WarpedProduct)
    tol = 1e-3 if warped else 1e-4
    X = random_points(m, rng, n, radius)
    rel = []
    for x in X:
        p = ManifoldPoint(x, m)
        g = f.grad(p).coords
        fd = finite_diff_gradient(f._value, p, h=1e-5).coords
        gn = float(m.norm(x, g))
        if gn < 1e-6:
            continue
        rel.append(float(m.norm(x, fd - g)) / gn)
    return Check("convexity", f"gradient fd [{oname}]", name, _slack(tol, rel), len(rel))


def convexity_checks(name, m, radius, n, rng):
    out = []
    for oname, f in sample_objectives(m, radius, rng).items():
        out.append(gradient_check(name, oname, f, m, radius, min(n, 100), rng))
        X = random_points(m, rng, n, radius)
        Y = random_points(m, rng, n, radius)
        fx = np.array([f.value(x) for x in X])
        fy = np.array([f.value(y) for y in Y])
        gx = np.array([f.grad(x) for x in X])
        d = m.dist(X, Y)
        lin = m.inner(X, gx, m.log(X, Y))
        out.append(Check("convexity", f"strong g-convexity [{oname}]", name,
                         _slack(1e-8 * _scale(d), -(fy - fx - lin - 0.5 * f.mu * d * d)), n))
        k = min(n, 200)
        gaps0, gaps = [], []
        for i in range(k):
            px, py = ManifoldPoint(X[i], m), ManifoldPoint(Y[i], m)
            gaps0.append(q_convexity_gap(f, px, py, 0.0))
            gaps.append(q_convexity_gap(f, px, py, f.mu))
        out.append(Check("convexity", f"q-convexity mu=0 [{oname}]", name, _slack(1e-8, -np.array(gaps0)), k))
        out.append(Check("convexity", f"q-convexity mu [{oname}]", name, _slack(1e-8, -np.array(gaps)), k))
    return out


def run_convexity(n=500, seed=DEFAULT_SEED, manifolds=None):
    rep = SuiteReport("convexity")
    for i, (name, (m, radius)) in enumerate((manifolds or standard_manifolds()).items()):
        rep.checks += convexity_checks(name, m, radius, n, philox(seed, 300 + i))
    return rep


# -- rates ----------------------------------------------------------------

@dataclass
class RateInstance:
    label: str
    f: FrechetObjective
    x0: np.ndarray
    eta: float


def rate_instances(seed=DEFAULT_SEED):
    """Fréchet-mean experiments on H2, SPD(3) and the warped product."""
    specs = [
        ("H2", HyperbolicSpace(2), 2.0, 4, 0.1),
        ("H2", HyperbolicSpace(2), 2.0, 8, 0.5),
        ("H2", HyperbolicSpace(2), 2.0, 16, 2.0),
        ("SPD3", SpdManifold(3), 1.0, 6, 0.5),
        ("SPD3", SpdManifold(3), 1.0, 12, 2.0),
        ("warped", WarpedProduct("exp_r2"), 1.0, 4, 0.1),
        ("warped", WarpedProduct("exp_r2"), 1.0, 8, 2.0),
    ]
    out = []
    for i, (label, m, radius, k, eta) in enumerate(specs):
        rng = philox(seed, 400 + i)
        A = [ManifoldPoint(p, m) for p in random_points(m, rng, k, radius)]
        f = frechet_mean_objective(A)
        x0 = random_points(m, rng, 1, radius)[0]
        out.append(RateInstance(f"{label} k={k} eta={eta}", f, x0, eta))
    return out


def rate_checks(inst: RateInstance, T, inner=None):
    """Rate certificate, monotone descent, prox residual and telescoping slack."""
    f = inst.f
    m = f.manifold
    ref = reference_minimize(f, inst.x0)
    cfg = SolverConfig(eta=inst.eta, max_outer_iters=T, inner=inner or InnerConfig())
    trace = proximal_gradient(f, inst.x0, cfg, fstar=ref.value, xstar=ref.point)
    d0sq = trace.meta["d0"] ** 2
    prod = np.nanmax(trace.rate_product())
    fv = np.r_[trace.meta["f0"], trace.column("f")]
    tols = np.array([cfg.inner.tol_at(t) for t in range(1, len(trace) + 1)])
    name = inst.label
    return [
        Check("rates", "eta t gap <= d0^2", name, d0sq * (1 + 1e-3) - prod, T, detail=f"ratio {prod / d0sq:.4f}"),
        Check("rates", "monotone descent", name, _slack(1e-9, np.diff(fv)), T),
        Check("rates", "prox fixed point", name, _slack(10 * tols, trace.column("prox_residual")), T),
        Check("rates", "telescoping certificate", name, _slack(1e-7, -trace.column("tele_slack")), T),
    ], trace, ref


def constructed_quadratic():
    """``(z1^2 + 2 z2^2) / 2`` on the plane: mu = 1, L0 = 2."""
    m = EuclideanSpace(2)
    scale = np.array([1.0, 2.0])
    return Objective(m, lambda z: 0.5 * float(np.dot(scale, z * z)), lambda z: scale * z,
                     mu=1.0, L=2.0, minimizer=np.zeros(2), name="quadratic")


def contraction_ratios(values, hstar, floor):
    """Per-step ratios ``(h_{k+1} - h*) / (h_k - h*)`` while the gap exceeds ``floor``."""
    gaps = np.asarray(values) - hstar
    ratios = []
    for a, b in zip(gaps[:-1], gaps[1:]):
        if a <= floor:
            break
        ratios.append(b / a)
    return np.array(ratios)


def contraction_check(h, z0, L0, label, rng=None):
    """Fixed step ``1/L0`` descent; every ratio must stay below ``1 - mu/(4 L0)``."""
    m = h.manifold
    ref = reference_minimize(h, z0)
    res = inner_gd(h, z0, InnerConfig(step_rule="fixed", L0=L0, grad_tol=1e-12, max_inner_iters=5000), record=True)
    floor = 1e-11 * max(1.0, abs(ref.value))
    r = contraction_ratios(res.values, ref.value, floor)
    bound = 1.0 - h.mu / (4.0 * L0)
    worst = float(r.max()) if len(r) else 0.0
    return Check("rates", "contraction 1 - mu/(4 L0)", label, bound + 1e-6 - worst, len(r),
                 detail=f"bound {bound:.4f} worst {worst:.4f}")


def contraction_suite(seed=DEFAULT_SEED, count=20):
    """Twenty prox subproblems across manifolds plus the constructed mu=1, L0=2 case."""
    checks = []
    q = constructed_quadratic()
    checks.append(contraction_check(q, np.array([1.0, 1.0]), 2.0, "quadratic mu=1 L0=2"))
    mans = [("H2", HyperbolicSpace(2), 2.0), ("SPD3", SpdManifold(3), 1.0),
            ("warped", WarpedProduct("exp_r2"), 1.0), ("R5", EuclideanSpace(5), 3.0)]
    for i in range(count):
        label, m, radius = mans[i % len(mans)]
        rng = philox(seed, 500 + i)
        k = 3 + i % 5
        A = [ManifoldPoint(p, m) for p in random_points(m, rng, k, radius)]
        f = frechet_mean_objective(A)
        x = random_points(m, rng, 1, radius)[0]
        eta = [0.1, 0.5, 2.0][i % 3]
        h = f.with_anchor(x, 1.0 / eta)
        L0 = estimate_l0(h, x, philox(seed, 600 + i))
        checks.append(contraction_check(h, x, L0, f"{label} prox #{i} L0={L0:.3f}"))
    return checks


def closed_form_prox_checks(seed=DEFAULT_SEED, n=20):
    out = []
    mans = [("H2", HyperbolicSpace(2), 2.0), ("SPD3", SpdManifold(3), 1.0),
            ("warped", WarpedProduct("exp_r2"), 1.0), ("R5", EuclideanSpace(5), 3.0)]
    for j, (label, m, radius) in enumerate(mans):
        rng = philox(seed, 700 + j)
        errs = []
        for _ in range(n):
            a, x = random_points(m, rng, 2, radius)
            f = squared_distance_objective(ManifoldPoint(a, m))
            eta = float(rng.uniform(0.05, 3.0))
            y = prox_solve(f, x, eta, InnerConfig()).point
            yc = prox_closed_form(f, ManifoldPoint(x, m), eta).coords
            errs.append(float(m.dist(y, yc)))
        out.append(Check("rates", "prox = closed form", label, _slack(1e-7, errs), n))
    return out


def run_rates(T=100, seed=DEFAULT_SEED, instances=None):
    rep = SuiteReport("rates")
    for inst in instances or rate_instances(seed):
        checks, _, _ = rate_checks(inst, T)
        rep.checks += checks
    rep.checks += contraction_suite(seed, count=8)
    rep.checks += closed_form_prox_checks(seed, n=5)
    return rep


# -- appendix -------------------------------------------------------------

def appendix_checks(name, m, radius, n, rng):
    """A1/A2 at ``n`` points within ``radius`` of each objective's minimizer.

    ``L`` is sampled on a ball of 1.5 times that radius, which holds the
    descent step from every sample point.
    """
    out = []
    for oname, f in sample_objectives(m, 1.0, rng).items():
        ref = reference_minimize(f, f.anchors[0])
        xs = ref.point.coords
        V = random_tangents(m, rng, xs, n, radius)
        X = m.exp(np.broadcast_to(xs, V.shape), V)
        L = f.local_smoothness(xs, 1.5 * radius, philox(0, 9), samples=400)
        rep = appendix_inequality_check(f, X, ref.value, L=L)
        out.append(Check("appendix", f"A1 descent bound [{oname}]", name, rep.worst_a1 + 1e-8, n,
                         detail=f"L={L:.3f}"))
        out.append(Check("appendix", f"A2 gradient domination [{oname}]", name, rep.worst_a2 + 1e-8, n))
    return out


APPENDIX_RADII = {"euclidean": 3.0, "hyperbolic": 3.0, "spd": 1.5, "warped": 0.75}


def run_appendix(n=100, seed=DEFAULT_SEED, manifolds=None):
    rep = SuiteReport("appendix")
    for i, (name, (m, _)) in enumerate((manifolds or standard_manifolds()).items()):
        rep.checks += appendix_checks(name, m, APPENDIX_RADII.get(name, 1.0), n, philox(seed, 800 + i))
    return rep


def run_suite(name, seed=DEFAULT_SEED, n=None):
    if name == "quasilinear":
        return run_quasilinear(n or 1000, seed)
    if name == "geometry":
        return run_geometry(n or 1000, seed)
    if name == "convexity":
        return run_convexity(n or 300, seed)
    if name == "rates":
        return run_rates(100, seed)
    if name == "appendix":
        return run_appendix(n or 100, seed)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
