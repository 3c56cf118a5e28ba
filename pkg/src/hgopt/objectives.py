"""Geodesically convex test objectives with exact oracles.

Oracles accept either a :class:`ManifoldPoint` or raw coordinates.  With a
point they return plain floats and :class:`TangentVector` gradients; with raw
coordinates they return arrays (the fast path used by the solvers).
"""

from __future__ import annotations

import numpy as np

from .geometry import (
    ContractViolation,
    ManifoldPoint,
    TangentVector,
    _check_same_manifold,
    geodesic_point,
)
from .manifolds import EuclideanSpace, WarpedProduct

SAFETY_FACTOR = 1.5


def _coords(p):
    return p.coords if isinstance(p, ManifoldPoint) else np.asarray(p, float)


def philox(seed, stream=0):
    """Counter-based generator for ``(seed, stream)``; the only RNG the package uses."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


class Objective:
    """Differentiable function on a manifold with (mu, L) metadata.

    Parameters
    ----------
    manifold : Manifold
    value, grad : callable
        Raw oracles ``coords -> float`` and ``coords -> tangent coords``.
    mu : float
        Strong geodesic convexity parameter.
    L : float, optional
        Global smoothness constant, if one exists.
    minimizer : array, optional
        Known minimizer coordinates.
    """

    def __init__(self, manifold, value, grad, mu=0.0, L=None, minimizer=None, name="objective"):
        self.manifold = manifold
        self._value = value
        self._grad = grad
        self.mu = float(mu)
        self.L = None if L is None else float(L)
        self._minimizer = None if minimizer is None else np.asarray(minimizer, float)
        self.name = name

    def __repr__(self):
        return f"{type(self).__name__}({self.name}, mu={self.mu}, L={self.L})"

    def value(self, p):
        return float(self._value(_coords(p)))

    def grad(self, p):
        g = self._grad(_coords(p))
        if isinstance(p, ManifoldPoint):
            if p.manifold is not self.manifold:
                raise ContractViolation("point is not on the objective's manifold")
            return TangentVector(p, g)
        return g

    @property
    def minimizer(self):
        if self._minimizer is None:
            return None
        return ManifoldPoint(self._minimizer, self.manifold)

    def fstar(self):
        return None if self._minimizer is None else self.value(self._minimizer)

    def local_smoothness(self, center, radius, rng, samples=200, safety=SAFETY_FACTOR):
        """Sampled Lipschitz constant of the gradient over a geodesic ball.

        Maximum over random pairs ``(p, q)`` of
        ``||grad f(p) - transport_{q->p} grad f(q)|| / d(p, q)``, times ``safety``.
        """
        m = self.manifold
        c = _coords(center)
        best = 0.0
        for _ in range(samples):
            p = m.exp(c, m.random_tangent(rng, c, radius))
            q = m.exp(c, m.random_tangent(rng, c, radius))
            d = float(m.dist(p, q))
            if d < 1e-8:
                continue
            diff = self._grad(p) - m.transp(q, p, self._grad(q))
            best = max(best, float(m.norm(p, diff)) / d)
        return safety * best


class FrechetObjective(Objective):
    """``sum_i w_i d(x, a_i)^2 / 2`` with batched oracles.

    Weights are used as given; the public constructors normalize them.
    """

    def __init__(self, manifold, anchors, weights, minimizer=None, name="frechet"):
        anchors = np.asarray(anchors, float)
        weights = np.asarray(weights, float)
        self.anchors = anchors
        self.weights = weights
        self._wshape = (-1,) + (1,) * len(manifold.point_shape)
        # shooting-based distances: take values from the same logs as the gradient
        self._via_log = isinstance(manifold, WarpedProduct)
        L = float(weights.sum()) if isinstance(manifold, EuclideanSpace) else None
        super().__init__(manifold, self._val, self._gr, mu=float(weights.sum()), L=L,
                         minimizer=minimizer, name=name)

    def _logs(self, x):
        return self.manifold.log(np.broadcast_to(x, self.anchors.shape), self.anchors)

    def _sq(self, x, logs=None):
        if self._via_log:
            if logs is None:
                logs = self._logs(x)
            return self.manifold.inner(x, logs, logs)
        return self.manifold.sqdist(x[None], self.anchors)

    def _val(self, x):
        return 0.5 * float(np.dot(self.weights, self._sq(x)))

    def _gr(self, x):
        return -np.sum(self.weights.reshape(self._wshape) * self._logs(x), axis=0)

    def value_and_grad(self, x):
        x = _coords(x)
        logs = self._logs(x)
        g = -np.sum(self.weights.reshape(self._wshape) * logs, axis=0)
        return 0.5 * float(np.dot(self.weights, self._sq(x, logs))), g

    def with_anchor(self, anchor, weight):
        """Same objective plus ``weight * d(x, anchor)^2 / 2``."""
        anchors = np.concatenate([self.anchors, np.asarray(anchor, float)[None]])
        weights = np.append(self.weights, float(weight))
        return FrechetObjective(self.manifold, anchors, weights, name=self.name + "+prox")


def squared_distance_objective(anchor: ManifoldPoint) -> FrechetObjective:
    """``f(z) = d(anchor, z)^2 / 2`` with gradient ``-log_z(anchor)``."""
    m = anchor.manifold
    return FrechetObjective(m, anchor.coords[None], [1.0], minimizer=anchor.coords, name="sqdist")


def _normalized(anchors, weights):
    if len(anchors) == 0:
        raise ContractViolation("need at least one anchor")
    m = _check_same_manifold(*anchors)
    if weights is None:
        weights = np.full(len(anchors), 1.0 / len(anchors))
    weights = np.asarray(weights, float)
    if weights.shape != (len(anchors),) or np.any(weights < 0) or weights.sum() <= 0:
        raise ContractViolation("weights must be nonnegative, one per anchor, not all zero")
    keep = weights > 0
    coords = np.array([a.coords for a, k in zip(anchors, keep) if k])
    return m, coords, weights[keep] / weights[keep].sum()


def frechet_mean_objective(anchors, weights=None) -> FrechetObjective:
    """Weighted Fréchet objective ``sum_i w_i d(x, a_i)^2 / 2``.

    Weights are normalized and zero-weight anchors dropped.  On Euclidean
    space the minimizer is the weighted average and is attached.
    """
    m, coords, w = _normalized(list(anchors), weights)
    minimizer = None
    if isinstance(m, EuclideanSpace):
        minimizer = w @ coords
    elif len(coords) == 1:
        minimizer = coords[0]
    name = "sqdist" if len(coords) == 1 else "frechet"
    return FrechetObjective(m, coords, w, minimizer=minimizer, name=name)


def karcher_center(m, anchors, weights, iters=100, tol=1e-12):
    """Rough weighted mean by damped gradient steps; used only to centre samples."""
    f = FrechetObjective(m, anchors, weights)
    x = np.array(anchors[int(np.argmax(weights))], float)
    fx, g = f.value_and_grad(x)
    step = 1.0
    for _ in range(iters):
        if float(m.norm(x, g)) <= tol:
            break
        while step > 1e-8:
            y = m.exp(x, -step * g)
            fy, gy = f.value_and_grad(y)
            if fy <= fx:
                x, fx, g = y, fy, gy
                break
            step *= 0.5
        else:
            break
    return x


class StochasticObjective:
    """Finite-sum objective ``F(x) = E_xi f(x; xi)`` with uniform ``xi``.

    Parameters
    ----------
    mean : FrechetObjective
        The averaged objective ``F``.
    variance_bound : float
        Stored ``sigma^2`` from sampling ``E||grad f(x;xi)||^2 - ||grad F(x)||^2``
        over a ball around the mean.
    """

    def __init__(self, mean: FrechetObjective, seed, variance_bound, center, radius):
        self.mean = mean
        self.manifold = mean.manifold
        self.anchors = mean.anchors
        self.n_components = len(mean.anchors)
        self.seed = int(seed)
        self.variance_bound = float(variance_bound)
        self.center = center
        self.radius = radius

    def sampler(self, stream=0):
        """Fresh component sampler owned by one run."""
        rng = philox(self.seed, stream)
        n = self.n_components
        return lambda: int(rng.integers(n))

    def component(self, x, xi):
        """``(f(x; xi), grad f(x; xi))``."""
        x = _coords(x)
        v = self.manifold.log(x, self.anchors[xi])
        return 0.5 * float(self.manifold.inner(x, v, v)), -v

    def component_objective(self, xi) -> FrechetObjective:
        return FrechetObjective(self.manifold, self.anchors[xi][None], [1.0],
                                minimizer=self.anchors[xi], name=f"component[{xi}]")

    def variance_at(self, x):
        """Exact ``E||grad f(x; xi)||^2 - ||grad F(x)||^2`` for the finite sum."""
        x = _coords(x)
        m = self.manifold
        logs = m.log(np.broadcast_to(x, self.anchors.shape), self.anchors)
        second = float(np.mean(m.inner(x, logs, logs)))
        g = np.mean(logs, axis=0)
        return second - float(m.inner(x, g, g))


def stochastic_frechet(anchors, seed, radius=None, samples=500) -> StochasticObjective:
    """Uniform finite-sum Fréchet objective with a sampled variance bound.

    ``sigma^2`` is the largest exact variance over ``samples`` points drawn in a
    ball around the mean of radius ``radius`` (default: farthest anchor).
    """
    anchors = list(anchors)
    if len(anchors) < 2:
        raise ContractViolation("stochastic_frechet needs at least two anchors")
    m = _check_same_manifold(*anchors)
    coords = np.array([a.coords for a in anchors])
    w = np.full(len(coords), 1.0 / len(coords))
    mean = FrechetObjective(m, coords, w, minimizer=w @ coords if isinstance(m, EuclideanSpace) else None)
    center = karcher_center(m, coords, w)
    if radius is None:
        radius = float(np.max(m.dist(center[None], coords)))
    obj = StochasticObjective(mean, seed, 0.0, center, radius)
    rng = philox(seed, 1)
    pts = [center] + [m.exp(center, m.random_tangent(rng, center, radius)) for _ in range(samples)]
    obj.variance_bound = max(obj.variance_at(p) for p in pts)
    return obj


def prox_closed_form(obj: FrechetObjective, x: ManifoldPoint, eta: float) -> ManifoldPoint:
    """Proximal point of a squared-distance objective: ``x`` moved towards the anchor."""
    if not isinstance(obj, FrechetObjective) or len(obj.anchors) != 1:
        raise ContractViolation("prox_closed_form needs a single-anchor squared-distance objective")
    if not eta > 0:
        raise ContractViolation(f"eta must be positive, got {eta}")
    w = float(obj.weights[0])
    a = ManifoldPoint(obj.anchors[0], obj.manifold)
    return geodesic_point(x, a, w * eta / (1.0 + w * eta))
