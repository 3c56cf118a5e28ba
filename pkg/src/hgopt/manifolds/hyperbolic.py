import numpy as np

from ..geometry import SMALL_NORM, Manifold


def minkowski(u, v):
    """Lorentzian bilinear form -u0 v0 + sum_i ui vi along the last axis."""
    u = np.asarray(u)
    v = np.asarray(v)
    return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]


class HyperbolicSpace(Manifold):
    """Hyperbolic space of constant curvature ``curvature < 0``, hyperboloid model.

    Points live on the upper sheet ``<x, x>_L = 1 / curvature`` with the time
    coordinate first; tangents at ``x`` satisfy ``<x, v>_L = 0``.
    """

    name = "hyperbolic"

    def __init__(self, dim, curvature=-1.0):
        if int(dim) < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if not curvature < 0:
            raise ValueError(f"curvature must be negative, got {curvature}")
        super().__init__()
        self.dim = int(dim)
        self.curvature = float(curvature)
        self.radius = 1.0 / np.sqrt(-self.curvature)
        self.point_shape = (self.dim + 1,)

    def inner(self, x, u, v):
        return minkowski(u, v)

    def proj_point(self, x):
        x = np.array(x, dtype=float)
        x[..., 0] = np.sqrt(self.radius**2 + np.sum(x[..., 1:] ** 2, axis=-1))
        return x

    def proj_tangent(self, x, v):
        return v + (minkowski(x, v) / self.radius**2)[..., None] * x

    def point_residual(self, x):
        x = np.asarray(x, float)
        if x[..., 0].min() <= 0:
            return np.inf
        scale = np.maximum(1.0, x[..., 0] ** 2)
        return float(np.max(np.abs(minkowski(x, x) + self.radius**2) / scale))

    def tangent_residual(self, x, v):
        x = np.asarray(x, float)
        scale = np.maximum(1.0, x[..., 0] * np.max(np.abs(v), axis=-1))
        return float(np.max(np.abs(minkowski(x, v)) / scale))

    def exp(self, x, v):
        R = self.radius
        n = self.norm(x, v)
        small = n < SMALL_NORM
        safe = np.where(small, 1.0, n)
        y = np.cosh(n / R)[..., None] * x + (R * np.sinh(n / R) / safe)[..., None] * v
        # first order below the guard: exact to O(|v|^2) and still moves the point
        y = np.where(small[..., None], x + v, y)
        return self.proj_point(y)

    def _dist(self, x, y):
        R = self.radius
        c = np.maximum(minkowski(x - y, x - y), 0.0)
        return 2.0 * R * np.arcsinh(np.sqrt(c) / (2.0 * R))

    def log(self, x, y):
        R = self.radius
        x = np.asarray(x, float)
        d = self.dist(x, y)
        u = y + (minkowski(x, y) / R**2)[..., None] * x
        small = d < SMALL_NORM
        s = np.where(small, 1.0, d / R)
        factor = np.where(small, 1.0, s / np.sinh(s))
        v = self.proj_tangent(x, factor[..., None] * u)
        same = np.all(x == np.asarray(y), axis=-1)
        return np.where(same[..., None], 0.0, v)

    def transp(self, x, y, v):
        R = self.radius
        coef = minkowski(y, v) / (R**2 - minkowski(x, y))
        w = v + coef[..., None] * (x + y)
        return self.proj_tangent(y, w)

    def frame(self, x):
        x = np.asarray(x, float)
        basis = []
        for e in np.eye(self.dim + 1)[1:]:
            w = self.proj_tangent(x, e)
            for b in basis:
                w = w - minkowski(w, b) * b
            basis.append(w / np.sqrt(minkowski(w, w)))
        return np.array(basis)

    def origin(self):
        o = np.zeros(self.dim + 1)
        o[0] = self.radius
        return o
