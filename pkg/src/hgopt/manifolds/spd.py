import numpy as np

from ..geometry import Manifold

EIG_FLOOR = 1e-14


def sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _eig_apply(a, fn):
    w, q = np.linalg.eigh(a)
    return (q * fn(w)[..., None, :]) @ np.swapaxes(q, -1, -2)


def sqrtm(a):
    return _eig_apply(a, np.sqrt)


def invsqrtm(a):
    return _eig_apply(a, lambda w: 1.0 / np.sqrt(w))


def expm(a):
    return _eig_apply(a, np.exp)


def logm(a):
    return _eig_apply(a, lambda w: np.log(np.maximum(w, EIG_FLOOR)))


class SpdManifold(Manifold):
    """Symmetric positive definite n x n matrices, affine-invariant metric.

    ``<U, V>_X = tr(X^-1 U X^-1 V)``.  Matrix functions go through a
    symmetric eigendecomposition.
    """

    name = "spd"

    def __init__(self, n):
        if int(n) < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        super().__init__()
        self.n = int(n)
        self.dim = self.n * (self.n + 1) // 2
        self.point_shape = (self.n, self.n)

    def inner(self, x, u, v):
        xi_u = np.linalg.solve(x, u)
        xi_v = np.linalg.solve(x, v)
        return np.einsum("...ij,...ji->...", xi_u, xi_v)

    def proj_point(self, x):
        return sym(np.asarray(x, float))

    def proj_tangent(self, x, v):
        return sym(np.asarray(v, float))

    def point_residual(self, x):
        x = np.asarray(x, float)
        asym = np.max(np.abs(x - np.swapaxes(x, -1, -2)))
        if np.linalg.eigvalsh(sym(x)).min() <= 1e-12:
            return np.inf
        return float(asym / max(1.0, np.max(np.abs(x))))

    def tangent_residual(self, x, v):
        v = np.asarray(v, float)
        return float(np.max(np.abs(v - np.swapaxes(v, -1, -2))) / max(1.0, np.max(np.abs(v))))

    def exp(self, x, v):
        s = sqrtm(x)
        si = invsqrtm(x)
        y = s @ expm(sym(si @ v @ si)) @ s
        return sym(y)

    def log(self, x, y):
        s = sqrtm(x)
        si = invsqrtm(x)
        v = sym(s @ logm(sym(si @ y @ si)) @ s)
        same = np.all(np.asarray(x) == np.asarray(y), axis=(-2, -1))
        return np.where(same[..., None, None], 0.0, v)

    def _dist(self, x, y):
        si = invsqrtm(x)
        w = np.linalg.eigvalsh(sym(si @ y @ si))
        d = np.sqrt(np.sum(np.log(np.maximum(w, EIG_FLOOR)) ** 2, axis=-1))
        same = np.all(np.asarray(x) == np.asarray(y), axis=(-2, -1))
        return np.where(same, 0.0, d)

    def transp(self, x, y, v):
        s = sqrtm(x)
        si = invsqrtm(x)
        e = s @ sqrtm(sym(si @ y @ si)) @ si
        return sym(e @ v @ np.swapaxes(e, -1, -2))

    def frame(self, x):
        s = sqrtm(np.asarray(x, float))
        basis = []
        for i in range(self.n):
            for j in range(i, self.n):
                b = np.zeros((self.n, self.n))
                if i == j:
                    b[i, i] = 1.0
                else:
                    b[i, j] = b[j, i] = 1.0 / np.sqrt(2.0)
                basis.append(s @ b @ s)
        return np.array(basis)

    def origin(self):
        return np.eye(self.n)
