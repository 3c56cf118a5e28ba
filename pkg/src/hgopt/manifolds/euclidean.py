import numpy as np

from ..geometry import Manifold


class EuclideanSpace(Manifold):
    """Flat space R^dim; every identity reduces to its vector-space form."""

    name = "euclidean"

    def __init__(self, dim):
        if int(dim) < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        super().__init__()
        self.dim = int(dim)
        self.point_shape = (self.dim,)

    def inner(self, x, u, v):
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def exp(self, x, v):
        return np.asarray(x, float) + v

    def log(self, x, y):
        return np.asarray(y, float) - x

    def _dist(self, x, y):
        return np.linalg.norm(y - x, axis=-1)

    def sqdist(self, x, y):
        # no sqrt round trip, so orthogonal flat segments give exactly 0
        a, b = self._canonical_pair(np.asarray(x, float), np.asarray(y, float))
        r = b - a
        return np.sum(r * r, axis=-1)

    def transp(self, x, y, v):
        return np.array(v, dtype=float)

    def frame(self, x):
        return np.eye(self.dim)

    def origin(self):
        return np.zeros(self.dim)
