"""Manifold abstraction and the value types shared across the package.

Manifolds work on raw ``numpy`` coordinate arrays with optional leading
batch dimensions (fast path used by solvers and randomized sweeps).  The
value types :class:`ManifoldPoint`, :class:`TangentVector` and
:class:`GeodesicSegment` wrap single points and enforce the contracts
(same manifold, same base point) at the public API.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MEMBERSHIP_TOL = 1e-10
SMALL_NORM = 1e-12

_uid_counter = itertools.count(1)


class GeometryError(Exception):
    """Base class for geometry failures."""


class ContractViolation(GeometryError, ValueError):
    """Raised when inputs break an operation's preconditions."""


class DomainExitError(GeometryError):
    """A geodesic left the manifold's coordinate chart."""


class NumericalFailure(GeometryError):
    """An iterative numerical routine did not converge."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class Manifold:
    """Base class for Hadamard manifolds in an ambient representation.

    Subclasses implement the underscored batched primitives.  ``dist`` is
    routed through a canonical ordering of its two arguments so that it is
    bitwise symmetric, which the quasilinearization identities rely on.
    """

    name = "manifold"
    point_shape: tuple = ()
    dim = 0

    def __init__(self):
        self.uid = next(_uid_counter)

    def __repr__(self):
        return f"{type(self).__name__}(uid={self.uid})"

    # -- batched primitives -------------------------------------------------
    def inner(self, x, u, v):
        raise NotImplementedError

    def norm(self, x, v):
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    def exp(self, x, v):
        raise NotImplementedError

    def log(self, x, y):
        raise NotImplementedError

    def _dist(self, x, y):
        return self.norm(x, self.log(x, y))

    def dist(self, x, y):
        a, b = self._canonical_pair(np.asarray(x, float), np.asarray(y, float))
        return self._dist(a, b)

    def sqdist(self, x, y):
        """Squared distance; bitwise symmetric like :meth:`dist`."""
        d = self.dist(x, y)
        return d * d

    def transp(self, x, y, v):
        raise NotImplementedError

    def proj_point(self, x):
        return x

    def proj_tangent(self, x, v):
        return v

    def point_residual(self, x):
        """Violation of the membership predicate (0 for a valid point)."""
        return 0.0

    def tangent_residual(self, x, v):
        return 0.0

    def frame(self, x):
        """Orthonormal basis of the tangent space at a single point ``x``.

        Returns an array of shape ``(dim, *point_shape)``.
        """
        raise NotImplementedError

    def origin(self):
        raise NotImplementedError

    def zero_tangent(self, x):
        return np.zeros_like(np.asarray(x, float))

    def random_tangent(self, rng, x, scale=1.0):
        """Tangent at ``x`` with uniform random direction and norm in [0, scale]."""
        basis = self.frame(x)
        c = rng.standard_normal(len(basis))
        c *= scale * rng.uniform() / max(np.linalg.norm(c), 1e-300)
        return np.tensordot(c, basis, axes=1)

    def random_point(self, rng, radius=1.0):
        o = self.origin()
        return self.exp(o, self.random_tangent(rng, o, radius))

    def geodesic(self, x, y, t):
        return self.exp(x, t * self.log(x, y))

    # -- helpers ------------------------------------------------------------
    def _canonical_pair(self, x, y):
        """Order each (x, y) pair lexicographically by coordinates."""
        x, y = np.broadcast_arrays(x, y)
        k = len(self.point_shape)
        batch = x.shape[: x.ndim - k]
        diff = (x - y).reshape(batch + (-1,))
        idx = np.argmax(diff != 0, axis=-1)
        first = np.take_along_axis(diff, idx[..., None], axis=-1)[..., 0]
        swap = (first > 0).reshape(batch + (1,) * k)
        return np.where(swap, y, x), np.where(swap, x, y)

    # -- value-type constructors -------------------------------------------
    def point(self, coords, tol=MEMBERSHIP_TOL):
        coords = np.array(coords, dtype=float)
        if coords.shape != self.point_shape:
            raise ContractViolation(
                f"{self.name}: expected point shape {self.point_shape}, got {coords.shape}"
            )
        res = self.point_residual(coords)
        if not res <= tol:
            raise ContractViolation(f"{self.name}: point off manifold (residual {res:.3e})")
        return ManifoldPoint(coords, self)

    def tangent(self, base, coords, tol=MEMBERSHIP_TOL):
        _check_owner(self, base)
        coords = np.array(coords, dtype=float)
        if coords.shape != self.point_shape:
            raise ContractViolation(
                f"{self.name}: expected tangent shape {self.point_shape}, got {coords.shape}"
            )
        res = self.tangent_residual(base.coords, coords)
        if not res <= tol:
            raise ContractViolation(f"{self.name}: vector not tangent (residual {res:.3e})")
        return TangentVector(base, coords)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    coords: np.ndarray
    manifold: Manifold

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(self.coords))

    @property
    def manifold_id(self):
        return self.manifold.uid

    def __repr__(self):
        return f"ManifoldPoint({self.coords.tolist()}, {self.manifold.name})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: ManifoldPoint
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(self.coords))

    @property
    def manifold(self):
        return self.base.manifold

    def norm(self):
        return float(self.manifold.norm(self.base.coords, self.coords))

    def __add__(self, other):
        _check_same_base(self, other)
        return TangentVector(self.base, self.coords + other.coords)

    def __sub__(self, other):
        _check_same_base(self, other)
        return TangentVector(self.base, self.coords - other.coords)

    def __mul__(self, scalar):
        return TangentVector(self.base, float(scalar) * self.coords)

    __rmul__ = __mul__

    def __neg__(self):
        return TangentVector(self.base, -self.coords)


@dataclass(frozen=True, eq=False)
class GeodesicSegment:
    """Ordered shortest geodesic from ``start`` to ``end``."""

    start: ManifoldPoint
    end: ManifoldPoint

    def __post_init__(self):
        _check_same_manifold(self.start, self.end)

    @property
    def manifold(self):
        return self.start.manifold

    def length(self):
        return distance(self.start, self.end)

    def reversed(self):
        return GeodesicSegment(self.end, self.start)


def _check_owner(manifold, p):
    if p.manifold is not manifold:
        raise ContractViolation(
            f"point belongs to manifold {p.manifold_id}, not {manifold.uid}"
        )


def _check_same_manifold(*points):
    m = points[0].manifold
    for p in points[1:]:
        if p.manifold is not m:
            raise ContractViolation(
                f"manifold mismatch: {m.uid} vs {p.manifold.uid}"
            )
    return m


def _check_same_base(u, v):
    if u.base is v.base:
        return
    _check_same_manifold(u.base, v.base)
    if not np.array_equal(u.base.coords, v.base.coords):
        raise ContractViolation("tangent vectors live at different base points")


def metric_inner(u: TangentVector, v: TangentVector) -> float:
    _check_same_base(u, v)
    return float(u.manifold.inner(u.base.coords, u.coords, v.coords))


def exp_map(v: TangentVector) -> ManifoldPoint:
    m = v.manifold
    return ManifoldPoint(m.exp(v.base.coords, v.coords), m)


def log_map(x: ManifoldPoint, y: ManifoldPoint) -> TangentVector:
    m = _check_same_manifold(x, y)
    return TangentVector(x, m.log(x.coords, y.coords))


def distance(x: ManifoldPoint, y: ManifoldPoint) -> float:
    m = _check_same_manifold(x, y)
    return float(m.dist(x.coords, y.coords))


def parallel_transport(v: TangentVector, to: ManifoldPoint) -> TangentVector:
    m = _check_same_manifold(v.base, to)
    return TangentVector(to, m.transp(v.base.coords, to.coords, v.coords))


def geodesic_point(x: ManifoldPoint, y: ManifoldPoint, t: float) -> ManifoldPoint:
    m = _check_same_manifold(x, y)
    if not 0.0 <= t <= 1.0:
        raise ContractViolation(f"geodesic parameter must lie in [0, 1], got {t}")
    if t == 0.0:
        return x
    if t == 1.0:
        return y
    return ManifoldPoint(m.geodesic(x.coords, y.coords, t), m)
