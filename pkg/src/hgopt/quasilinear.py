"""Quasilinearized inner product of ordered geodesic segments.

For segments ``x -> y`` and ``z -> w`` the product is the four-distance
expression

    (d(x, w)^2 + d(y, z)^2 - d(x, z)^2 - d(y, w)^2) / 2

which needs only the metric.  On a Hadamard manifold it is bounded above by
the tangent-space inner product at a shared base point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import (
    GeodesicSegment,
    ManifoldPoint,
    _check_same_manifold,
    exp_map,
    log_map,
    metric_inner,
)

DEGENERATE_LENGTH = 1e-12


@dataclass(frozen=True)
class QuasiInnerResult:
    """Value of the quasilinearized inner product.

    ``cosq`` is ``None`` when either segment is shorter than
    ``DEGENERATE_LENGTH``.
    """

    value: float
    cosq: Optional[float]


def combine(dxw2, dyz2, dxz2, dyw2):
    """Four-point formula from squared distances.

    Grouped so that swapping the segments or reversing one of them is exact
    in floating point, given a bitwise symmetric distance.
    """
    return 0.5 * ((dxw2 + dyz2) - (dxz2 + dyw2))


def _sq(m, a, b):
    return m.sqdist(a, b)


def _quasi(m, x, y, z, w):
    return combine(_sq(m, x, w), _sq(m, y, z), _sq(m, x, z), _sq(m, y, w))


def quasi_inner_raw(m, x, y, z, w):
    """Batched product of ``x -> y`` and ``z -> w`` on raw coordinates."""
    return _quasi(m, np.asarray(x, float), np.asarray(y, float),
                  np.asarray(z, float), np.asarray(w, float))


def quasi_inner(s1: GeodesicSegment, s2: GeodesicSegment) -> QuasiInnerResult:
    m = _check_same_manifold(s1.start, s1.end, s2.start, s2.end)
    x, y = s1.start.coords, s1.end.coords
    z, w = s2.start.coords, s2.end.coords
    value = float(_quasi(m, x, y, z, w))
    l1 = float(m.dist(x, y))
    l2 = float(m.dist(z, w))
    if l1 < DEGENERATE_LENGTH or l2 < DEGENERATE_LENGTH:
        return QuasiInnerResult(0.0, None)
    return QuasiInnerResult(value, value / (l1 * l2))


def quasi_add_check_raw(m, x, y, z, u, w):
    """Batched additivity residual ``|<xz,uw> - <xy,uw> - <yz,uw>|``."""
    return np.abs(_quasi(m, x, z, u, w) - _quasi(m, x, y, u, w) - _quasi(m, y, z, u, w))


def quasi_add_check(x: ManifoldPoint, y: ManifoldPoint, z: ManifoldPoint,
                    u: ManifoldPoint, w: ManifoldPoint) -> float:
    """Residual of splitting ``x -> z`` at ``y`` against the segment ``u -> w``."""
    m = _check_same_manifold(x, y, z, u, w)
    return float(quasi_add_check_raw(m, x.coords, y.coords, z.coords, u.coords, w.coords))


def compare_to_tangent_raw(m, x, y, z):
    """Batched ``(<xy, xz>, <log_x y, log_x z>_x)``."""
    quasi = _quasi(m, x, y, x, z)
    tangent = m.inner(x, m.log(x, y), m.log(x, z))
    return quasi, tangent


def compare_to_tangent(x: ManifoldPoint, y: ManifoldPoint, z: ManifoldPoint):
    """Return ``(quasi, tangent)``; on a Hadamard manifold ``quasi <= tangent``."""
    m = _check_same_manifold(x, y, z)
    quasi = quasi_inner(GeodesicSegment(x, y), GeodesicSegment(x, z)).value
    tangent = metric_inner(log_map(x, y), log_map(x, z))
    return quasi, tangent


def q_convexity_gap(f, x: ManifoldPoint, y: ManifoldPoint, mu: float = 0.0) -> float:
    """Slack of the q-convexity inequality of ``f`` at ``y`` towards ``x``.

    ``f(x) - f(y) - <y Exp_y(grad f(y)), y x> - mu/2 d(x, y)^2``; nonnegative
    whenever ``f`` is geodesically convex with parameter ``mu``.
    """
    _check_same_manifold(x, y)
    g = f.grad(y)
    tip = exp_map(g)
    q = quasi_inner(GeodesicSegment(y, tip), GeodesicSegment(y, x)).value
    d = float(y.manifold.dist(x.coords, y.coords))
    return float(f.value(x) - f.value(y) - q - 0.5 * mu * d * d)
