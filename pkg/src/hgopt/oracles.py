"""Independent oracles for testing: finite differences, certified reference
minimizers and the appendix inequality checkers.

``finite_diff_gradient`` only ever calls the value oracle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ManifoldPoint, NumericalFailure, TangentVector
from .manifolds import WarpedProduct
from .solvers import InnerConfig, inner_gd

log = logging.getLogger(__name__)

REFERENCE_TOL = 1e-13
CERTIFICATE_MAX = 1e-12


def _coords(p):
    return p.coords if isinstance(p, ManifoldPoint) else np.asarray(p, float)


def _directional(value, m, x, e, h):
    fp = value(m.exp(x, h * e))
    fm = value(m.exp(x, -h * e))
    if not (math.isfinite(fp) and math.isfinite(fm)):
        raise NumericalFailure("non-finite value in finite differences")
    return (fp - fm) / (2.0 * h)


def finite_diff_gradient(value, x: ManifoldPoint, h=1e-5, richardson=None) -> TangentVector:
    """Central-difference gradient along an orthonormal frame at ``x``.

    Parameters
    ----------
    value : callable
        Value oracle, called on raw coordinates.
    h : float
        Step length along each frame direction.
    richardson : bool, optional
        Combine steps ``h`` and ``h/2`` as ``(4 D(h/2) - D(h)) / 3``.  Defaults to
        on for the warped product.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    m = x.manifold
    if richardson is None:
        richardson = isinstance(m, WarpedProduct)
    xc = x.coords
    frame = m.frame(xc)
    coef = np.empty(len(frame))
    for i, e in enumerate(frame):
        d1 = _directional(value, m, xc, e, h)
        if richardson:
            d2 = _directional(value, m, xc, e, 0.5 * h)
            d1 = (4.0 * d2 - d1) / 3.0
        coef[i] = d1
    return TangentVector(x, np.tensordot(coef, frame, axes=1))


@dataclass
class ReferenceSolution:
    point: ManifoldPoint
    value: float
    certificate: float
    iterations: int
    trail: list = field(default_factory=list, repr=False)


def reference_minimize(f, x0, grad_tol=REFERENCE_TOL, max_iters=200_000) -> ReferenceSolution:
    """High-accuracy minimizer of a strongly convex ``f``.

    Raises :class:`NumericalFailure` if the final gradient norm exceeds
    ``CERTIFICATE_MAX``; never returns an uncertified value.
    """
    m = f.manifold
    cfg = InnerConfig(grad_tol=grad_tol, max_inner_iters=max_iters)
    res = inner_gd(f, _coords(x0), cfg, record=True)
    z = res.point
    cert = float(m.norm(z, f.grad(z)))
    log.debug("reference solve: %d iterations, certificate %.3e", res.iterations, cert)
    if not cert <= CERTIFICATE_MAX:
        raise NumericalFailure(f"reference solve not certified (grad norm {cert:.3e})", cert)
    return ReferenceSolution(ManifoldPoint(z, m), f.value(z), cert, res.iterations, res.values)


@dataclass
class AppendixReport:
    a1_slack: np.ndarray
    a2_slack: np.ndarray

    @property
    def worst_a1(self):
        return float(np.min(self.a1_slack)) if len(self.a1_slack) else float("inf")

    @property
    def worst_a2(self):
        return float(np.min(self.a2_slack)) if len(self.a2_slack) else float("inf")

    def passed(self, tol=1e-8):
        return self.worst_a1 >= -tol and self.worst_a2 >= -tol


def appendix_inequality_check(f, points, fstar, L=None, mu=None) -> AppendixReport:
    """Slacks of the two gradient inequalities at each point.

    A1: ``f(x) - ||grad f(x)||^2 / (2L) - f*`` (needs a valid local ``L``).
    A2: ``(2/mu) ||grad f(x)||^2 - (f(x) - f*)``.
    Negative slack is a violation; nothing is raised.
    """
    m = f.manifold
    mu = f.mu if mu is None else mu
    L = f.L if L is None else L
    a1, a2 = [], []
    for p in points:
        x = _coords(p)
        fx = f.value(x)
        g = f.grad(x)
        gg = float(m.inner(x, g, g))
        if L is not None:
            a1.append(fx - gg / (2.0 * L) - fstar)
        if mu:
            a2.append(2.0 / mu * gg - (fx - fstar))
    return AppendixReport(np.array(a1), np.array(a2))
