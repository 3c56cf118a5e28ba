"""Two-dimensional warped product ``I x_phi R`` with metric ``dr^2 + phi(r)^2 dtheta^2``.

With ``phi`` convex and a one-dimensional fiber the curvature is nonpositive
and can be unbounded below (``phi(r) = exp(r^2)``).  Geodesics are
integrated with fixed-step classical RK4; ``log`` is computed by damped
Newton shooting on the initial velocity, with the Jacobian of the flow
obtained from the variational equations integrated alongside the geodesic.
The kernels are compiled with numba and cached on disk; they dispatch on a
small integer code identifying the warp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..geometry import (
    DomainExitError,
    ManifoldPoint,
    Manifold,
    NumericalFailure,
    TangentVector,
    _check_owner,
)

OK, DOMAIN_EXIT, NO_CONVERGENCE, SINGULAR = 0, 1, 2, 3

DEFAULT_MIN_STEPS = 200
DEFAULT_MAX_STEP = 1e-2
DEFAULT_SHOOT_TOL = 1e-9
DEFAULT_MAX_NEWTON = 100
QUICK_NEWTON = 12
COARSE_STEPS = 48
COARSE_MAX_STEP = 0.1
COARSE_TOL = 1e-6
COARSE_SCALES = 5
COARSE_SPEEDS = 9


FLAT, COSH, EXP_R2, T2 = 0, 1, 2, 3


@numba.njit(cache=True)
def _phi(code, r):
    if code == COSH:
        return math.cosh(r)
    if code == EXP_R2:
        return math.exp(r * r)
    if code == T2:
        return r * r
    return 1.0


@numba.njit(cache=True)
def _dphi(code, r):
    if code == COSH:
        return math.sinh(r)
    if code == EXP_R2:
        return 2.0 * r * math.exp(r * r)
    if code == T2:
        return 2.0 * r
    return 0.0


@numba.njit(cache=True)
def _ddphi(code, r):
    if code == COSH:
        return math.cosh(r)
    if code == EXP_R2:
        return (2.0 + 4.0 * r * r) * math.exp(r * r)
    if code == T2:
        return 2.0
    return 0.0


@dataclass(frozen=True)
class Warp:
    """Warping function ``phi`` with its first two derivatives.

    The compiled kernels dispatch on ``code``; ``phi``, ``dphi`` and
    ``ddphi`` are the same functions evaluated from Python.
    """

    name: str
    code: int
    interval: tuple = (-math.inf, math.inf)

    def phi(self, r):
        return _phi(self.code, float(r))

    def dphi(self, r):
        return _dphi(self.code, float(r))

    def ddphi(self, r):
        return _ddphi(self.code, float(r))

    def values(self, r):
        r = np.asarray(r, float)
        f = np.vectorize(lambda s: (self.phi(s), self.dphi(s), self.ddphi(s)), otypes=[float] * 3)
        return f(r)


WARPS = {
    "flat": Warp("flat", FLAT),
    "cosh": Warp("cosh", COSH),
    "exp_r2": Warp("exp_r2", EXP_R2),
    # positive and convex on (0, 1) but incomplete there: geodesics can leave the chart
    "t2": Warp("t2", T2, (0.0, 1.0)),
}


@numba.njit(cache=True)
def _inside(r, lo, hi):
    return math.isfinite(r) and lo < r < hi


@numba.njit(cache=True)
def _n_steps(code, xr, vr, vt, min_steps, max_h):
    p = _phi(code, xr)
    length = math.sqrt(vr * vr + p * p * vt * vt)
    return max(min_steps, int(math.ceil(length / max_h)))


@numba.njit(cache=True)
def _accel(code, r, vr, vt):
    p = _phi(code, r)
    dp = _dphi(code, r)
    return p * dp * vt * vt, -2.0 * dp / p * vr * vt


@numba.njit(cache=True)
def _flow(code, r, t, vr, vt, n, lo, hi):
    h = 1.0 / n
    for _ in range(n):
        a1r, a1t = _accel(code, r, vr, vt)
        r2 = r + 0.5 * h * vr
        vr2 = vr + 0.5 * h * a1r
        vt2 = vt + 0.5 * h * a1t
        if not _inside(r2, lo, hi):
            return r, t, vr, vt, False
        a2r, a2t = _accel(code, r2, vr2, vt2)
        r3 = r + 0.5 * h * vr2
        vr3 = vr + 0.5 * h * a2r
        vt3 = vt + 0.5 * h * a2t
        if not _inside(r3, lo, hi):
            return r, t, vr, vt, False
        a3r, a3t = _accel(code, r3, vr3, vt3)
        r4 = r + h * vr3
        vr4 = vr + h * a3r
        vt4 = vt + h * a3t
        if not _inside(r4, lo, hi):
            return r, t, vr, vt, False
        a4r, a4t = _accel(code, r4, vr4, vt4)
        r = r + h / 6.0 * (vr + 2.0 * vr2 + 2.0 * vr3 + vr4)
        t = t + h / 6.0 * (vt + 2.0 * vt2 + 2.0 * vt3 + vt4)
        vr = vr + h / 6.0 * (a1r + 2.0 * a2r + 2.0 * a3r + a4r)
        vt = vt + h / 6.0 * (a1t + 2.0 * a2t + 2.0 * a3t + a4t)
        if not (_inside(r, lo, hi) and math.isfinite(vt) and math.isfinite(vr)):
            return r, t, vr, vt, False
    return r, t, vr, vt, True


@numba.njit(cache=True)
def _rhs_jac(code, y, out):
    # y = [r, t, vr, vt, Jr0, Jt0, Jvr0, Jvt0, Jr1, Jt1, Jvr1, Jvt1]
    r = y[0]
    vr = y[2]
    vt = y[3]
    p = _phi(code, r)
    dp = _dphi(code, r)
    ddp = _ddphi(code, r)
    q = dp / p
    out[0] = vr
    out[1] = vt
    out[2] = p * dp * vt * vt
    out[3] = -2.0 * q * vr * vt
    ar_r = (dp * dp + p * ddp) * vt * vt
    ar_vt = 2.0 * p * dp * vt
    at_r = -2.0 * (ddp / p - q * q) * vr * vt
    at_vr = -2.0 * q * vt
    at_vt = -2.0 * q * vr
    for c in range(2):
        o = 4 + 4 * c
        jr = y[o]
        jvr = y[o + 2]
        jvt = y[o + 3]
        out[o] = jvr
        out[o + 1] = jvt
        out[o + 2] = ar_r * jr + ar_vt * jvt
        out[o + 3] = at_r * jr + at_vr * jvr + at_vt * jvt


@numba.njit(cache=True)
def _flow_jac(code, r, t, vr, vt, n, lo, hi):
    y = np.zeros(12)
    y[0] = r
    y[1] = t
    y[2] = vr
    y[3] = vt
    y[6] = 1.0
    y[11] = 1.0
    k1 = np.empty(12)
    k2 = np.empty(12)
    k3 = np.empty(12)
    k4 = np.empty(12)
    tmp = np.empty(12)
    h = 1.0 / n
    for _ in range(n):
        _rhs_jac(code, y, k1)
        for i in range(12):
            tmp[i] = y[i] + 0.5 * h * k1[i]
        if not _inside(tmp[0], lo, hi):
            return y, False
        _rhs_jac(code, tmp, k2)
        for i in range(12):
            tmp[i] = y[i] + 0.5 * h * k2[i]
        if not _inside(tmp[0], lo, hi):
            return y, False
        _rhs_jac(code, tmp, k3)
        for i in range(12):
            tmp[i] = y[i] + h * k3[i]
        if not _inside(tmp[0], lo, hi):
            return y, False
        _rhs_jac(code, tmp, k4)
        for i in range(12):
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not (_inside(y[0], lo, hi) and math.isfinite(y[2]) and math.isfinite(y[3])):
            return y, False
    return y, True


@numba.njit(cache=True)
def _residual(code, y, yr, yt):
    p = _phi(code, yr)
    fr = y[0] - yr
    ft = y[1] - yt
    return math.sqrt(fr * fr + p * p * ft * ft), fr, ft


@numba.njit(cache=True)
def _newton(code, xr, xt, yr, yt, vr, vt, lo, hi, tol, max_iter, min_steps, max_h):
    n = _n_steps(code, xr, vr, vt, min_steps, max_h)
    y, ok = _flow_jac(code, xr, xt, vr, vt, n, lo, hi)
    if not ok:
        return vr, vt, math.inf, DOMAIN_EXIT
    res, fr, ft = _residual(code, y, yr, yt)
    rescaled = 0
    polished = False
    for _ in range(max_iter):
        if res <= tol:
            n_need = _n_steps(code, xr, vr, vt, min_steps, max_h)
            if n_need != n and rescaled < 3:
                n = n_need
                rescaled += 1
                y, ok = _flow_jac(code, xr, xt, vr, vt, n, lo, hi)
                if not ok:
                    return vr, vt, math.inf, DOMAIN_EXIT
                res, fr, ft = _residual(code, y, yr, yt)
                continue
            if polished or res <= 1e-3 * tol:
                return vr, vt, res, OK
            polished = True
        j00 = y[4]
        j10 = y[5]
        j01 = y[8]
        j11 = y[9]
        det = j00 * j11 - j01 * j10
        if not (math.isfinite(det) and det != 0.0):
            return vr, vt, res, SINGULAR
        dvr = -(j11 * fr - j01 * ft) / det
        dvt = -(-j10 * fr + j00 * ft) / det
        lam = 1.0
        accepted = False
        for _ls in range(24):
            y_try, ok = _flow_jac(code, xr, xt, vr + lam * dvr, vt + lam * dvt, n, lo, hi)
            if ok:
                res_try, fr_try, ft_try = _residual(code, y_try, yr, yt)
                if res_try < (1.0 - 1e-4 * lam) * res:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            if res <= tol:
                return vr, vt, res, OK
            return vr, vt, res, NO_CONVERGENCE
        vr += lam * dvr
        vt += lam * dvt
        y = y_try
        res = res_try
        fr = fr_try
        ft = ft_try
    if res <= tol:
        return vr, vt, res, OK
    return vr, vt, res, NO_CONVERGENCE


@numba.njit(cache=True)
def _coarse_start(code, xr, xt, yr, yt, lo, hi):
    # cheap low-resolution flows pick a starting velocity near the basin
    dr = yr - xr
    dt = yt - xt
    px = _phi(code, xr)
    pmin = min(px, _phi(code, yr))
    rw = xr
    span_lo = min(xr, yr) - 2.0 - abs(dr)
    span_hi = max(xr, yr) + 2.0 + abs(dr)
    if math.isfinite(lo):
        span_lo = max(span_lo, lo + 1e-6)
    if math.isfinite(hi):
        span_hi = min(span_hi, hi - 1e-6)
    for i in range(65):
        r = span_lo + (span_hi - span_lo) * i / 64.0
        pr = _phi(code, r)
        if pr < pmin:
            pmin = pr
            rw = r
    reach = max(abs(xr - rw), abs(yr - rw)) + 0.25
    best_r = dr
    best_t = dt
    best = math.inf
    for i in range(COARSE_SCALES):
        scale = (pmin / px) ** (2.0 * i / (COARSE_SCALES - 1))
        for j in range(COARSE_SPEEDS):
            vr = dr + 2.0 * reach * (2.0 * j / (COARSE_SPEEDS - 1) - 1.0)
            vt = dt * scale
            er, et, _, _, ok = _flow(code, xr, xt, vr, vt, COARSE_STEPS, lo, hi)
            if not ok:
                continue
            py = _phi(code, yr)
            res = math.sqrt((er - yr) ** 2 + py * py * (et - yt) ** 2)
            if res < best:
                best = res
                best_r = vr
                best_t = vt
    return best_r, best_t


@numba.njit(cache=True)
def _shoot(code, xr, xt, yr, yt, lo, hi, tol, max_iter, min_steps, max_h):
    dr = yr - xr
    dt = yt - xt
    if dr == 0.0 and dt == 0.0:
        return 0.0, 0.0, 0.0, OK
    quick = min(max_iter, QUICK_NEWTON)
    vr, vt, res, status = _newton(code, xr, xt, yr, yt, dr, dt, lo, hi, COARSE_TOL, quick,
                                 COARSE_STEPS, COARSE_MAX_STEP)
    if status != OK:
        gr, gt = _coarse_start(code, xr, xt, yr, yt, lo, hi)
        vr, vt, res, status = _newton(code, xr, xt, yr, yt, gr, gt, lo, hi, COARSE_TOL, max_iter,
                                     COARSE_STEPS, COARSE_MAX_STEP)
    if status == OK:
        vr, vt, res, status = _newton(code, xr, xt, yr, yt, vr, vt, lo, hi, tol, max_iter, min_steps, max_h)
        if status == OK:
            return vr, vt, res, status
    best_res = res
    best_status = status
    # continuation along the coordinate segment from x to y
    for k_total in (4, 16, 64):
        cvr = dr / k_total
        cvt = dt / k_total
        pvr = 0.0
        pvt = 0.0
        failed = False
        for k in range(1, k_total + 1):
            gr = 2.0 * cvr - pvr if k > 1 else cvr
            gt = 2.0 * cvt - pvt if k > 1 else cvt
            tr = xr + dr * k / k_total
            tt = xt + dt * k / k_total
            nvr, nvt, res, status = _newton(code, xr, xt, tr, tt, gr, gt, lo, hi, tol, max_iter, min_steps, max_h)
            if status != OK:
                failed = True
                break
            pvr, pvt = cvr, cvt
            cvr, cvt = nvr, nvt
        if not failed:
            return cvr, cvt, res, OK
        if res < best_res:
            best_res = res
            best_status = status
    return dr, dt, best_res, best_status


@numba.njit(cache=True)
def _exp_batch(code, X, V, lo, hi, min_steps, max_h):
    m = X.shape[0]
    out = np.empty((m, 2))
    status = np.zeros(m, dtype=np.int64)
    for i in range(m):
        vr = V[i, 0]
        vt = V[i, 1]
        if vr == 0.0 and vt == 0.0:
            out[i, 0] = X[i, 0]
            out[i, 1] = X[i, 1]
            continue
        n = _n_steps(code, X[i, 0], vr, vt, min_steps, max_h)
        r, t, _, _, ok = _flow(code, X[i, 0], X[i, 1], vr, vt, n, lo, hi)
        out[i, 0] = r
        out[i, 1] = t
        if not ok:
            status[i] = DOMAIN_EXIT
    return out, status


@numba.njit(cache=True)
def _log_batch(code, X, Y, lo, hi, tol, max_iter, min_steps, max_h):
    m = X.shape[0]
    out = np.empty((m, 2))
    res = np.empty(m)
    status = np.empty(m, dtype=np.int64)
    for i in range(m):
        vr, vt, r, s = _shoot(code, X[i, 0], X[i, 1], Y[i, 0], Y[i, 1], lo, hi, tol, max_iter, min_steps, max_h)
        out[i, 0] = vr
        out[i, 1] = vt
        res[i] = r
        status[i] = s
    return out, res, status


@numba.njit(cache=True)
def _transport_flow(code, r, t, vr, vt, wr, wt, n, lo, hi):
    h = 1.0 / n
    y = np.array([r, t, vr, vt, wr, wt])
    k = np.empty((4, 6))
    tmp = np.empty(6)
    for _ in range(n):
        for s in range(4):
            if s == 0:
                tmp[:] = y
            elif s < 3:
                tmp[:] = y + 0.5 * h * k[s - 1]
            else:
                tmp[:] = y + h * k[2]
            if not _inside(tmp[0], lo, hi):
                return y, False
            p = _phi(code, tmp[0])
            dp = _dphi(code, tmp[0])
            q = dp / p
            k[s, 0] = tmp[2]
            k[s, 1] = tmp[3]
            k[s, 2] = p * dp * tmp[3] * tmp[3]
            k[s, 3] = -2.0 * q * tmp[2] * tmp[3]
            k[s, 4] = p * dp * tmp[3] * tmp[5]
            k[s, 5] = -q * (tmp[2] * tmp[5] + tmp[3] * tmp[4])
        y += h / 6.0 * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
    return y, True


@numba.njit(cache=True)
def _transp_batch(code, X, Y, W, lo, hi, tol, max_iter, min_steps, max_h):
    m = X.shape[0]
    out = np.empty((m, 2))
    res = np.empty(m)
    status = np.zeros(m, dtype=np.int64)
    for i in range(m):
        vr, vt, r, s = _shoot(code, X[i, 0], X[i, 1], Y[i, 0], Y[i, 1], lo, hi, tol, max_iter, min_steps, max_h)
        res[i] = r
        status[i] = s
        if s != OK:
            out[i] = W[i]
            continue
        if vr == 0.0 and vt == 0.0:
            out[i] = W[i]
            continue
        n = _n_steps(code, X[i, 0], vr, vt, min_steps, max_h)
        y, ok = _transport_flow(code, X[i, 0], X[i, 1], vr, vt, W[i, 0], W[i, 1], n, lo, hi)
        if not ok:
            status[i] = DOMAIN_EXIT
        out[i, 0] = y[4]
        out[i, 1] = y[5]
    return out, res, status


@numba.njit(cache=True)
def _path(code, r, t, vr, vt, n, lo, hi):
    out = np.empty((n + 1, 4))
    out[0, 0] = r
    out[0, 1] = t
    out[0, 2] = vr
    out[0, 3] = vt
    h = 1.0 / n
    for i in range(n):
        # one RK4 step of size h == flow over [0, 1] of the velocity scaled by h
        r, t, svr, svt, ok = _flow(code, r, t, vr * h, vt * h, 1, lo, hi)
        vr = svr / h
        vt = svt / h
        out[i + 1, 0] = r
        out[i + 1, 1] = t
        out[i + 1, 2] = vr
        out[i + 1, 3] = vt
        if not ok:
            return out[: i + 2], False
    return out, True



class WarpedProduct(Manifold):
    """Warped product ``I x_phi R``; points are ``(r, theta)`` pairs.

    Parameters
    ----------
    warp : Warp or str
        Warping function; a name from ``WARPS`` or one of its values.
    interval : tuple, optional
        Open interval ``I``.  Defaults to the warp's natural interval.
    min_steps, max_step : int, float
        RK4 discretization: ``max(min_steps, ceil(|v| / max_step))`` steps
        cover a geodesic of initial speed ``|v|``.
    shoot_tol : float
        Metric residual at which Newton shooting stops.
    """

    name = "warped"
    point_shape = (2,)
    dim = 2

    def __init__(self, warp="exp_r2", interval=None, min_steps=DEFAULT_MIN_STEPS,
                 max_step=DEFAULT_MAX_STEP, shoot_tol=DEFAULT_SHOOT_TOL,
                 max_newton=DEFAULT_MAX_NEWTON):
        super().__init__()
        if isinstance(warp, str):
            if warp not in WARPS:
                raise ValueError(f"unknown warp {warp!r}; choose from {sorted(WARPS)}")
            warp = WARPS[warp]
        self.warp = warp
        lo, hi = interval if interval is not None else warp.interval
        if not lo < hi:
            raise ValueError(f"empty interval ({lo}, {hi})")
        self.interval = (float(lo), float(hi))
        self.min_steps = int(min_steps)
        self.max_step = float(max_step)
        self.shoot_tol = float(shoot_tol)
        self.max_newton = int(max_newton)
        self._check_warp()

    def _check_warp(self):
        lo, hi = self.interval
        a = lo if math.isfinite(lo) else -5.0
        b = hi if math.isfinite(hi) else 5.0
        r = np.linspace(a, b, 401)[1:-1]
        p, _, ddp = self.warp.values(r)
        if np.any(p <= 0) or np.any(ddp < -1e-12):
            raise ValueError(f"warp {self.warp.name!r} must be positive and convex on {self.interval}")

    # -- helpers ------------------------------------------------------------
    def phi(self, r):
        return self.warp.values(r)[0]

    def _batch(self, *arrays):
        arrays = np.broadcast_arrays(*[np.asarray(a, float) for a in arrays])
        shape = arrays[0].shape[:-1]
        flat = [np.ascontiguousarray(a.reshape(-1, 2)) for a in arrays]
        return shape, flat

    def _raise_on(self, status, res, what):
        if np.all(status == OK):
            return
        if np.any(status == DOMAIN_EXIT):
            raise DomainExitError(f"{what}: geodesic left the interval {self.interval}")
        worst = float(np.max(np.where(status == OK, 0.0, res)))
        raise NumericalFailure(f"{what}: shooting did not converge (residual {worst:.3e})", worst)

    # -- primitives ---------------------------------------------------------
    def inner(self, x, u, v):
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        p = self.phi(x[..., 0])
        return u[..., 0] * v[..., 0] + p * p * u[..., 1] * v[..., 1]

    def point_residual(self, x):
        r = np.asarray(x, float)[..., 0]
        lo, hi = self.interval
        return 0.0 if np.all((r > lo) & (r < hi)) and np.all(np.isfinite(x)) else np.inf

    def exp(self, x, v):
        shape, (xf, vf) = self._batch(x, v)
        out, status = _exp_batch(self.warp.code, xf, vf, *self.interval, self.min_steps, self.max_step)
        self._raise_on(status, np.zeros(len(status)), "exp")
        return out.reshape(shape + (2,))

    def log(self, x, y):
        shape, (xf, yf) = self._batch(x, y)
        out, res, status = _log_batch(
            self.warp.code, xf, yf, *self.interval, self.shoot_tol, self.max_newton, self.min_steps, self.max_step
        )
        self._raise_on(status, res, "log")
        return out.reshape(shape + (2,))

    def transp(self, x, y, v):
        shape, (xf, yf, vf) = self._batch(x, y, v)
        out, res, status = _transp_batch(
            self.warp.code, xf, yf, vf, *self.interval, self.shoot_tol, self.max_newton, self.min_steps, self.max_step
        )
        self._raise_on(status, res, "parallel transport")
        return out.reshape(shape + (2,))

    def frame(self, x):
        return np.array([[1.0, 0.0], [0.0, 1.0 / float(self.phi(x[0]))]])

    def origin(self):
        lo, hi = self.interval
        if lo < 0.0 < hi:
            return np.zeros(2)
        if math.isfinite(lo) and math.isfinite(hi):
            return np.array([0.5 * (lo + hi), 0.0])
        return np.array([lo + 1.0 if math.isfinite(lo) else hi - 1.0, 0.0])

    def geodesic_path(self, x, v, n=None):
        """States ``(r, theta, r', theta')`` at the RK4 nodes along ``Exp_x(tau v)``."""
        x = np.asarray(x, float)
        v = np.asarray(v, float)
        if n is None:
            n = _n_steps(self.warp.code, x[0], v[0], v[1], self.min_steps, self.max_step)
        out, ok = _path(self.warp.code, x[0], x[1], v[0], v[1], int(n), *self.interval)
        if not ok:
            raise DomainExitError(f"geodesic left the interval {self.interval}")
        return out

    def sectional_curvature_bound(self, region, samples=2001):
        return sectional_curvature_bound(self, region, samples)


def warped_geodesic_ode(state, warp):
    """Right-hand side of the geodesic equations of ``dr^2 + phi(r)^2 dtheta^2``."""
    if isinstance(warp, str):
        warp = WARPS[warp]
    r, _, vr, vt = state
    p, dp = warp.phi(r), warp.dphi(r)
    return np.array([vr, vt, p * dp * vt * vt, -2.0 * dp / p * vr * vt])


def sectional_curvature_bound(m: WarpedProduct, region, samples=2001):
    """Sampled lower bound ``min(-phi''/phi, -(phi'/phi)^2)`` over ``region``."""
    a, b = region
    lo, hi = m.interval
    if a < lo or b > hi:
        raise ValueError(f"region {region} not inside interval {m.interval}")
    r = np.linspace(a, b, samples)
    if a == lo:
        r = r[1:]
    if b == hi:
        r = r[:-1]
    p, dp, ddp = m.warp.values(r)
    return float(min(np.min(-ddp / p), np.min(-(dp / p) ** 2)))


def warped_log_shoot(x: ManifoldPoint, y: ManifoldPoint) -> TangentVector:
    m = x.manifold
    if not isinstance(m, WarpedProduct):
        raise TypeError("warped_log_shoot needs points on a WarpedProduct")
    _check_owner(m, y)
    return TangentVector(x, m.log(x.coords, y.coords))
