import math

import numpy as np
import pytest

from hgopt.geometry import (
    ContractViolation,
    DomainExitError,
    GeodesicSegment,
    ManifoldPoint,
    TangentVector,
    distance,
    exp_map,
    geodesic_point,
    log_map,
    metric_inner,
    parallel_transport,
)
from hgopt.manifolds import (
    EuclideanSpace,
    HyperbolicSpace,
    SpdManifold,
    WarpedProduct,
    sectional_curvature_bound,
    warped_geodesic_ode,
    warped_log_shoot,
)
from hgopt.objectives import philox

R2 = EuclideanSpace(2)
H2 = HyperbolicSpace(2)
SPD2 = SpdManifold(2)
C, S = math.cosh, math.sinh


def tv(m, base, v):
    return m.tangent(m.point(base), v)


# -- metric_inner ------------------------------------------------------------

def test_inner_flat_orthogonal():
    b = R2.point([3.0, -1.0])
    assert metric_inner(TangentVector(b, [1.0, 0.0]), TangentVector(b, [0.0, 1.0])) == 0.0


@pytest.mark.parametrize("m", [R2, H2, SPD2, WarpedProduct("exp_r2")])
def test_inner_zero_vector(m):
    x = m.point(m.origin())
    z = TangentVector(x, m.zero_tangent(x.coords))
    assert metric_inner(z, z) == 0.0


def test_inner_spd_at_identity():
    u = tv(SPD2, np.eye(2), [[1.0, 0.0], [0.0, 0.0]])
    assert metric_inner(u, u) == pytest.approx(1.0, abs=1e-15)


def test_inner_rejects_different_bases():
    u = TangentVector(R2.point([0.0, 0.0]), [1.0, 0.0])
    v = TangentVector(R2.point([1.0, 0.0]), [1.0, 0.0])
    with pytest.raises(ContractViolation):
        metric_inner(u, v)


# -- exp / log / distance ------------------------------------------------------

def test_exp_flat():
    y = exp_map(tv(R2, [0.0, 0.0], [3.0, 4.0]))
    np.testing.assert_array_equal(y.coords, [3.0, 4.0])


def test_exp_hyperboloid():
    y = exp_map(tv(H2, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]))
    np.testing.assert_allclose(y.coords, [C(1), S(1), 0.0], atol=1e-14)


def test_exp_warped_radial():
    m = WarpedProduct("exp_r2")
    y = exp_map(tv(m, [0.2, 0.7], [0.5, 0.0]))
    np.testing.assert_allclose(y.coords, [0.7, 0.7], atol=1e-10)


def test_log_flat():
    v = log_map(R2.point([1.0, 1.0]), R2.point([2.0, 3.0]))
    np.testing.assert_array_equal(v.coords, [1.0, 2.0])


@pytest.mark.parametrize("m", [R2, H2, SPD2, WarpedProduct("exp_r2")])
def test_log_same_point_is_zero(m):
    x = m.point(m.random_point(philox(1), 1.0))
    v = log_map(x, x)
    assert np.all(v.coords == 0.0)
    assert distance(x, x) == 0.0


def test_log_hyperboloid():
    v = log_map(H2.point([1.0, 0.0, 0.0]), H2.point([C(1), S(1), 0.0]))
    np.testing.assert_allclose(v.coords, [0.0, 1.0, 0.0], atol=1e-12)


def test_distance_hyperboloid():
    assert distance(H2.point([1.0, 0.0, 0.0]), H2.point([C(2), S(2), 0.0])) == pytest.approx(2.0, abs=1e-12)


def test_distance_spd():
    d = distance(SPD2.point(np.eye(2)), SPD2.point(np.diag([math.e, 1.0])))
    assert d == pytest.approx(1.0, abs=1e-12)


def test_distance_is_bitwise_symmetric():
    rng = philox(4)
    for m in (H2, SpdManifold(3), WarpedProduct("exp_r2")):
        X = np.array([m.random_point(rng, 1.5) for _ in range(20)])
        Y = np.array([m.random_point(rng, 1.5) for _ in range(20)])
        assert np.array_equal(m.dist(X, Y), m.dist(Y, X))


def test_curvature_scaling():
    m = HyperbolicSpace(2, curvature=-4.0)
    o = m.origin()
    v = np.array([0.0, 1.0, 0.0])
    assert float(m.dist(o, m.exp(o, v))) == pytest.approx(1.0, abs=1e-12)


# -- transport ---------------------------------------------------------------

def test_transport_flat_identity():
    v = TangentVector(R2.point([0.0, 0.0]), [1.0, 2.0])
    w = parallel_transport(v, R2.point([5.0, -3.0]))
    np.testing.assert_array_equal(w.coords, [1.0, 2.0])


@pytest.mark.parametrize("m", [H2, SPD2, WarpedProduct("exp_r2")])
def test_transport_to_same_point(m):
    rng = philox(2)
    x = m.point(m.random_point(rng, 1.0))
    v = TangentVector(x, m.random_tangent(rng, x.coords, 1.0))
    np.testing.assert_allclose(parallel_transport(v, x).coords, v.coords, atol=1e-12)


def test_transport_hyperboloid_normal_direction():
    v = tv(H2, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    w = parallel_transport(v, H2.point([C(1), S(1), 0.0]))
    np.testing.assert_allclose(w.coords, [0.0, 0.0, 1.0], atol=1e-12)


@pytest.mark.parametrize("m", [H2, SpdManifold(3), WarpedProduct("exp_r2")])
def test_transport_preserves_inner_products(m):
    rng = philox(3)
    for _ in range(10):
        x, y = m.random_point(rng, 1.2), m.random_point(rng, 1.2)
        u, v = m.random_tangent(rng, x, 1.0), m.random_tangent(rng, x, 1.0)
        tu, tv_ = m.transp(x, y, u), m.transp(x, y, v)
        assert float(m.inner(y, tu, tv_)) == pytest.approx(float(m.inner(x, u, v)), abs=1e-8)


# -- geodesic_point -----------------------------------------------------------

def test_geodesic_endpoints():
    x, y = H2.point([1.0, 0.0, 0.0]), H2.point([C(2), S(2), 0.0])
    assert geodesic_point(x, y, 0.0) is x
    assert geodesic_point(x, y, 1.0) is y


def test_geodesic_flat_midpoint():
    p = geodesic_point(R2.point([0.0, 0.0]), R2.point([2.0, 0.0]), 0.5)
    np.testing.assert_allclose(p.coords, [1.0, 0.0])


def test_geodesic_hyperboloid_midpoint():
    p = geodesic_point(H2.point([1.0, 0.0, 0.0]), H2.point([C(2), S(2), 0.0]), 0.5)
    np.testing.assert_allclose(p.coords, [C(1), S(1), 0.0], atol=1e-12)


def test_geodesic_rejects_t_outside_unit_interval():
    with pytest.raises(ContractViolation):
        geodesic_point(R2.point([0.0, 0.0]), R2.point([1.0, 0.0]), 1.5)


def test_segment_length_and_reverse():
    s = GeodesicSegment(H2.point([1.0, 0.0, 0.0]), H2.point([C(2), S(2), 0.0]))
    assert s.length() == pytest.approx(2.0, abs=1e-12)
    assert s.reversed().start is s.end


# -- contracts ---------------------------------------------------------------

def test_point_off_manifold_rejected():
    with pytest.raises(ContractViolation):
        H2.point([1.0, 1.0, 0.0])
    with pytest.raises(ContractViolation):
        SPD2.point([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(ContractViolation):
        R2.point([1.0, 2.0, 3.0])


def test_non_tangent_rejected():
    with pytest.raises(ContractViolation):
        tv(H2, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0])


def test_mixed_manifolds_rejected():
    with pytest.raises(ContractViolation):
        distance(R2.point([0.0, 0.0]), EuclideanSpace(2).point([0.0, 0.0]))


def test_points_are_immutable():
    x = R2.point([1.0, 2.0])
    with pytest.raises(ValueError):
        x.coords[0] = 5.0


# -- warped product -----------------------------------------------------------

def test_curvature_bound_flat():
    assert sectional_curvature_bound(WarpedProduct("flat"), (-1.0, 1.0)) == 0.0


def test_curvature_bound_cosh():
    assert sectional_curvature_bound(WarpedProduct("cosh"), (-1.0, 1.0)) == pytest.approx(-1.0, abs=1e-12)


def test_curvature_bound_exp_r2():
    assert sectional_curvature_bound(WarpedProduct("exp_r2"), (0.0, 3.0)) == pytest.approx(-38.0, abs=1e-9)


def test_geodesic_ode_radial_and_flat():
    np.testing.assert_array_equal(warped_geodesic_ode([0.3, 0.1, 0.7, 0.0], "exp_r2"), [0.7, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(warped_geodesic_ode([0.3, 0.1, 0.7, 0.4], "flat"), [0.7, 0.4, 0.0, 0.0])


def test_clairaut_invariant():
    m = WarpedProduct("exp_r2")
    x, v = np.array([0.1, 0.0]), np.array([0.6, 0.8])
    path = m.geodesic_path(x, v)
    c = m.phi(path[:, 0]) ** 2 * path[:, 3]
    assert np.max(np.abs(c - c[0])) < 1e-6


def test_warped_log_radial_and_identity():
    m = WarpedProduct("exp_r2")
    x, y = m.point([-0.2, 0.4]), m.point([0.5, 0.4])
    np.testing.assert_allclose(warped_log_shoot(x, y).coords, [0.7, 0.0], atol=1e-10)
    assert np.all(warped_log_shoot(x, x).coords == 0.0)


def test_warped_cosh_matches_hyperboloid():
    from hgopt.suites import cross_manifold_check

    for c in cross_manifold_check(200, philox(7)):
        assert c.passed, c.line()


def test_warped_domain_exit():
    m = WarpedProduct("t2")
    x = m.point(m.origin())
    with pytest.raises(DomainExitError):
        m.exp(x.coords, np.array([5.0, 0.0]))


def test_warped_rejects_unknown_warp():
    with pytest.raises((ValueError, KeyError)):
        WarpedProduct("sin")
