import numpy as np
import pytest

from hgopt.geometry import ContractViolation, ManifoldPoint, distance, geodesic_point
from hgopt.manifolds import EuclideanSpace, HyperbolicSpace, SpdManifold, WarpedProduct
from hgopt.objectives import (
    frechet_mean_objective,
    philox,
    prox_closed_form,
    squared_distance_objective,
    stochastic_frechet,
)
from hgopt.oracles import finite_diff_gradient, reference_minimize
from hgopt.solvers import prox_residual

H2 = HyperbolicSpace(2)
R2 = EuclideanSpace(2)


def pts(m, n, seed=0, radius=1.0):
    rng = philox(seed)
    return [m.point(m.random_point(rng, radius)) for _ in range(n)]


def test_philox_streams_are_independent_and_repeatable():
    a = philox(3, 0).standard_normal(4)
    assert np.array_equal(a, philox(3, 0).standard_normal(4))
    assert not np.array_equal(a, philox(3, 1).standard_normal(4))


@pytest.mark.parametrize("m", [R2, H2, SpdManifold(2), WarpedProduct("exp_r2")])
def test_sqdist_gradient_zero_at_anchor(m):
    a = pts(m, 1)[0]
    f = squared_distance_objective(a)
    assert np.all(f.grad(a).coords == 0.0)
    assert f.value(a) == 0.0


def test_sqdist_flat_gradient():
    f = squared_distance_objective(R2.point([0.0, 0.0]))
    np.testing.assert_allclose(f.grad(R2.point([1.0, 2.0])).coords, [1.0, 2.0])


def test_sqdist_hyperbolic_directional_derivatives():
    rng = philox(2)
    a, z = pts(H2, 2, seed=1, radius=1.5)
    f = squared_distance_objective(a)
    g = f.grad(z).coords
    h = 1e-6
    for _ in range(20):
        v = H2.random_tangent(rng, z.coords, 1.0)
        v /= float(H2.norm(z.coords, v))
        fd = (f.value(H2.exp(z.coords, h * v)) - f.value(H2.exp(z.coords, -h * v))) / (2 * h)
        an = float(H2.inner(z.coords, g, v))
        assert abs(fd - an) <= 1e-5 * max(1.0, float(H2.norm(z.coords, g)))


def test_frechet_single_anchor_is_sqdist():
    a = pts(H2, 1)[0]
    f = frechet_mean_objective([a])
    g = squared_distance_objective(a)
    z = pts(H2, 1, seed=5)[0]
    assert f.value(z) == g.value(z)
    assert f.name == "sqdist"


def test_frechet_flat_two_anchors():
    f = frechet_mean_objective([R2.point([0.0, 0.0]), R2.point([2.0, 0.0])])
    np.testing.assert_allclose(f.minimizer.coords, [1.0, 0.0])
    # unnormalized weights (1, 1) give F* = 0.5 * (1 + 1) = 1; normalized weights halve it
    f1 = frechet_mean_objective([R2.point([0.0, 0.0]), R2.point([2.0, 0.0])], weights=[1.0, 1.0])
    assert f1.value(R2.point([1.0, 0.0])) == pytest.approx(0.5)


def test_frechet_hyperbolic_two_point_mean_is_midpoint():
    a, b = pts(H2, 2, seed=3, radius=2.0)
    f = frechet_mean_objective([a, b])
    ref = reference_minimize(f, a)
    mid = geodesic_point(a, b, 0.5)
    assert distance(ref.point, mid) <= 1e-10
    assert float(H2.norm(mid.coords, f.grad(mid).coords)) <= 1e-8


def test_frechet_zero_weights_dropped_and_validation():
    A = pts(H2, 3)
    f = frechet_mean_objective(A, weights=[1.0, 0.0, 3.0])
    assert len(f.anchors) == 2
    np.testing.assert_allclose(f.weights, [0.25, 0.75])
    with pytest.raises(ContractViolation):
        frechet_mean_objective(A, weights=[1.0, -1.0, 1.0])
    with pytest.raises(ContractViolation):
        frechet_mean_objective([])


def test_stochastic_full_average_equals_mean():
    A = pts(H2, 5, seed=4, radius=1.5)
    F = stochastic_frechet(A, seed=1, samples=20)
    x = pts(H2, 1, seed=9)[0]
    comps = sum(F.component(x, i)[1] for i in range(5)) / 5
    np.testing.assert_allclose(comps, F.mean.grad(x).coords, atol=1e-10)


def test_stochastic_single_repeated_anchor_has_zero_variance():
    a = pts(H2, 1)[0]
    F = stochastic_frechet([a, a, a], seed=0, samples=10)
    assert F.variance_at(pts(H2, 1, seed=3)[0]) == pytest.approx(0.0, abs=1e-12)
    assert F.variance_bound == pytest.approx(0.0, abs=1e-12)


def test_stochastic_variance_at_minimizer_monte_carlo():
    m = H2
    o = m.point(m.origin())
    # four anchors at mutual distance about one
    A = [m.point(m.exp(o.coords, 0.6 * np.array([0.0, np.cos(t), np.sin(t)]))) for t in (0, 1.6, 3.2, 4.8)]
    F = stochastic_frechet(A, seed=2, samples=10)
    xs = reference_minimize(F.mean, A[0]).point
    exact = F.variance_at(xs)
    draw = F.sampler(7)
    g = F.mean.grad(xs).coords
    sq = []
    for _ in range(100_000 // 100):
        for _ in range(100):
            v = F.component(xs, draw())[1] - g
            sq.append(float(m.inner(xs.coords, v, v)))
    mc = float(np.mean(sq))
    assert 0.0 < exact < np.inf
    assert mc == pytest.approx(exact, rel=0.02)


def test_prox_closed_form_flat_and_limit():
    m = EuclideanSpace(1)
    f = squared_distance_objective(m.point([1.0]))
    x = m.point([0.0])
    assert prox_closed_form(f, x, 1.0).coords[0] == pytest.approx(0.5)
    assert prox_closed_form(f, x, 1e-12).coords[0] == pytest.approx(0.0, abs=1e-11)


def test_prox_closed_form_residual_hyperbolic():
    rng = philox(6)
    for _ in range(10):
        a, x = pts(H2, 2, seed=int(rng.integers(1000)), radius=2.0)
        f = squared_distance_objective(a)
        eta = float(rng.uniform(0.1, 3.0))
        y = prox_closed_form(f, x, eta)
        assert prox_residual(H2, f, x.coords, y.coords, eta) <= 1e-8


def test_prox_closed_form_rejects_frechet():
    f = frechet_mean_objective(pts(H2, 3))
    with pytest.raises(ContractViolation):
        prox_closed_form(f, pts(H2, 1)[0], 1.0)


def test_local_smoothness_flat_quadratic():
    f = frechet_mean_objective(pts(R2, 3))
    L = f.local_smoothness(R2.origin(), 2.0, philox(0), samples=50, safety=1.0)
    assert L == pytest.approx(1.0, abs=1e-9)


def test_grad_rejects_foreign_point():
    f = squared_distance_objective(pts(H2, 1)[0])
    with pytest.raises(ContractViolation):
        f.grad(HyperbolicSpace(2).point([1.0, 0.0, 0.0]))


def test_gradient_matches_finite_differences_spd():
    m = SpdManifold(3)
    f = frechet_mean_objective(pts(m, 4, radius=1.0), weights=[1, 2, 3, 4])
    x = pts(m, 1, seed=8)[0]
    fd = finite_diff_gradient(f._value, x).coords
    g = f.grad(x).coords
    assert float(m.norm(x.coords, fd - g)) <= 1e-6 * float(m.norm(x.coords, g))
