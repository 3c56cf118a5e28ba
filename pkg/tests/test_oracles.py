import numpy as np
import pytest

from hgopt.geometry import NumericalFailure, distance, geodesic_point
from hgopt.manifolds import EuclideanSpace, HyperbolicSpace, WarpedProduct
from hgopt.objectives import Objective, frechet_mean_objective, philox, squared_distance_objective
from hgopt.oracles import appendix_inequality_check, finite_diff_gradient, reference_minimize

H2 = HyperbolicSpace(2)


def pts(m, n, seed=0, radius=1.0):
    rng = philox(seed)
    return [m.point(m.random_point(rng, radius)) for _ in range(n)]


def test_fd_linear_function():
    m = EuclideanSpace(4)
    g = finite_diff_gradient(lambda x: float(x[0]), m.point([0.3, 1.0, -2.0, 0.0]))
    np.testing.assert_allclose(g.coords, [1.0, 0.0, 0.0, 0.0], atol=1e-10)


def test_fd_constant_function():
    x = pts(H2, 1)[0]
    g = finite_diff_gradient(lambda y: 2.5, x)
    assert np.max(np.abs(g.coords)) <= 1e-12


def test_fd_sqdist_hyperbolic():
    a, x = pts(H2, 2, seed=1, radius=1.5)
    f = squared_distance_objective(a)
    fd = finite_diff_gradient(f._value, x, h=1e-5).coords
    g = f.grad(x).coords
    assert float(H2.norm(x.coords, fd - g)) <= 1e-6 * float(H2.norm(x.coords, g))


def test_fd_never_calls_gradient():
    calls = []
    m = EuclideanSpace(2)
    f = Objective(m, lambda x: float(x @ x), lambda x: calls.append(1) or 2 * x)
    finite_diff_gradient(f._value, m.point([1.0, 1.0]))
    assert calls == []


def test_fd_warped_uses_richardson():
    m = WarpedProduct("exp_r2")
    a, x = pts(m, 2, seed=3)
    f = squared_distance_objective(a)
    fd = finite_diff_gradient(f._value, x).coords
    g = f.grad(x).coords
    assert float(m.norm(x.coords, fd - g)) <= 1e-3 * float(m.norm(x.coords, g))


def test_fd_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_diff_gradient(lambda y: 0.0, pts(H2, 1)[0], h=0.0)


def test_reference_sqdist():
    a, x = pts(H2, 2, seed=4)
    ref = reference_minimize(squared_distance_objective(a), x)
    assert distance(ref.point, a) <= 1e-12
    assert ref.certificate <= 1e-12


def test_reference_flat_weighted_average():
    m = EuclideanSpace(3)
    A = pts(m, 5, seed=5, radius=3.0)
    w = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    f = frechet_mean_objective(A, w)
    ref = reference_minimize(f, A[0])
    expect = (w / w.sum()) @ np.array([a.coords for a in A])
    np.testing.assert_allclose(ref.point.coords, expect, atol=1e-12)
    assert len(ref.trail) == ref.iterations + 1


def test_reference_hyperbolic_midpoint():
    a, b = pts(H2, 2, seed=6, radius=2.0)
    ref = reference_minimize(frechet_mean_objective([a, b]), b)
    assert distance(ref.point, geodesic_point(a, b, 0.5)) <= 1e-10


def test_reference_refuses_uncertified():
    f = frechet_mean_objective(pts(H2, 4, radius=2.0))
    with pytest.raises(NumericalFailure), pytest.warns(Warning):
        reference_minimize(f, pts(H2, 1, seed=9)[0], max_iters=1)


def test_appendix_at_minimizer_trivial():
    m = EuclideanSpace(2)
    f = Objective(m, lambda x: 0.5 * float(x @ x), lambda x: np.array(x), mu=1.0, L=1.0)
    rep = appendix_inequality_check(f, [np.zeros(2)], 0.0)
    assert rep.worst_a1 == 0.0 and rep.worst_a2 == 0.0


def test_appendix_flat_quadratic_arithmetic():
    m = EuclideanSpace(2)
    f = Objective(m, lambda x: 0.5 * float(x @ x), lambda x: np.array(x), mu=1.0, L=1.0)
    rep = appendix_inequality_check(f, [np.array([2.0, 0.0])], 0.0)
    # A2: f - f* = 2 against (2 / mu) |grad|^2 = 8
    assert rep.worst_a2 == pytest.approx(6.0)
    assert rep.passed()


def test_appendix_hyperbolic_frechet_sweep():
    rng = philox(10)
    f = frechet_mean_objective(pts(H2, 5, seed=11, radius=1.0))
    ref = reference_minimize(f, f.anchors[0])
    xs = ref.point.coords
    X = [H2.exp(xs, H2.random_tangent(rng, xs, 3.0)) for _ in range(100)]
    L = f.local_smoothness(xs, 4.5, philox(0, 9), samples=400)
    rep = appendix_inequality_check(f, X, ref.value, L=L)
    assert rep.passed(1e-8), (rep.worst_a1, rep.worst_a2)


def test_appendix_reports_violations_without_raising():
    m = EuclideanSpace(1)
    f = Objective(m, lambda x: 0.5 * float(x @ x), lambda x: np.array(x), mu=1.0, L=1.0)
    rep = appendix_inequality_check(f, [np.array([1.0])], 0.0, L=0.1)
    assert rep.worst_a1 < 0
    assert not rep.passed()
