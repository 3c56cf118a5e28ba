"""Proximal methods on Hadamard manifolds with a quasilinearized inner product."""

from .geometry import (
    ContractViolation,
    DomainExitError,
    GeodesicSegment,
    ManifoldPoint,
    NumericalFailure,
    TangentVector,
    distance,
    exp_map,
    geodesic_point,
    log_map,
    metric_inner,
    parallel_transport,
)
from .manifolds import EuclideanSpace, HyperbolicSpace, SpdManifold, WarpedProduct
from .objectives import (
    frechet_mean_objective,
    prox_closed_form,
    squared_distance_objective,
    stochastic_frechet,
)
from .quasilinear import compare_to_tangent, q_convexity_gap, quasi_add_check, quasi_inner
from .solvers import (
    InnerConfig,
    SolverConfig,
    inner_gd,
    prox_step,
    proximal_gradient,
    rgd_baseline,
    stochastic_proximal_gradient,
    zeta,
)

__version__ = "0.1.0"
