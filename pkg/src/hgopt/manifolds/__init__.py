from .euclidean import EuclideanSpace
from .hyperbolic import HyperbolicSpace, minkowski
from .spd import SpdManifold
from .warped import (
    WARPS,
    Warp,
    WarpedProduct,
    sectional_curvature_bound,
    warped_geodesic_ode,
    warped_log_shoot,
)

__all__ = [
    "EuclideanSpace",
    "HyperbolicSpace",
    "SpdManifold",
    "WARPS",
    "Warp",
    "WarpedProduct",
    "minkowski",
    "sectional_curvature_bound",
    "warped_geodesic_ode",
    "warped_log_shoot",
]
