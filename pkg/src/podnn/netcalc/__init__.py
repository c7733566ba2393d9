"""Exact ReLU network calculus and constructive approximation networks."""

from .network import (
    ReluNetwork,
    affine_network,
    concat,
    extend_to_depth,
    identity_net,
    matr,
    parallelize,
    realize,
    size_report,
    sparse_concat,
    vec,
)
from .approx import (
    InverseNetConfig,
    inverse_net,
    mult_net,
    neumann_product_check,
    power_net,
)
from .parametric import (
    ParametricNetConfig,
    affine_b_network,
    btb_inverse_net,
    constant_network,
    measure_parametric_bounds,
    parametric_map_net,
)

__all__ = [
    "ReluNetwork",
    "affine_network",
    "concat",
    "extend_to_depth",
    "identity_net",
    "matr",
    "parallelize",
    "realize",
    "size_report",
    "sparse_concat",
    "vec",
    "InverseNetConfig",
    "inverse_net",
    "mult_net",
    "neumann_product_check",
    "power_net",
    "ParametricNetConfig",
    "affine_b_network",
    "btb_inverse_net",
    "constant_network",
    "measure_parametric_bounds",
    "parametric_map_net",
]
