"""Moment machinery: multi-index bookkeeping, backward ODE systems, block
product integrals, central moments, MGFs and CLT margins."""

from .block import BlockResult, block_generator, block_product_integral_moments
from .central import (
    CorrelationResult,
    MarginResult,
    central_moments,
    clt_margins,
    correlation_from_covariance,
    correlation_matrix,
    covariance_matrix,
)
from .mgf import mgf, mgf_pde_residual
from .multiindex import (
    binom_prod,
    check_lex_closure,
    lex_enumerate,
    lower_set_size,
    order_sum,
    unit_index,
)
from .ode import (
    BLOCK_CAP,
    HattendorffResult,
    MomentGrid,
    StateMomentGrid,
    conditional_moments,
    conditional_moments_direct,
    covariance_hattendorff,
    covariance_hattendorff_all,
    partial_moments,
)
from .pregrid import GriddedInputs

__all__ = [
    "BLOCK_CAP",
    "BlockResult",
    "CorrelationResult",
    "GriddedInputs",
    "HattendorffResult",
    "MarginResult",
    "MomentGrid",
    "StateMomentGrid",
    "binom_prod",
    "block_generator",
    "block_product_integral_moments",
    "central_moments",
    "check_lex_closure",
    "clt_margins",
    "conditional_moments",
    "conditional_moments_direct",
    "correlation_from_covariance",
    "correlation_matrix",
    "covariance_hattendorff",
    "covariance_hattendorff_all",
    "covariance_matrix",
    "lex_enumerate",
    "lower_set_size",
    "mgf",
    "mgf_pde_residual",
    "order_sum",
    "partial_moments",
    "unit_index",
]
