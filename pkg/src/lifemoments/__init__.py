"""Moments, covariances and MGFs of multivariate present values in
multi-state life insurance.

Two independent computation routes (backward ODE systems and a single block
product integral) are cross-checked by a Monte Carlo simulation oracle; a
CLI reproduces the bundled disability-model example.
"""

from ._kernels import BACKEND
from .errors import (
    CapExceededError,
    DslError,
    EvalDomainError,
    LifeMomentsError,
    NumericalError,
    SchemaError,
    ValidationError,
)
from .markov import (
    MatrixFunction,
    ModelSpec,
    intensity_matrix,
    make_grid,
    product_integral,
    transition_probabilities,
)
from .montecarlo import PathSimulator, SamplePath, present_value_samples, simulate_path
from .payments import (
    PaymentSet,
    reward_matrix_C,
    reward_matrix_R,
    sojourn_vector,
    transition_payment_matrix,
)
from .timefun import TimeFunction, constant, parse_timefun
from . import moments

__version__ = "0.1.0"
