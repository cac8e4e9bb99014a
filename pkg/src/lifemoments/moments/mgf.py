"""Moment generating function of the multivariate present value.

F(theta; s, t) is the product integral over (s, t] of

    A(s, u) = M(u) o {exp(v(s, u) <theta, b_ij(u)>)} + v(s, u) sum_l theta_l diag(b^l(u))

where v(s, u) is the discount factor anchored at s.  The transition payment
matrices have zero diagonal, so the Hadamard factor leaves the diagonal of
M untouched.  A residual evaluator for the associated partial differential
equation is provided as a diagnostic.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels
from ..errors import NumericalError
from ..markov import DEFAULT_STEP, ModelSpec, _per_cell_factors, intensity_matrix
from ..payments import PaymentSet, sojourn_vector, transition_payment_matrix
from .pregrid import GriddedInputs

__all__ = ["mgf", "mgf_pde_residual"]


def _mgf_integrand(inputs: GriddedInputs, theta: np.ndarray) -> np.ndarray:
    """Midpoint samples of the integrand matrix A(s, .) on the grid cells."""
    r_mid = inputs.interest("mid")
    cum = inputs.interest_cum()[:-1] + 0.5 * r_mid * inputs.steps
    v_mid = np.exp(-cum)  # discount from the sweep anchor to each midpoint
    exponent = np.zeros((inputs.num_cells, inputs.num_states, inputs.num_states))
    drift = np.zeros((inputs.num_cells, inputs.num_states))
    for ell, th in enumerate(theta):
        if th != 0.0:
            exponent += th * inputs.transition_pay(ell, "mid")
            drift += th * inputs.sojourn(ell, "mid")
    with np.errstate(over="raise"):
        try:
            hadamard = np.exp(v_mid[:, None, None] * exponent)
        except FloatingPointError:
            worst = float(np.abs(exponent).max())
            raise NumericalError(
                f"moment generating function overflow: |<theta, b>| up to {worst!r}"
            ) from None
    A = inputs.intensities("mid") * hadamard
    idx = np.arange(inputs.num_states)
    A[:, idx, idx] += v_mid[:, None] * drift
    return A


def mgf(
    model: ModelSpec,
    payments: PaymentSet,
    theta,
    s: float = 0.0,
    t: float | None = None,
    h: float = DEFAULT_STEP,
    scheme: str = "midpoint-exp",
    inputs: GriddedInputs | None = None,
) -> np.ndarray:
    """Matrix of conditional MGFs of U(s, t) by start and end state.

    At theta = 0 this reduces to the transition probability matrix.
    Overflow of the exponential tilt raises NumericalError instead of
    returning infinities.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (payments.num_contracts,):
        raise ValueError(
            f"theta has shape {theta.shape}, expected ({payments.num_contracts},)"
        )
    if not np.isfinite(theta).all():
        raise ValueError("theta must be finite")
    if inputs is None:
        inputs = GriddedInputs(model, payments, s=s, t=t, h=h)
    if inputs.num_cells == 0:
        return np.eye(model.num_states)
    A = _mgf_integrand(inputs, theta)
    factors = _per_cell_factors(A, inputs.steps, scheme)
    out = _kernels.fold_total(np.ascontiguousarray(factors))
    if not np.isfinite(out).all():
        raise NumericalError("moment generating function sweep overflowed")
    return out


def mgf_pde_residual(
    model: ModelSpec,
    payments: PaymentSet,
    theta,
    s_values,
    t: float,
    h: float = DEFAULT_STEP,
    theta_step: float = 1e-4,
) -> tuple[np.ndarray, np.ndarray]:
    """Max-norm residual of the MGF backward PDE at the requested s values.

    Second-order central differences in s (step = one grid cell) and in each
    theta coordinate.  Points within half a cell of a breakpoint, or too
    close to the ends of [0, t], are skipped: the PDE does not hold across
    payment or intensity discontinuities.  Returns (s_used, residuals).
    """
    theta = np.asarray(theta, dtype=float)
    n = payments.num_contracts
    breaks = set(model.breakpoints)
    if payments is not None:
        breaks.update(payments.breakpoints)
    used = []
    residuals = []
    for s in np.asarray(s_values, dtype=float):
        if s - h < 0.0 or s + h > t:
            continue
        if any(abs(s - b) < 0.5 * h for b in breaks):
            continue
        F_mid = mgf(model, payments, theta, s, t, h)
        F_up = mgf(model, payments, theta, s + h, t, h)
        F_dn = mgf(model, payments, theta, s - h, t, h)
        dFds = (F_up - F_dn) / (2.0 * h)
        theta_term = np.zeros_like(F_mid)
        if theta.any():
            inputs = GriddedInputs(model, payments, s=s, t=t, h=h)
            for ell in range(n):
                if theta[ell] == 0.0:
                    continue
                shift = np.zeros(n)
                shift[ell] = theta_step
                F_p = mgf(model, payments, theta + shift, s, t, h, inputs=inputs)
                F_m = mgf(model, payments, theta - shift, s, t, h, inputs=inputs)
                theta_term += theta[ell] * (F_p - F_m) / (2.0 * theta_step)
        exponent = np.zeros((model.num_states, model.num_states))
        drift = np.zeros(model.num_states)
        for ell in range(n):
            if theta[ell] != 0.0:
                exponent += theta[ell] * transition_payment_matrix(payments, ell, s)
                drift += theta[ell] * sojourn_vector(payments, ell, s)
        coeff = intensity_matrix(model, s) * np.exp(exponent) + np.diag(drift)
        residual = dFds + coeff @ F_mid - model.interest(s) * theta_term
        used.append(s)
        residuals.append(float(np.abs(residual).max()))
    return np.asarray(used), np.asarray(residuals)
