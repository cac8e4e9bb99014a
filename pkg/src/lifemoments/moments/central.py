"""Central moments, covariance/correlation matrices and CLT safety margins."""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from ..markov import DEFAULT_STEP, ModelSpec
from ..payments import PaymentSet
from .multiindex import binom_prod, lex_enumerate, unit_index
from .ode import MomentGrid, StateMomentGrid, partial_moments
from .pregrid import GriddedInputs

__all__ = [
    "central_moments",
    "covariance_matrix",
    "correlation_matrix",
    "CorrelationResult",
    "clt_margins",
    "MarginResult",
]

DEGENERATE_VARIANCE = 1e-14


def central_moments(grid: MomentGrid | StateMomentGrid, k, i: int) -> np.ndarray:
    """Central moment curve m_i^(k)(s, t) over the grid times.

    Multidimensional binomial expansion around the first moments:
    sum over y <= k of prod_l (-1)^(k_l - y_l) C(k_l, y_l) V_i^(y)
    (V_i^(e_l))^(k_l - y_l).
    """
    k = tuple(int(v) for v in k)
    n = len(k)
    zero = tuple(0 for _ in k)
    firsts = {
        ell: grid.state_moments(unit_index(n, ell))[:, i] for ell in range(n) if k[ell] > 0
    }
    out = np.zeros(len(grid.times))
    for y in (zero, *lex_enumerate(k)):
        sign = -1 if sum(k) - sum(y) & 1 else 1
        term = sign * binom_prod(k, y) * grid.state_moments(y)[:, i]
        for ell in range(n):
            if k[ell] - y[ell] > 0:
                term = term * firsts[ell] ** (k[ell] - y[ell])
        out += term
    return out


def covariance_matrix(
    model: ModelSpec,
    payments: PaymentSet,
    i: int,
    s: float,
    t: float,
    h: float = DEFAULT_STEP,
) -> np.ndarray:
    """Conditional covariance matrix of the present values given state i at s.

    Entry (l, m) is the central product moment of order e_l + e_m, computed
    from the backward moment system and the binomial expansion.
    """
    if not (0 <= i < model.num_states):
        raise ValueError(f"state {i} outside 0..{model.num_states - 1}")
    n = payments.num_contracts
    inputs = GriddedInputs(model, payments, s=s, t=t, h=h)
    out = np.zeros((n, n))
    for ell in range(n):
        for m in range(ell, n):
            k = tuple(
                (2 if u == ell == m else 1 if u in (ell, m) else 0) for u in range(n)
            )
            grid = partial_moments(model, payments, k, t=t, h=h, s=s, inputs=inputs)
            out[ell, m] = out[m, ell] = central_moments(grid, k, i)[0]
    return out


@dataclass(frozen=True)
class CorrelationResult:
    """Correlation matrix plus a mask of variance-degenerate entries.

    Entries involving a variance below the degeneracy floor are reported as
    zero with the mask set, so downstream CSV output never sees NaN.
    """

    matrix: np.ndarray
    degenerate: np.ndarray


def correlation_from_covariance(cov: np.ndarray) -> CorrelationResult:
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    variances = np.diag(cov)
    degenerate = variances < DEGENERATE_VARIANCE
    out = np.zeros((n, n))
    for ell in range(n):
        for m in range(n):
            if degenerate[ell] or degenerate[m]:
                continue
            rho = cov[ell, m] / np.sqrt(variances[ell] * variances[m])
            if abs(rho) > 1.0 + 1e-9:
                rho = np.sign(rho)
            out[ell, m] = min(1.0, max(-1.0, rho))
    mask = degenerate[:, None] | degenerate[None, :]
    return CorrelationResult(matrix=out, degenerate=mask)


def correlation_matrix(
    model: ModelSpec,
    payments: PaymentSet,
    i: int,
    s: float,
    t: float,
    h: float = DEFAULT_STEP,
) -> CorrelationResult:
    """Conditional correlation matrix given state i at time s."""
    return correlation_from_covariance(covariance_matrix(model, payments, i, s, t, h))


@dataclass(frozen=True)
class MarginResult:
    per_product: np.ndarray
    aggregate: float
    quantile: float


def clt_margins(mean, cov, confidence: float, portfolio_size: int) -> MarginResult:
    """Normal-approximation safety margins for a portfolio of iid insured.

    Per product: z(confidence) sqrt(cov_ll / N); aggregate uses the total
    variance 1' cov 1.  The mean vector is accepted for interface symmetry
    with the moment pipeline; margins depend on the covariance only.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    if portfolio_size < 1:
        raise ValueError(f"portfolio size must be >= 1, got {portfolio_size}")
    if cov.shape != (len(mean), len(mean)):
        raise ValueError(f"covariance shape {cov.shape} does not match {len(mean)} products")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError("covariance matrix must be symmetric")
    if np.diag(cov).min() < -1e-12:
        raise ValueError("covariance matrix has a negative variance")
    z = NormalDist().inv_cdf(confidence)
    per_product = z * np.sqrt(np.maximum(np.diag(cov), 0.0) / portfolio_size)
    aggregate = z * float(np.sqrt(max(cov.sum(), 0.0) / portfolio_size))
    return MarginResult(per_product=per_product, aggregate=aggregate, quantile=z)
