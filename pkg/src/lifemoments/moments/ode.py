"""Backward ODE systems for conditional (partial) moments and covariances.

The joint system over all moment orders y in the lower set of k is solved as
one stacked linear matrix ODE with classic fixed-step RK4 on the
breakpoint-aligned grid, lowest orders feeding higher ones at the current
time, so no stored curves are interpolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..errors import CapExceededError, NumericalError
from ..markov import DEFAULT_STEP, ModelSpec
from ..payments import PaymentSet
from .multiindex import binom_prod, lex_enumerate, lower_set_size, order_sum, unit_index
from .pregrid import GriddedInputs

__all__ = [
    "MomentGrid",
    "StateMomentGrid",
    "HattendorffResult",
    "partial_moments",
    "conditional_moments",
    "conditional_moments_direct",
    "covariance_hattendorff",
    "covariance_hattendorff_all",
]

BLOCK_CAP = 512
_CHUNK_BYTES = 2.5e8  # working-set bound for stacked generator chunks


@dataclass(frozen=True)
class MomentGrid:
    """V^(y)(s_g, t) for every y in the lower set of k (zero order first)."""

    k: tuple[int, ...]
    times: np.ndarray  # (G+1,) grid times s_0 < ... < s_G = t
    ys: tuple[tuple[int, ...], ...]
    values: np.ndarray  # (G+1, len(ys), J, J)
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._index.update({y: a for a, y in enumerate(self.ys)})

    @property
    def terminal_time(self) -> float:
        return float(self.times[-1])

    def moment_matrices(self, y) -> np.ndarray:
        """V^(y) at every grid time, shape (G+1, J, J)."""
        return self.values[:, self._index[tuple(int(v) for v in y)]]

    def state_moments(self, y) -> np.ndarray:
        """Row sums V_i^(y) at every grid time, shape (G+1, J)."""
        return self.moment_matrices(y).sum(axis=2)


@dataclass(frozen=True)
class StateMomentGrid:
    """Per-state conditional moments V_i^(y)(s_g, t), zero order first."""

    k: tuple[int, ...]
    times: np.ndarray
    ys: tuple[tuple[int, ...], ...]
    values: np.ndarray  # (G+1, len(ys), J)
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._index.update({y: a for a, y in enumerate(self.ys)})

    def state_moments(self, y) -> np.ndarray:
        return self.values[:, self._index[tuple(int(v) for v in y)]]


def _normalize_k(payments: PaymentSet, k) -> tuple[int, ...]:
    k = tuple(int(v) for v in k)
    if len(k) != payments.num_contracts:
        raise ValueError(f"multi-index has {len(k)} entries, expected {payments.num_contracts}")
    if any(v < 0 for v in k):
        raise ValueError(f"multi-index must be nonnegative, got {k}")
    return k


def _check_cap(k, num_states: int, cap: int) -> None:
    dim = (lower_set_size(k) + 1) * num_states
    if dim > cap:
        raise CapExceededError(
            f"moment order {k} needs block dimension {dim} > cap {cap}"
        )


def _resolve_inputs(model, payments, s, t, h, inputs):
    if inputs is None:
        return GriddedInputs(model, payments, s=s, t=t, h=h)
    return inputs


def _chunked_rk4(assemble, steps, terminal, dim):
    """Backward RK4 over the whole grid, assembling generators chunkwise."""
    cells = len(steps)
    out = np.empty((cells + 1,) + terminal.shape)
    out[cells] = terminal
    chunk = max(16, int(_CHUNK_BYTES / (3 * dim * dim * 8)) or 1)
    hi = cells
    while hi > 0:
        lo = max(0, hi - chunk)
        k_left, k_mid, k_right = assemble(lo, hi)
        out[lo : hi + 1] = _kernels.rk4_backward(
            k_left, k_mid, k_right, np.ascontiguousarray(out[hi]), steps[lo:hi]
        )
        hi = lo
    if not np.isfinite(out[0]).all():
        raise NumericalError("backward sweep produced non-finite values")
    return out


def _stacked_generator(inputs: GriddedInputs, ys, where, lo, hi):
    """Coupling matrix K(s) of the joint partial-moment system on cells lo..hi-1.

    Row block of order y: (ybar r I - M) V^(y) - sum_l y_l R_l V^(y-e_l)
    - sum_{xi in S(y), xi not a unit} binom(y, xi) C^(xi) V^(y-xi).
    """
    J = inputs.num_states
    dim = len(ys) * J
    index = {y: a for a, y in enumerate(ys)}
    r = inputs.interest(where)[lo:hi]
    M = inputs.intensities(where)[lo:hi]
    K = np.zeros((hi - lo, dim, dim))
    eye = np.eye(J)
    for a, y in enumerate(ys):
        rows = slice(a * J, (a + 1) * J)
        K[:, rows, rows] = order_sum(y) * r[:, None, None] * eye - M
        for xi in lex_enumerate(y):
            cols_at = index[tuple(u - v for u, v in zip(y, xi))]
            cols = slice(cols_at * J, (cols_at + 1) * J)
            if sum(xi) == 1:
                ell = xi.index(1)
                K[:, rows, cols] = -y[ell] * inputs.reward_R(ell, where)[lo:hi]
            else:
                K[:, rows, cols] = -binom_prod(y, xi) * inputs.reward_C(xi, where)[lo:hi]
    return K


def partial_moments(
    model: ModelSpec,
    payments: PaymentSet,
    k,
    t: float | None = None,
    h: float = DEFAULT_STEP,
    s: float = 0.0,
    inputs: GriddedInputs | None = None,
    cap: int = BLOCK_CAP,
) -> MomentGrid:
    """Solve the backward system for all V^(y)(., t), y <= k, jointly.

    Terminal condition V^(y)(t, t) = I for y = 0 and the zero matrix
    otherwise.  Returns the full trajectory on the grid.
    """
    k = _normalize_k(payments, k)
    _check_cap(k, model.num_states, cap)
    inputs = _resolve_inputs(model, payments, s, t, h, inputs)
    ys = (tuple(0 for _ in k),) + tuple(lex_enumerate(k))
    J = model.num_states
    dim = len(ys) * J
    terminal = np.zeros((dim, J))
    terminal[:J] = np.eye(J)

    def assemble(lo, hi):
        return tuple(
            _stacked_generator(inputs, ys, where, lo, hi) for where in ("left", "mid", "right")
        )

    trajectory = _chunked_rk4(assemble, inputs.steps, terminal, dim)
    values = trajectory.reshape(len(inputs.nodes), len(ys), J, J)
    return MomentGrid(k=k, times=inputs.nodes, ys=ys, values=values)


def conditional_moments(grid: MomentGrid) -> StateMomentGrid:
    """Per-state moments as row sums of the partial moment matrices."""
    return StateMomentGrid(
        k=grid.k, times=grid.times, ys=grid.ys, values=grid.values.sum(axis=3)
    )


def _stacked_state_generator(inputs: GriddedInputs, ys, where, lo, hi):
    """Coupling matrix of the per-state moment system, assembled directly from
    exit rates, off-diagonal intensities and payment powers (the cross-check
    route; it never touches the reward-matrix helpers)."""
    J = inputs.num_states
    dim = len(ys) * J
    index = {y: a for a, y in enumerate(ys)}
    r = inputs.interest(where)[lo:hi]
    mu = inputs.offdiag_intensities(where)[lo:hi]
    exits = inputs.exit_rates(where)[lo:hi]
    K = np.zeros((hi - lo, dim, dim))
    idx = np.arange(J)
    for a, y in enumerate(ys):
        rows = slice(a * J, (a + 1) * J)
        diag = order_sum(y) * r[:, None] + exits
        K[:, a * J + idx, a * J + idx] = diag
        zero = tuple(0 for _ in y)
        for xi in (zero, *lex_enumerate(y)):
            cols_at = index[tuple(u - v for u, v in zip(y, xi))]
            cols = slice(cols_at * J, (cols_at + 1) * J)
            K[:, rows, cols] -= binom_prod(y, xi) * (mu * inputs.transition_power(xi, where)[lo:hi])
            if sum(xi) == 1:
                ell = xi.index(1)
                K[:, a * J + idx, cols_at * J + idx] -= y[ell] * inputs.sojourn(ell, where)[lo:hi]
    return K


def conditional_moments_direct(
    model: ModelSpec,
    payments: PaymentSet,
    k,
    t: float | None = None,
    h: float = DEFAULT_STEP,
    s: float = 0.0,
    inputs: GriddedInputs | None = None,
    cap: int = BLOCK_CAP,
) -> StateMomentGrid:
    """Per-state moments from their own backward system (cross-check route)."""
    k = _normalize_k(payments, k)
    _check_cap(k, model.num_states, cap)
    inputs = _resolve_inputs(model, payments, s, t, h, inputs)
    ys = (tuple(0 for _ in k),) + tuple(lex_enumerate(k))
    J = model.num_states
    dim = len(ys) * J
    terminal = np.zeros((dim, 1))
    terminal[:J, 0] = 1.0

    def assemble(lo, hi):
        return tuple(
            _stacked_state_generator(inputs, ys, where, lo, hi)
            for where in ("left", "mid", "right")
        )

    trajectory = _chunked_rk4(assemble, inputs.steps, terminal, dim)
    values = trajectory.reshape(len(inputs.nodes), len(ys), J)
    return StateMomentGrid(k=k, times=inputs.nodes, ys=ys, values=values)


@dataclass(frozen=True)
class HattendorffResult:
    """Covariance curves from the sum-at-risk differential equation."""

    times: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    values: np.ndarray  # (G+1, len(pairs), J)
    reserves: np.ndarray  # (G+1, n, J) state-wise reserves of each contract

    def pair_values(self, ell: int, m: int) -> np.ndarray:
        key = (min(ell, m), max(ell, m))
        return self.values[:, self.pairs.index(key)]


def covariance_hattendorff_all(
    model: ModelSpec,
    payments: PaymentSet,
    t: float | None = None,
    h: float = DEFAULT_STEP,
    s: float = 0.0,
    pairs=None,
    inputs: GriddedInputs | None = None,
) -> HattendorffResult:
    """Solve the covariance equations for several contract pairs in one sweep.

    The state-wise reserves evolve jointly with the covariances, so the sums
    at risk R_ij^l = b_ij^l + V_j^(e_l) - V_i^(e_l) are formed at every RK4
    stage from stage-consistent reserve values.
    """
    inputs = _resolve_inputs(model, payments, s, t, h, inputs)
    n = payments.num_contracts
    if pairs is None:
        pairs = [(a, b) for a in range(n) for b in range(a, n)]
    pairs = tuple((min(a, b), max(a, b)) for a, b in pairs)
    for a, b in pairs:
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"pair ({a},{b}) references a contract outside 0..{n - 1}")
    left = np.array([a for a, _ in pairs])
    right = np.array([b for _, b in pairs])

    J = model.num_states
    mu = {w: inputs.offdiag_intensities(w) for w in ("left", "mid", "right")}
    r = {w: inputs.interest(w) for w in ("left", "mid", "right")}
    soj = {
        w: np.stack([inputs.sojourn(ell, w) for ell in range(n)], axis=1)
        for w in ("left", "mid", "right")
    }  # (G, n, J)
    pay = {
        w: np.stack([inputs.transition_pay(ell, w) for ell in range(n)], axis=1)
        for w in ("left", "mid", "right")
    }  # (G, n, J, J)

    def rhs(g, where, reserves, cov):
        # reserves (n, J), cov (npairs, J)
        rg = r[where][g]
        mug = mu[where][g]
        risk = pay[where][g] + reserves[:, None, :] - reserves[:, :, None]  # (n, J, J)
        d_res = rg * reserves - soj[where][g] - (mug[None] * risk).sum(axis=2)
        cross = risk[left] * risk[right] + cov[:, None, :] - cov[:, :, None]
        d_cov = 2.0 * rg * cov - (mug[None] * cross).sum(axis=2)
        return d_res, d_cov

    cells = inputs.num_cells
    reserves = np.zeros((cells + 1, n, J))
    cov = np.zeros((cells + 1, len(pairs), J))
    for g in range(cells - 1, -1, -1):
        hstep = inputs.steps[g]
        v0, c0 = reserves[g + 1], cov[g + 1]
        k1v, k1c = rhs(g, "right", v0, c0)
        k2v, k2c = rhs(g, "mid", v0 - 0.5 * hstep * k1v, c0 - 0.5 * hstep * k1c)
        k3v, k3c = rhs(g, "mid", v0 - 0.5 * hstep * k2v, c0 - 0.5 * hstep * k2c)
        k4v, k4c = rhs(g, "left", v0 - hstep * k3v, c0 - hstep * k3c)
        reserves[g] = v0 - (hstep / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        cov[g] = c0 - (hstep / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
    if not (np.isfinite(reserves[0]).all() and np.isfinite(cov[0]).all()):
        raise NumericalError("covariance sweep produced non-finite values")
    return HattendorffResult(times=inputs.nodes, pairs=pairs, values=cov, reserves=reserves)


def covariance_hattendorff(
    model: ModelSpec,
    payments: PaymentSet,
    ell: int,
    m: int,
    t: float | None = None,
    h: float = DEFAULT_STEP,
    s: float = 0.0,
    inputs: GriddedInputs | None = None,
) -> HattendorffResult:
    """Covariance curve of contracts (ell, m); symmetric in its arguments."""
    return covariance_hattendorff_all(
        model, payments, t=t, h=h, s=s, pairs=[(ell, m)], inputs=inputs
    )
