"""Multivariate payment process: sojourn rates, transition payments, reward matrices.

A PaymentSet holds n contracts against a J-state model.  The reward inputs
feeding the moment computations are, per contract l and time t,

    B_l(t)   = {b_ij^l(t)}                 transition payment matrix, zero diagonal
    R_l(t)   = M(t) o B_l(t) + diag(b^l)   first-order reward matrix
    C^(y)(t) = M(t) o B_1^oy1 o ... o B_n^oyn

where o is the entry-wise (Hadamard) product and the zeroth Hadamard power
is the all-ones matrix (0^0 = 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ValidationError
from .markov import ModelSpec, _scan_points, intensity_matrix, intensity_matrix_grid
from .timefun import TimeFunction

__all__ = [
    "PaymentSet",
    "sojourn_vector",
    "transition_payment_matrix",
    "reward_matrix_R",
    "reward_matrix_C",
]


@dataclass(frozen=True)
class PaymentSet:
    """Payment functions for n contracts on a J-state model.

    sojourn maps (contract, state) -> rate b_i^l; transition maps
    (contract, from, to) -> lump payment b_ij^l.  Missing entries are zero.
    """

    num_states: int
    names: tuple[str, ...]
    sojourn: Mapping[tuple[int, int], TimeFunction]
    transition: Mapping[tuple[int, int, int], TimeFunction]

    @property
    def num_contracts(self) -> int:
        return len(self.names)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        pts = set()
        for fn in self.sojourn.values():
            pts.update(fn.breakpoints)
        for fn in self.transition.values():
            pts.update(fn.breakpoints)
        return tuple(sorted(pts))

    def validate(self, horizon: float, scan_step: float = 1.0 / 64.0) -> None:
        n, J = self.num_contracts, self.num_states
        for (ell, i) in self.sojourn:
            if not (0 <= ell < n):
                raise ValidationError(f"sojourn payment references contract {ell}, have {n}")
            if not (0 <= i < J):
                raise ValidationError(f"sojourn payment references state {i}, have {J}")
        for (ell, i, j) in self.transition:
            if not (0 <= ell < n):
                raise ValidationError(f"transition payment references contract {ell}, have {n}")
            if i == j or not (0 <= i < J and 0 <= j < J):
                raise ValidationError(f"transition payment references invalid pair ({i},{j})")
        ts = _scan_points(0.0, horizon, scan_step, self.breakpoints)
        for key, fn in list(self.sojourn.items()) + list(self.transition.items()):
            fn.eval_grid(ts)  # raises EvalDomainError if unbounded/non-finite


def sojourn_vector(p: PaymentSet, ell: int, t: float) -> np.ndarray:
    """Vector b^l(t) of sojourn payment rates by state."""
    out = np.zeros(p.num_states)
    for (l, i), fn in p.sojourn.items():
        if l == ell:
            out[i] = fn(t)
    return out


def sojourn_vector_grid(p: PaymentSet, ell: int, ts, ind_ts=None) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    out = np.zeros((len(ts), p.num_states))
    for (l, i), fn in p.sojourn.items():
        if l == ell:
            out[:, i] = fn.eval_grid(ts, ind_ts)
    return out


def transition_payment_matrix(p: PaymentSet, ell: int, t: float) -> np.ndarray:
    """Matrix B_l(t) of transition payments; diagonal is zero."""
    out = np.zeros((p.num_states, p.num_states))
    for (l, i, j), fn in p.transition.items():
        if l == ell:
            out[i, j] = fn(t)
    return out


def transition_payment_grid(p: PaymentSet, ell: int, ts, ind_ts=None) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    out = np.zeros((len(ts), p.num_states, p.num_states))
    for (l, i, j), fn in p.transition.items():
        if l == ell:
            out[:, i, j] = fn.eval_grid(ts, ind_ts)
    return out


def reward_matrix_R(model: ModelSpec, p: PaymentSet, ell: int, t: float) -> np.ndarray:
    """R_l(t): off-diagonal mu_ij b_ij^l, diagonal b_i^l."""
    M = intensity_matrix(model, t)
    out = M * transition_payment_matrix(p, ell, t)
    out[np.diag_indices(p.num_states)] = sojourn_vector(p, ell, t)
    return out


def reward_R_grid(model: ModelSpec, p: PaymentSet, ell: int, ts, ind_ts=None) -> np.ndarray:
    M = intensity_matrix_grid(model, ts, ind_ts)
    out = M * transition_payment_grid(p, ell, ts, ind_ts)
    J = p.num_states
    out[:, np.arange(J), np.arange(J)] = sojourn_vector_grid(p, ell, ts, ind_ts)
    return out


def _check_higher_index(p: PaymentSet, y) -> tuple[int, ...]:
    y = tuple(int(v) for v in y)
    if len(y) != p.num_contracts:
        raise ValueError(f"multi-index has {len(y)} entries, expected {p.num_contracts}")
    if any(v < 0 for v in y):
        raise ValueError(f"multi-index must be nonnegative, got {y}")
    if sum(y) <= 1:
        raise ValueError(f"reward matrix C is defined for orders >= 2 only, got {y}")
    return y


def reward_matrix_C(model: ModelSpec, p: PaymentSet, y, t: float) -> np.ndarray:
    """C^(y)(t) = M(t) o B_1^oy1 o ... o B_n^oyn with 0^0 = 1."""
    y = _check_higher_index(p, y)
    out = intensity_matrix(model, t)
    for ell, power in enumerate(y):
        if power > 0:
            out = out * transition_payment_matrix(p, ell, t) ** power
    return out


def reward_C_grid(model: ModelSpec, p: PaymentSet, y, ts, ind_ts=None) -> np.ndarray:
    y = _check_higher_index(p, y)
    out = intensity_matrix_grid(model, ts, ind_ts)
    for ell, power in enumerate(y):
        if power > 0:
            out = out * transition_payment_grid(p, ell, ts, ind_ts) ** power
    return out
