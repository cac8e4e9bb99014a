"""Single-sweep block product integral producing all moments up to order k.

The generator is a block upper-triangular matrix: rising moment orders from
the bottom-right (plain intensity matrix) to the top-left (order k shifted
by kbar r I), with coupling blocks determined by lexicographic differences
of the ordered lower set.  One product integral of this matrix yields every
V^(y), y <= k, in its right block column, and scaled lower moments in the
remaining blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..errors import CapExceededError, NumericalError
from ..markov import DEFAULT_STEP, ModelSpec, _per_cell_factors
from ..payments import (
    PaymentSet,
    reward_matrix_C,
    reward_matrix_R,
)
from ..markov import intensity_matrix
from .multiindex import binom_prod, lex_enumerate, lower_set_size, order_sum
from .ode import BLOCK_CAP, _normalize_k
from .pregrid import GriddedInputs

__all__ = ["BlockResult", "block_generator", "block_product_integral_moments"]


def _descending_orders(k) -> tuple[tuple[int, ...], ...]:
    """Row order of the block layout: k first, zero order last."""
    return tuple(reversed(lex_enumerate(k))) + (tuple(0 for _ in k),)


def _coupling(ys_desc, row, col):
    """Which factor couples block row `row` to block column `col`.

    Returns ("R", ell, weight), ("C", xi, weight) or None, following the
    lexicographic difference y^m - y^(m-u) of the ordered lower set.
    """
    ym = ys_desc[row]
    target = ys_desc[col]
    diff = tuple(a - b for a, b in zip(ym, target))
    if any(v < 0 for v in diff) or not any(diff):
        return None
    if sum(diff) == 1:
        ell = diff.index(1)
        return ("R", ell, ym[ell])
    return ("C", diff, binom_prod(ym, diff))


def block_generator(model: ModelSpec, payments: PaymentSet, k, x: float) -> np.ndarray:
    """The block matrix integrated by the single-sweep moment computation."""
    k = _normalize_k(payments, k)
    ys = _descending_orders(k)
    J = model.num_states
    dim = len(ys) * J
    out = np.zeros((dim, dim))
    M = intensity_matrix(model, x)
    r = model.interest(x)
    eye = np.eye(J)
    for row, y in enumerate(ys):
        out[row * J : (row + 1) * J, row * J : (row + 1) * J] = M - order_sum(y) * r * eye
        for col in range(row + 1, len(ys)):
            hit = _coupling(ys, row, col)
            if hit is None:
                continue
            kind, key, weight = hit
            if kind == "R":
                blockval = weight * reward_matrix_R(model, payments, key, x)
            else:
                blockval = weight * reward_matrix_C(model, payments, key, x)
            out[row * J : (row + 1) * J, col * J : (col + 1) * J] = blockval
    return out


def _generator_cells(inputs: GriddedInputs, ys, lo, hi):
    """Midpoint samples of the block generator on cells lo..hi-1."""
    J = inputs.num_states
    dim = len(ys) * J
    r = inputs.interest("mid")[lo:hi]
    M = inputs.intensities("mid")[lo:hi]
    out = np.zeros((hi - lo, dim, dim))
    eye = np.eye(J)
    for row, y in enumerate(ys):
        rows = slice(row * J, (row + 1) * J)
        out[:, rows, rows] = M - order_sum(y) * r[:, None, None] * eye
        for col in range(row + 1, len(ys)):
            hit = _coupling(ys, row, col)
            if hit is None:
                continue
            kind, key, weight = hit
            cols = slice(col * J, (col + 1) * J)
            if kind == "R":
                out[:, rows, cols] = weight * inputs.reward_R(key, "mid")[lo:hi]
            else:
                out[:, rows, cols] = weight * inputs.reward_C(key, "mid")[lo:hi]
    return out


@dataclass(frozen=True)
class BlockResult:
    """Product integral of the block generator over (s, t], with accessors.

    Block row 0 carries order k; the last block row carries order zero, so
    its right column is P(s, t) and the right block column read bottom to top
    runs through the moments in ascending lexicographic order.
    """

    k: tuple[int, ...]
    s: float
    t: float
    num_states: int
    orders: tuple[tuple[int, ...], ...]  # descending, zero last
    matrix: np.ndarray
    interest_integral: float  # grid-consistent integral of r over (s, t]
    _rows: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._rows.update({y: i for i, y in enumerate(self.orders)})

    @property
    def num_blocks(self) -> int:
        return len(self.orders)

    def block(self, row: int, col: int) -> np.ndarray:
        J = self.num_states
        return self.matrix[row * J : (row + 1) * J, col * J : (col + 1) * J]

    def moment(self, y) -> np.ndarray:
        """V^(y)(s, t) extracted from the right block column."""
        return self.block(self._rows[tuple(int(v) for v in y)], self.num_blocks - 1)

    def extracted(self) -> dict:
        return {y: self.moment(y) for y in self.orders}

    def scaling_reference(self, row: int, col: int, moments=None) -> np.ndarray:
        """Expected value of block (row, col) by the scaling identity.

        The block equals 1(y^i >= y^m) binom(y^i, y^m) e^(-ybar^m int r)
        V^(y^i - y^m); with `moments` unset the difference moment is read off
        this result's own right block column.
        """
        yi, ym = self.orders[row], self.orders[col]
        diff = tuple(a - b for a, b in zip(yi, ym))
        J = self.num_states
        if any(v < 0 for v in diff):
            return np.zeros((J, J))
        base = self.moment(diff) if moments is None else moments[diff]
        discount = np.exp(-order_sum(ym) * self.interest_integral)
        return binom_prod(yi, ym) * discount * base

    def scaling_errors(self, moments=None) -> np.ndarray:
        """Normalized deviation of every block from the scaling identity."""
        scale = max(np.abs(self.matrix).max(), 1e-300)
        out = np.zeros((self.num_blocks, self.num_blocks))
        for row in range(self.num_blocks):
            for col in range(self.num_blocks):
                if col < row:
                    expected = np.zeros((self.num_states, self.num_states))
                else:
                    expected = self.scaling_reference(row, col, moments)
                denom = max(np.abs(expected).max(), scale * 1e-6)
                out[row, col] = np.abs(self.block(row, col) - expected).max() / denom
        return out


def block_product_integral_moments(
    model: ModelSpec,
    payments: PaymentSet,
    k,
    s: float = 0.0,
    t: float | None = None,
    h: float = DEFAULT_STEP,
    scheme: str = "midpoint-exp",
    inputs: GriddedInputs | None = None,
    cap: int = BLOCK_CAP,
) -> BlockResult:
    """All conditional partial moments up to order k from one product integral."""
    k = _normalize_k(payments, k)
    J = model.num_states
    dim = (lower_set_size(k) + 1) * J
    if dim > cap:
        raise CapExceededError(f"moment order {k} needs block dimension {dim} > cap {cap}")
    if inputs is None:
        inputs = GriddedInputs(model, payments, s=s, t=t, h=h)
    ys = _descending_orders(k)
    total = np.eye(dim)
    chunk = max(16, int(2.5e8 / (dim * dim * 8)) or 1)
    for lo in range(0, inputs.num_cells, chunk):
        hi = min(lo + chunk, inputs.num_cells)
        cells = _generator_cells(inputs, ys, lo, hi)
        factors = _per_cell_factors(cells, inputs.steps[lo:hi], scheme)
        total = total @ _kernels.fold_total(np.ascontiguousarray(factors))
    if not np.isfinite(total).all():
        raise NumericalError("block product integral produced non-finite values")
    return BlockResult(
        k=k,
        s=inputs.s,
        t=inputs.t,
        num_states=J,
        orders=ys,
        matrix=total,
        interest_integral=float(inputs.interest_cum()[-1]),
    )
