"""Multi-state Markov model: intensity matrices, product integrals, transition probabilities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import _kernels
from .errors import NumericalError, ValidationError
from .timefun import TimeFunction

__all__ = [
    "ModelSpec",
    "MatrixFunction",
    "make_grid",
    "intensity_matrix",
    "intensity_matrix_grid",
    "product_integral",
    "transition_probabilities",
]

DEFAULT_STEP = 1.0 / 256.0
SCHEMES = ("euler", "midpoint-exp")


@dataclass(frozen=True)
class ModelSpec:
    """Validated multi-state model: state count, intensities, interest, horizon.

    Intensities map ordered pairs (i, j), i != j, to TimeFunctions; missing
    pairs are identically zero.  State indices run over 0..num_states-1.
    """

    num_states: int
    intensities: Mapping[tuple[int, int], TimeFunction]
    interest: TimeFunction
    horizon: float = 70.0
    state_names: tuple[str, ...] = ()

    @property
    def breakpoints(self) -> tuple[float, ...]:
        pts = set(self.interest.breakpoints)
        for fn in self.intensities.values():
            pts.update(fn.breakpoints)
        return tuple(sorted(pts))

    def validate(self, scan_step: float = 1.0 / 64.0) -> None:
        """Check index ranges and scan a dense grid for negative intensities."""
        if self.num_states < 1:
            raise ValidationError(f"need at least one state, got {self.num_states}")
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ValidationError(f"horizon must be positive and finite, got {self.horizon}")
        for (i, j) in self.intensities:
            if i == j:
                raise ValidationError(f"intensity ({i},{j}) is a diagonal entry")
            if not (0 <= i < self.num_states and 0 <= j < self.num_states):
                raise ValidationError(
                    f"intensity ({i},{j}) references a state outside 0..{self.num_states - 1}"
                )
        ts = _scan_points(0.0, self.horizon, scan_step, self.breakpoints)
        for (i, j), fn in self.intensities.items():
            values = fn.eval_grid(ts)
            bad = values < 0.0
            if bad.any():
                g = int(np.argmax(bad))
                raise ValidationError(
                    f"negative intensity mu_{i}{j}({ts[g]!r}) = {values[g]!r}"
                )
        self.interest.eval_grid(ts)  # raises on non-finite interest


@dataclass(frozen=True)
class MatrixFunction:
    """Piecewise-continuous matrix-valued function of time.

    `sampler(ts, ind_ts)` is an optional vectorized evaluation returning a
    (len(ts), dim, dim) stack with indicator comparisons resolved at ind_ts;
    without it, sampling falls back to the scalar callable.
    """

    dim: int
    func: Callable[[float], np.ndarray]
    breakpoints: tuple[float, ...] = ()
    sampler: Callable | None = field(default=None, compare=False)

    def __call__(self, t: float) -> np.ndarray:
        return self.func(t)

    def sample(self, ts, ind_ts=None) -> np.ndarray:
        if self.sampler is not None:
            return self.sampler(np.asarray(ts, dtype=float), ind_ts)
        return np.stack([self.func(float(x)) for x in np.asarray(ts, dtype=float)])


def make_grid(s: float, t: float, h: float, breakpoints=()) -> np.ndarray:
    """Nodes of a uniform-step grid on [s, t], step <= h, refined so that every
    breakpoint strictly inside (s, t) is a node."""
    if s > t:
        raise ValueError(f"make_grid requires s <= t, got {s} > {t}")
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    if s == t:
        return np.array([float(s)])
    anchors = [float(s)] + [float(b) for b in sorted(set(breakpoints)) if s < b < t] + [float(t)]
    parts = []
    for a, b in zip(anchors[:-1], anchors[1:]):
        n = max(1, int(np.ceil((b - a) / h - 1e-12)))
        seg = np.linspace(a, b, n + 1)
        parts.append(seg if not parts else seg[1:])
    return np.concatenate(parts)


def _scan_points(s, t, h, breakpoints):
    nodes = make_grid(s, t, h, breakpoints)
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    return np.sort(np.concatenate([nodes, mids]))


def intensity_matrix(model: ModelSpec, t: float) -> np.ndarray:
    """Transition intensity matrix at time t; rows sum to zero."""
    J = model.num_states
    out = np.zeros((J, J))
    for (i, j), fn in model.intensities.items():
        v = fn(t)
        if v < 0.0:
            raise ValidationError(f"negative intensity mu_{i}{j}({t!r}) = {v!r}")
        out[i, j] = v
    out[np.diag_indices(J)] = -out.sum(axis=1)
    return out


def intensity_matrix_grid(model: ModelSpec, ts, ind_ts=None) -> np.ndarray:
    """Stack of intensity matrices at each time in `ts` (rows sum to zero)."""
    ts = np.asarray(ts, dtype=float)
    J = model.num_states
    out = np.zeros((len(ts), J, J))
    for (i, j), fn in model.intensities.items():
        values = fn.eval_grid(ts, ind_ts)
        bad = values < 0.0
        if bad.any():
            g = int(np.argmax(bad))
            raise ValidationError(f"negative intensity mu_{i}{j}({ts[g]!r}) = {values[g]!r}")
        out[:, i, j] = values
    diag = -out.sum(axis=2)
    out[:, np.arange(J), np.arange(J)] = diag
    return out


def intensity_matrix_function(model: ModelSpec) -> MatrixFunction:
    return MatrixFunction(
        dim=model.num_states,
        func=lambda t: intensity_matrix(model, t),
        breakpoints=model.breakpoints,
        sampler=lambda ts, ind_ts=None: intensity_matrix_grid(model, ts, ind_ts),
    )


def _per_cell_factors(values: np.ndarray, steps: np.ndarray, scheme: str) -> np.ndarray:
    """Per-cell propagation factors from midpoint samples of the integrand."""
    scaled = values * steps[:, None, None]
    d = values.shape[-1]
    eye = np.broadcast_to(np.eye(d), values.shape)
    if scheme == "euler":
        return eye + scaled
    if scheme == "midpoint-exp":
        out = eye.copy()
        term = eye.copy()
        for j in range(1, 8):
            term = (term @ scaled) / j
            out += term
        return out
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def product_integral(
    A: MatrixFunction,
    s: float,
    t: float,
    scheme: str = "midpoint-exp",
    h: float = DEFAULT_STEP,
) -> np.ndarray:
    """Approximate the product integral of I + A(x) dx over (s, t].

    The grid is uniform with step <= h, refined so every breakpoint of A is a
    node; each cell contributes a factor built from A at the cell midpoint
    (euler: I + A dx; midpoint-exp: 8-term Taylor of exp(A dx)).
    """
    nodes = make_grid(s, t, h, A.breakpoints)
    if len(nodes) == 1:
        return np.eye(A.dim)
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    values = A.sample(mids)
    if not np.isfinite(values).all():
        g = int(np.argmax(~np.isfinite(values).reshape(len(mids), -1).all(axis=1)))
        raise NumericalError(f"non-finite integrand near x={mids[g]!r}")
    factors = _per_cell_factors(values, np.diff(nodes), scheme)
    return _kernels.fold_total(np.ascontiguousarray(factors))


def transition_probabilities(
    model: ModelSpec,
    s: float,
    t: float,
    h: float = DEFAULT_STEP,
    scheme: str = "midpoint-exp",
) -> np.ndarray:
    """P(s, t) via product integration of the intensity matrix.

    Rows must sum to 1 within 1e-10 and entries must lie in [-1e-10, 1+1e-10];
    entries are clamped to [0, 1] on output.
    """
    if not (0.0 <= s <= t):
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    P = product_integral(intensity_matrix_function(model), s, t, scheme=scheme, h=h)
    rows = P.sum(axis=1)
    if np.abs(rows - 1.0).max() > 1e-10:
        raise NumericalError(f"transition probability rows sum to {rows!r}, expected 1")
    if P.min() < -1e-10 or P.max() > 1.0 + 1e-10:
        raise NumericalError("transition probabilities outside [0, 1] beyond tolerance")
    return np.clip(P, 0.0, 1.0)
