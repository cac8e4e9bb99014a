"""Simulation oracle: path sampling by thinning and present-value statistics.

Paths of the state process are generated by thinning against a per-cell
dominating rate (1.01 times the max of the total exit intensity at the cell
endpoints and midpoint).  Candidate times come from inverting the piecewise
linear cumulative hazard of the dominating rate; acceptance evaluates the
exact intensities at the candidate time.  Each path consumes its own
counter-based substream keyed by (seed, path index), so statistics are
reproducible bit for bit independent of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NumericalError
from .markov import DEFAULT_STEP, ModelSpec
from .moments.multiindex import lex_enumerate
from .moments.pregrid import GriddedInputs
from .payments import PaymentSet

__all__ = ["SamplePath", "PathSimulator", "simulate_path", "present_value_samples", "SimulationResult"]

_MAX_CANDIDATES = 100_000


@dataclass(frozen=True)
class SamplePath:
    """One realized trajectory on (s, t]: jump times and visited states."""

    start: float
    end: float
    initial_state: int
    jump_times: tuple[float, ...]
    states: tuple[int, ...]  # state entered at each jump

    def final_state(self) -> int:
        return self.states[-1] if self.states else self.initial_state

    def occupancy(self):
        """Intervals (state, from, to) partitioning (start, end]."""
        out = []
        state, a = self.initial_state, self.start
        for tau, nxt in zip(self.jump_times, self.states):
            out.append((state, a, tau))
            state, a = nxt, tau
        out.append((state, a, self.end))
        return out


class _BoundExceeded(Exception):
    pass


class PathSimulator:
    """Reusable thinning sampler (and payment integrator) on a fixed grid."""

    def __init__(
        self,
        model: ModelSpec,
        payments: PaymentSet | None = None,
        s: float = 0.0,
        t: float | None = None,
        h: float = DEFAULT_STEP,
        _depth: int = 0,
    ):
        self.model = model
        self.payments = payments
        self.inputs = GriddedInputs(model, payments, s=s, t=t, h=h)
        self.s = self.inputs.s
        self.t = self.inputs.t
        self.h = h
        self._depth = _depth
        self._fine: PathSimulator | None = None

        nodes, mids = self.inputs.nodes, self.inputs.mids
        J = model.num_states
        exit_nodes = np.zeros((len(nodes), J))
        exit_mids = np.zeros((len(mids), J))
        self._programs: dict[int, list[tuple[int, tuple]]] = {i: [] for i in range(J)}
        for (i, j), fn in model.intensities.items():
            exit_nodes[:, i] += fn.eval_grid(nodes)
            exit_mids[:, i] += fn.eval_grid(mids)
            self._programs[i].append((j, fn.program()))
        cellmax = np.maximum(np.maximum(exit_nodes[:-1], exit_nodes[1:]), exit_mids)
        self._bounds = 1.01 * cellmax.T  # (J, cells)
        self._hazard = np.zeros((J, len(nodes)))
        np.cumsum(self._bounds * self.inputs.steps, axis=1, out=self._hazard[:, 1:])

        if payments is not None:
            self._prepare_payment_quadrature()

    # -- path generation ---------------------------------------------------

    def _stream(self, seed: int, path_index: int) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(key=np.array([seed, path_index], dtype=np.uint64))
        )

    def _rates_at(self, state: int, tau: float):
        rates = []
        total = 0.0
        for j, (ops, args, consts) in self._programs[state]:
            v = _kernels.eval_program(ops, args, consts, tau)
            if not np.isfinite(v) or v < 0.0:
                raise NumericalError(f"intensity evaluation failed at t={tau!r}")
            rates.append((j, v))
            total += v
        return rates, total

    def _hazard_at(self, state: int, tau: float) -> float:
        g = min(np.searchsorted(self.inputs.nodes, tau, side="right") - 1, len(self.inputs.steps) - 1)
        g = max(g, 0)
        return self._hazard[state, g] + self._bounds[state, g] * (tau - self.inputs.nodes[g])

    def _generate(self, i0: int, rng: np.random.Generator) -> SamplePath:
        nodes = self.inputs.nodes
        state, tau = i0, self.s
        jumps: list[float] = []
        states: list[int] = []
        level = self._hazard_at(state, tau)
        for _ in range(_MAX_CANDIDATES):
            level += rng.standard_exponential()
            if level >= self._hazard[state, -1]:
                break
            g = int(np.searchsorted(self._hazard[state], level, side="right") - 1)
            bound = self._bounds[state, g]
            cand = nodes[g] + (level - self._hazard[state, g]) / bound
            rates, total = self._rates_at(state, cand)
            if total > bound * (1.0 + 1e-12):
                raise _BoundExceeded(state, cand)
            if rng.random() * bound < total:
                pick = rng.random() * total
                acc = 0.0
                dest = rates[-1][0]
                for j, v in rates:
                    acc += v
                    if pick < acc:
                        dest = j
                        break
                jumps.append(float(cand))
                states.append(int(dest))
                state, tau = dest, cand
                level = self._hazard_at(state, tau)
        else:
            raise NumericalError(f"path exceeded {_MAX_CANDIDATES} candidate events")
        return SamplePath(self.s, self.t, i0, tuple(jumps), tuple(states))

    def simulate(self, i0: int, seed: int, path_index: int) -> SamplePath:
        """Sample one path; falls back to an 8x finer grid when a dominating
        bound is exceeded (non-monotone intensity spike within a cell)."""
        if not (0 <= i0 < self.model.num_states):
            raise ValueError(f"initial state {i0} outside 0..{self.model.num_states - 1}")
        try:
            return self._generate(i0, self._stream(seed, path_index))
        except _BoundExceeded as exc:
            if self._depth >= 1:
                raise NumericalError(
                    f"dominating bound exceeded at t={exc.args[1]!r} even after refinement"
                ) from None
            if self._fine is None:
                self._fine = PathSimulator(
                    self.model, self.payments, self.s, self.t, self.h / 8.0, _depth=1
                )
            return self._fine.simulate(i0, seed, path_index)

    # -- discounted payment accumulation ------------------------------------

    def _prepare_payment_quadrature(self):
        p = self.payments
        inputs = self.inputs
        nodes = inputs.nodes
        r_nodes = self.model.interest.eval_grid(nodes)
        self._cum_r = np.zeros(len(nodes))
        np.cumsum(0.5 * (r_nodes[:-1] + r_nodes[1:]) * inputs.steps, out=self._cum_r[1:])
        self._r_nodes = r_nodes
        self._r_prog = self.model.interest.program()

        n, J = p.num_contracts, p.num_states
        v_left = np.exp(-self._cum_r[:-1])
        v_right = np.exp(-self._cum_r[1:])
        self._f_left = np.zeros((n, J, inputs.num_cells))
        self._f_right = np.zeros((n, J, inputs.num_cells))
        self._prefix = np.zeros((n, J, len(nodes)))
        for ell in range(n):
            bl = inputs.sojourn(ell, "left")  # (cells, J)
            br = inputs.sojourn(ell, "right")
            self._f_left[ell] = (v_left[:, None] * bl).T
            self._f_right[ell] = (v_right[:, None] * br).T
            w = 0.5 * (self._f_left[ell] + self._f_right[ell]) * inputs.steps[None, :]
            np.cumsum(w, axis=1, out=self._prefix[ell, :, 1:])
        self._trans_progs: dict[tuple[int, int], list[tuple[int, tuple]]] = {}
        for (ell, i, j), fn in p.transition.items():
            self._trans_progs.setdefault((i, j), []).append((ell, fn.program()))

    def _discount(self, x: float) -> float:
        g = min(np.searchsorted(self.inputs.nodes, x, side="right") - 1, len(self.inputs.steps) - 1)
        g = max(g, 0)
        node = self.inputs.nodes[g]
        ops, args, consts = self._r_prog
        r_x = _kernels.eval_program(ops, args, consts, x)
        return float(np.exp(-(self._cum_r[g] + 0.5 * (self._r_nodes[g] + r_x) * (x - node))))

    def _sojourn_value(self, ell: int, state: int, x: float, v_x: float) -> float:
        fn = self.payments.sojourn.get((ell, state))
        if fn is None:
            return 0.0
        ops, args, consts = fn.program()
        return v_x * _kernels.eval_program(ops, args, consts, x)

    def present_value(self, path: SamplePath) -> np.ndarray:
        """Discounted accumulated payments of each contract along the path.

        Sojourn parts use the grid trapezoid rule clipped to the occupancy
        intervals; transition payments are evaluated exactly at jump times.
        """
        p = self.payments
        if p is None:
            raise ValueError("PathSimulator was built without payments")
        nodes = self.inputs.nodes
        out = np.zeros(p.num_contracts)
        for state, a, b in path.occupancy():
            if b <= a:
                continue
            ga = max(int(np.searchsorted(nodes, a, side="right")) - 1, 0)
            gb = max(int(np.searchsorted(nodes, b, side="left")) - 1, 0)
            inner_a, inner_b = a, b
            va = self._discount(a) if a > self.s else 1.0
            vb = self._discount(b)
            for ell in range(p.num_contracts):
                if (ell, state) not in p.sojourn:
                    continue
                if ga == gb:
                    fa = self._sojourn_value(ell, state, a, va)
                    fb = self._sojourn_value(ell, state, b, vb)
                    out[ell] += 0.5 * (fa + fb) * (b - a)
                    continue
                total = self._prefix[ell, state, gb] - self._prefix[ell, state, ga + 1]
                fa = self._sojourn_value(ell, state, inner_a, va)
                total += 0.5 * (fa + self._f_right[ell, state, ga]) * (nodes[ga + 1] - a)
                fb = self._sojourn_value(ell, state, inner_b, vb)
                total += 0.5 * (self._f_left[ell, state, gb] + fb) * (b - nodes[gb])
                out[ell] += total
        prev = path.initial_state
        for tau, nxt in zip(path.jump_times, path.states):
            progs = self._trans_progs.get((prev, nxt))
            if progs:
                v_tau = self._discount(tau)
                for ell, (ops, args, consts) in progs:
                    out[ell] += v_tau * _kernels.eval_program(ops, args, consts, tau)
            prev = nxt
        return out


def simulate_path(
    model: ModelSpec,
    s: float,
    t: float,
    i0: int,
    seed: int,
    path_index: int = 0,
    h: float = DEFAULT_STEP,
) -> SamplePath:
    """Sample one trajectory of the state process on (s, t]."""
    return PathSimulator(model, None, s, t, h).simulate(i0, seed, path_index)


@dataclass(frozen=True)
class SimulationResult:
    """Empirical statistics of the simulated present values."""

    paths: int
    initial_state: int
    mean: np.ndarray
    mean_se: np.ndarray
    cov: np.ndarray
    cov_se: np.ndarray
    raw_moments: dict
    raw_moment_se: dict
    occupancy: np.ndarray
    occupancy_se: np.ndarray
    samples: np.ndarray


def present_value_samples(
    model: ModelSpec,
    payments: PaymentSet,
    s: float,
    t: float,
    paths: int,
    seed: int,
    i0: int = 0,
    h: float = DEFAULT_STEP,
    k=None,
) -> SimulationResult:
    """Monte Carlo moments of U(s, t) with plain sample standard errors.

    Raw mixed moments are reported for every order y <= k when k is given.
    """
    if paths < 2:
        raise ValueError(f"need at least 2 paths, got {paths}")
    sim = PathSimulator(model, payments, s, t, h)
    J = model.num_states
    n = payments.num_contracts
    samples = np.empty((paths, n))
    end_states = np.empty(paths, dtype=np.int64)
    for idx in range(paths):
        path = sim.simulate(i0, seed, idx)
        samples[idx] = sim.present_value(path)
        end_states[idx] = path.final_state()

    mean = samples.mean(axis=0)
    mean_se = samples.std(axis=0, ddof=1) / np.sqrt(paths)
    centered = samples - mean
    prods = centered[:, :, None] * centered[:, None, :]
    cov = prods.sum(axis=0) / (paths - 1)
    cov_se = prods.std(axis=0, ddof=1) / np.sqrt(paths)

    raw_moments: dict = {}
    raw_moment_se: dict = {}
    if k is not None:
        for y in lex_enumerate(k):
            powers = np.prod(samples**np.asarray(y, dtype=float), axis=1)
            raw_moments[y] = float(powers.mean())
            raw_moment_se[y] = float(powers.std(ddof=1) / np.sqrt(paths))

    occupancy = np.bincount(end_states, minlength=J) / paths
    occupancy_se = np.sqrt(occupancy * (1.0 - occupancy) / paths)
    return SimulationResult(
        paths=paths,
        initial_state=i0,
        mean=mean,
        mean_se=mean_se,
        cov=cov,
        cov_se=cov_se,
        raw_moments=raw_moments,
        raw_moment_se=raw_moment_se,
        occupancy=occupancy,
        occupancy_se=occupancy_se,
        samples=samples,
    )
