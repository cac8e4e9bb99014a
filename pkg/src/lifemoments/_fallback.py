"""Pure-Python/numpy implementations of the hot kernels.

Selected at import time by `_kernels` when the compiled extension is
unavailable (or disabled via LIFEMOMENTS_PURE_PYTHON=1).  Semantics match
`_core.pyx` operation for operation.
"""

from __future__ import annotations

import math

import numpy as np

from .timefun import (
    OP_ADD,
    OP_CONST,
    OP_DIV,
    OP_EXP,
    OP_GE,
    OP_GT,
    OP_LE,
    OP_LN,
    OP_LT,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SUB,
    OP_T,
)

BACKEND = "python"


def fold_total(factors: np.ndarray) -> np.ndarray:
    """Ordered product factors[0] @ factors[1] @ ... @ factors[-1]."""
    out = np.eye(factors.shape[1])
    for f in factors:
        out = out @ f
    return out


def fold_suffix(factors: np.ndarray) -> np.ndarray:
    """All suffix products: out[g] = factors[g] @ ... @ factors[-1], out[G] = I."""
    n, d, _ = factors.shape
    out = np.empty((n + 1, d, d))
    out[n] = np.eye(d)
    for g in range(n - 1, -1, -1):
        out[g] = factors[g] @ out[g + 1]
    return out


def rk4_backward(k_left, k_mid, k_right, terminal, steps) -> np.ndarray:
    """Backward RK4 sweep of the linear system dY/ds = K(s) Y.

    k_left[g], k_mid[g], k_right[g] are K at the left endpoint, midpoint and
    right endpoint of cell g (endpoint values taken as the one-sided limits
    valid inside the cell).  Returns the trajectory at every node, terminal
    condition at the last node.
    """
    n = len(steps)
    out = np.empty((n + 1,) + terminal.shape)
    out[n] = terminal
    for g in range(n - 1, -1, -1):
        h = steps[g]
        y = out[g + 1]
        s1 = k_right[g] @ y
        s2 = k_mid[g] @ (y - 0.5 * h * s1)
        s3 = k_mid[g] @ (y - 0.5 * h * s2)
        s4 = k_left[g] @ (y - h * s3)
        out[g] = y - (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
    return out


def eval_program(ops, args, consts, t: float) -> float:
    """Stack-machine evaluation of a compiled TimeFunction at scalar t.

    Mirrors C semantics: domain faults yield nan/inf rather than raising;
    products with a zero factor short-circuit to 0.
    """
    stack: list[float] = []
    push = stack.append
    for op, arg in zip(ops, args):
        if op == OP_CONST:
            push(consts[arg])
        elif op == OP_T:
            push(t)
        elif op == OP_NEG:
            stack[-1] = -stack[-1]
        elif op == OP_ADD:
            b = stack.pop()
            stack[-1] = stack[-1] + b
        elif op == OP_SUB:
            b = stack.pop()
            stack[-1] = stack[-1] - b
        elif op == OP_MUL:
            b = stack.pop()
            a = stack[-1]
            stack[-1] = 0.0 if (a == 0.0 or b == 0.0) else a * b
        elif op == OP_DIV:
            b = stack.pop()
            stack[-1] = stack[-1] / b if b != 0.0 else math.nan
        elif op == OP_EXP:
            try:
                stack[-1] = math.exp(stack[-1])
            except OverflowError:
                stack[-1] = math.inf
        elif op == OP_LN:
            a = stack[-1]
            stack[-1] = math.log(a) if a > 0.0 else math.nan
        elif op == OP_POW:
            b = stack.pop()
            a = stack[-1]
            try:
                stack[-1] = math.pow(a, b)
            except ValueError:
                stack[-1] = math.inf if a == 0.0 else math.nan
            except OverflowError:
                stack[-1] = math.inf
        elif op == OP_LT:
            b = stack.pop()
            stack[-1] = 1.0 if stack[-1] < b else 0.0
        elif op == OP_LE:
            b = stack.pop()
            stack[-1] = 1.0 if stack[-1] <= b else 0.0
        elif op == OP_GT:
            b = stack.pop()
            stack[-1] = 1.0 if stack[-1] > b else 0.0
        elif op == OP_GE:
            b = stack.pop()
            stack[-1] = 1.0 if stack[-1] >= b else 0.0
        else:
            raise ValueError(f"bad opcode {op}")
    return stack[-1]
