"""Multi-index bookkeeping for mixed moments.

A moment order is a tuple k in N_0^n.  Its lower set S(k) consists of all
nonzero xi <= k (componentwise) and has prod(k_l + 1) - 1 elements; the
block constructions require S(k) in lexicographic order (strictly larger in
the first differing coordinate).
"""

from __future__ import annotations

import itertools
import math

__all__ = [
    "order_sum",
    "lower_set_size",
    "lex_enumerate",
    "check_lex_closure",
    "binom_prod",
    "unit_index",
]


def order_sum(k) -> int:
    """Total order: sum of the entries."""
    return sum(int(v) for v in k)


def lower_set_size(k) -> int:
    """Number of nonzero multi-indices below k: prod(k_l + 1) - 1."""
    out = 1
    for v in k:
        out *= int(v) + 1
    return out - 1


def unit_index(n: int, ell: int) -> tuple[int, ...]:
    return tuple(1 if i == ell else 0 for i in range(n))


def lex_enumerate(k) -> list[tuple[int, ...]]:
    """S(k) in lexicographic order (itertools.product yields it directly)."""
    k = tuple(int(v) for v in k)
    if any(v < 0 for v in k):
        raise ValueError(f"multi-index must be nonnegative, got {k}")
    return [y for y in itertools.product(*(range(v + 1) for v in k)) if any(y)]


def check_lex_closure(k) -> bool:
    """Difference-closure property of the lexicographic ordering.

    With y^0 = 0 and y^1, ..., y^{|k|} the ordered lower set, checks that for
    every i and every m < i with y^i >= y^m, the lower set of y^i - y^m is
    exactly covered by the differences {y^i - y^j : j = m, ..., i-1}.  The
    block-matrix moment construction silently relies on this.
    """
    ys = [tuple(0 for _ in k)] + lex_enumerate(k)
    for i in range(1, len(ys)):
        yi = ys[i]
        for m in range(i):
            ym = ys[m]
            if not all(a >= b for a, b in zip(yi, ym)):
                continue
            differences = {tuple(a - b for a, b in zip(yi, ys[j])) for j in range(m, i)}
            diff = tuple(a - b for a, b in zip(yi, ym))
            for xi in lex_enumerate(diff):
                if xi not in differences:
                    return False
    return True


def binom_prod(a, b) -> int:
    """Product of componentwise binomial coefficients, exact integer."""
    out = 1
    for x, y in zip(a, b):
        out *= math.comb(int(x), int(y))
    return out
