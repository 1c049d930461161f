"""Permutation and detector-set enumeration plus split-state counting results.

Lexicographic order is the single canonical order in this package:
permutations index the density-matrix columns and detector sets index the
rows of the correlation vector.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

from .exceptions import SizeLimitError

Permutation = tuple[int, ...]

MAX_ENUMERATION = 8


@dataclass(frozen=True)
class ParameterCounts:
    """Number of independent real-valued parameters of an N-photon split state."""

    total: int
    real: int
    imag: int


def _check_enumerable(n: int) -> None:
    if not 1 <= n <= MAX_ENUMERATION:
        raise SizeLimitError(f"photon count must be in [1, {MAX_ENUMERATION}], got {n}")


@lru_cache(maxsize=None)
def permutations_lex(n: int) -> tuple[Permutation, ...]:
    """All ``n!`` permutations of ``range(n)`` in lexicographic order."""
    _check_enumerable(n)
    return tuple(itertools.permutations(range(n)))


def combinations_lex(m: int, n: int) -> tuple[tuple[int, ...], ...]:
    """Strictly increasing ``n``-subsets of ``range(m)`` in lexicographic order.

    Raises:
        ValueError: if ``n > m`` or either argument is negative.
    """
    if n < 0 or m < 0 or n > m:
        raise ValueError(f"need 0 <= n <= m, got m={m}, n={n}")
    return _combinations(m, n)


@lru_cache(maxsize=None)
def _combinations(m: int, n: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(m), n))


def is_permutation(p) -> bool:
    return sorted(p) == list(range(len(p)))


def invert(p: Permutation) -> Permutation:
    """Inverse permutation, so that ``p[invert(p)[k]] == k``."""
    inv = [0] * len(p)
    for i, v in enumerate(p):
        inv[v] = i
    return tuple(inv)


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Function composition ``p ∘ q``: ``k -> p[q[k]]``."""
    return tuple(p[k] for k in q)


def is_involution(p: Permutation) -> bool:
    return all(p[p[k]] == k for k in range(len(p)))


def involution_count(n: int) -> int:
    """Number of self-inverse permutations of ``n`` elements.

    Uses the recurrence ``A(n) = A(n-1) + (n-1) A(n-2)`` with ``A(1) = 1`` and
    ``A(2) = 2``. There is no size cap.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    prev, cur = 1, 1  # A(0), A(1)
    for k in range(2, n + 1):
        prev, cur = cur, cur + (k - 1) * prev
    return cur


def free_parameter_counts(n: int) -> ParameterCounts:
    total = math.factorial(n)
    a = involution_count(n)
    return ParameterCounts(total=total, real=(total + a) // 2, imag=(total - a) // 2)


def min_output_ports(n: int) -> int:
    """Smallest number of output ports ``M`` with ``C(M, n) >= n!``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    target = math.factorial(n)
    m = n
    while math.comb(m, n) < target:
        m += 1
    return m
