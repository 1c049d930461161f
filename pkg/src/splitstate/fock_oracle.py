"""Brute-force simulator of partially distinguishable photons with click detectors.

Each input photon is a creation operator spread over (output port, internal
mode) pairs. The product of these operators is expanded term by term,
terms are grouped by the occupation pattern they create, and bosonic
normalization is applied per pattern. Nothing here uses permanents; the
module exists to check :mod:`splitstate.tomography` independently.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .combinatorics import combinations_lex
from .exceptions import FactorizationError, SizeLimitError

MAX_PHOTONS = 4
MAX_PORTS = 8
MAX_INTERNAL = 4


@dataclass(frozen=True, eq=False)
class InternalState:
    """Internal-mode amplitudes of each photon; ``vectors[k]`` is photon ``k``."""

    vectors: np.ndarray

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def r(self) -> int:
        return self.vectors.shape[1]

    def overlaps(self) -> np.ndarray:
        """Gram matrix ``<v_i|v_j>``."""
        return self.vectors.conj() @ self.vectors.T


def internal_from_overlaps(overlaps, r: int | None = None, tol: float = 1e-10) -> InternalState:
    """Unit vectors in ``r`` internal modes whose Gram matrix is ``overlaps``.

    Uses the eigendecomposition ``I = W diag(lam) W^dag`` and keeps the ``r``
    largest eigenvalues, so rank-deficient overlap matrices are fine as long
    as ``r`` covers the rank.
    """
    mat = np.asarray(overlaps, dtype=complex)
    n = mat.shape[0]
    r = n if r is None else r
    lam, w = np.linalg.eigh(mat)
    if lam[0] < -tol:
        raise FactorizationError(f"overlap matrix is not positive semidefinite (min eigenvalue {lam[0]:.3g})")
    lam = np.clip(lam, 0.0, None)
    order = np.argsort(lam)[::-1]
    if np.any(lam[order[r:]] > tol):
        raise FactorizationError(f"overlap matrix rank exceeds internal dimension r={r}")
    keep = order[:r]
    # v_i[a] = conj(w[i, a]) sqrt(lam[a])  =>  sum_a conj(v_i[a]) v_j[a] = mat[i, j]
    vectors = np.conj(w[:, keep]) * np.sqrt(lam[keep])
    if r > len(keep):
        vectors = np.hstack([vectors, np.zeros((n, r - len(keep)), dtype=complex)])
    return InternalState(vectors)


def output_distribution(u: np.ndarray, ports, internal: InternalState) -> dict[tuple[int, ...], float]:
    """Probability of every output occupation pattern over (port, internal mode) pairs.

    Keys are sorted tuples of flattened mode labels ``port * r + mode``.
    """
    u = np.asarray(u, dtype=complex)
    ports = list(ports)
    n = len(ports)
    m = u.shape[0]
    r = internal.r
    if n != internal.n:
        raise ValueError(f"{n} ports but {internal.n} internal vectors")
    if n > MAX_PHOTONS or m > MAX_PORTS or r > MAX_INTERNAL:
        raise SizeLimitError(
            f"oracle limited to n<={MAX_PHOTONS}, m<={MAX_PORTS}, r<={MAX_INTERNAL}; got n={n}, m={m}, r={r}"
        )
    # single-photon amplitude on each (port, mode) for every photon
    amps = [
        [u[d, ports[k]] * internal.vectors[k, a] for d in range(m) for a in range(r)]
        for k in range(n)
    ]
    modes = range(m * r)
    pattern_amp: dict[tuple[int, ...], complex] = defaultdict(complex)
    for assignment in itertools.product(modes, repeat=n):
        coeff = 1.0 + 0.0j
        for k, mode in enumerate(assignment):
            coeff *= amps[k][mode]
            if coeff == 0:
                break
        if coeff != 0:
            pattern_amp[tuple(sorted(assignment))] += coeff
    probs = {}
    for pattern, amp in pattern_amp.items():
        norm = 1
        for mode in set(pattern):
            norm *= math.factorial(pattern.count(mode))
        probs[pattern] = abs(amp) ** 2 * norm
    return probs


def oracle_correlations(u: np.ndarray, ports, internal: InternalState) -> np.ndarray:
    """N-fold coincidences on distinct detectors, lex-ordered by detector set.

    Click detectors see neither photon number nor internal mode, so each
    entry sums every pattern with exactly one photon per detector of the set.
    """
    r = internal.r
    probs = output_distribution(u, ports, internal)
    m = np.asarray(u).shape[0]
    n = len(list(ports))
    index = {det: i for i, det in enumerate(combinations_lex(m, n))}
    gamma = np.zeros(len(index))
    for pattern, p in probs.items():
        detectors = tuple(mode // r for mode in pattern)
        if len(set(detectors)) == n:
            gamma[index[detectors]] += p
    return gamma
