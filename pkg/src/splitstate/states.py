"""Reduced spatial density matrices of N-photon split states.

A split state has exactly one photon in each of ``n`` spatial paths. After
the internal (spectral) degree of freedom is traced out, the only non-zero
block of the ``n**n x n**n`` density matrix lives on the ``n!`` index tuples
that are permutations. Simultaneous relabeling of photon positions maps
every row of that block onto the first row, so a state is stored as the
``n!`` complex entries ``rho[id; sigma]`` in lexicographic permutation order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .combinatorics import (
    compose,
    invert,
    is_involution,
    permutations_lex,
)
from .exceptions import UndefinedPhaseError, UnphysicalStateWarning, ValidationError

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10


@lru_cache(maxsize=None)
def _perm_index(n: int) -> dict[tuple[int, ...], int]:
    return {p: i for i, p in enumerate(permutations_lex(n))}


@lru_cache(maxsize=None)
def inverse_index(n: int) -> np.ndarray:
    """``inverse_index(n)[i]`` is the lex index of the inverse of permutation ``i``."""
    index = _perm_index(n)
    out = np.array([index[invert(p)] for p in permutations_lex(n)], dtype=np.intp)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def block_index(n: int) -> np.ndarray:
    """Lex index of the first-row element stored at support-block entry ``(row, col)``.

    Row permutation ``pi`` and column permutation ``tau`` are relabeled so
    that ``pi`` becomes the identity, leaving ``tau ∘ pi^-1``.
    """
    perms = permutations_lex(n)
    index = _perm_index(n)
    table = np.empty((len(perms), len(perms)), dtype=np.intp)
    for r, pi in enumerate(perms):
        pi_inv = invert(pi)
        for c, tau in enumerate(perms):
            table[r, c] = index[compose(tau, pi_inv)]
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class FreeSlot:
    """One entry of the real free-parameter vector.

    ``part`` is ``"real"`` for an involution (a real element), ``"re"`` or
    ``"im"`` for the two halves of a conjugate-pair representative.
    """

    perm_index: int
    partner_index: int
    part: str


@lru_cache(maxsize=None)
def free_layout(n: int) -> tuple[FreeSlot, ...]:
    """Slot layout of the free-parameter vector.

    Permutations are visited in lex order. A permutation whose inverse comes
    earlier is skipped; an involution gets one slot, and the smaller member of
    a conjugate pair gets two consecutive slots (real part, then imaginary).
    For three photons this yields ``rho_1 .. rho_6`` with the cyclic element
    ``(1, 2, 0)`` split over slots 4 and 5.
    """
    inv = inverse_index(n)
    slots = []
    for i, p in enumerate(permutations_lex(n)):
        j = int(inv[i])
        if j < i:
            continue
        if j == i:
            slots.append(FreeSlot(i, i, "real"))
        else:
            slots.append(FreeSlot(i, j, "re"))
            slots.append(FreeSlot(i, j, "im"))
    return tuple(slots)


@dataclass(frozen=True, eq=False)
class SplitStateDensity:
    """First row ``rho[id; sigma]`` of a split-state density matrix.

    Attributes:
        n: number of photons.
        first_row: complex array of length ``n!`` in lex permutation order.
    """

    n: int
    first_row: np.ndarray

    def __post_init__(self):
        row = np.array(self.first_row, dtype=complex)
        if row.shape != (math.factorial(self.n),):
            raise ValidationError(
                f"first_row must have length {math.factorial(self.n)} for n={self.n}, got shape {row.shape}"
            )
        row.setflags(write=False)
        object.__setattr__(self, "first_row", row)

    def __getitem__(self, perm) -> complex:
        return complex(self.first_row[_perm_index(self.n)[tuple(perm)]])

    @property
    def trace(self) -> float:
        return float(math.factorial(self.n) * self.first_row[0].real)

    def to_json(self) -> dict:
        return {"n": self.n, "first_row": [[float(z.real), float(z.imag)] for z in self.first_row]}

    @classmethod
    def from_json(cls, doc: dict) -> "SplitStateDensity":
        row = [complex(re, im) for re, im in doc["first_row"]]
        return cls(int(doc["n"]), np.array(row))


def check_overlaps(overlaps, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate an overlap (Gram) matrix and return it as a complex array.

    Raises:
        ValidationError: if the matrix is not square, not Hermitian, has a
            diagonal other than one, or has an entry of modulus above one.
    """
    mat = np.asarray(overlaps, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise ValidationError(f"overlap matrix must be square, got shape {mat.shape}")
    if np.max(np.abs(mat - mat.conj().T)) > tol:
        raise ValidationError("overlap matrix is not Hermitian")
    if np.max(np.abs(np.diag(mat) - 1.0)) > tol:
        raise ValidationError("overlap matrix must have unit diagonal")
    if np.max(np.abs(mat)) > 1.0 + tol:
        raise ValidationError("overlap magnitudes must not exceed one")
    return mat


def overlaps_from_pairs(n: int, pairs: dict[tuple[int, int], complex]) -> np.ndarray:
    """Build a full overlap matrix from ``{(i, j): <phi_i|phi_j>}`` entries."""
    mat = np.eye(n, dtype=complex)
    for (i, j), value in pairs.items():
        mat[i, j] = value
        mat[j, i] = np.conj(value)
    return mat


def density_from_overlaps(overlaps) -> SplitStateDensity:
    """Split state of photons with uncorrelated spectra.

    ``rho[id; sigma] = (1/n!) * prod_k I[k, sigma(k)]`` where ``I`` holds the
    pairwise spectral overlaps ``<phi_i|phi_j>``. A non-PSD overlap matrix is
    accepted with an :class:`UnphysicalStateWarning`.
    """
    mat = check_overlaps(overlaps)
    n = mat.shape[0]
    if np.linalg.eigvalsh(mat)[0] < -PSD_TOL:
        warnings.warn("overlap matrix is not positive semidefinite", UnphysicalStateWarning, stacklevel=2)
    perms = np.array(permutations_lex(n))
    row = np.prod(mat[np.arange(n), perms], axis=1) / math.factorial(n)
    return SplitStateDensity(n, row)


def to_free_vector(rho: SplitStateDensity) -> np.ndarray:
    values = []
    for slot in free_layout(rho.n):
        z = rho.first_row[slot.perm_index]
        values.append(z.imag if slot.part == "im" else z.real)
    return np.array(values, dtype=float)


def from_free_vector(values, n: int) -> SplitStateDensity:
    v = np.asarray(values, dtype=float)
    if v.shape != (math.factorial(n),):
        raise ValueError(f"free vector for n={n} must have length {math.factorial(n)}, got {v.shape}")
    row = np.zeros(math.factorial(n), dtype=complex)
    for k, slot in enumerate(free_layout(n)):
        if slot.part == "real":
            row[slot.perm_index] = v[k]
        elif slot.part == "re":
            row[slot.perm_index] += v[k]
            row[slot.partner_index] += v[k]
        else:
            row[slot.perm_index] += 1j * v[k]
            row[slot.partner_index] -= 1j * v[k]
    return SplitStateDensity(n, row)


def support_block(rho: SplitStateDensity) -> np.ndarray:
    """The ``n! x n!`` block of the reduced density matrix on permutation indices."""
    return rho.first_row[block_index(rho.n)]


def density_from_block(block: np.ndarray, n: int) -> SplitStateDensity:
    """Inverse of :func:`support_block`: read back the identity row."""
    return SplitStateDensity(n, np.asarray(block)[0])


def collective_phase(rho: SplitStateDensity, tol: float = 1e-15) -> float:
    """Argument of the three-photon cyclic element ``rho[012; 120]``.

    For states built from overlaps this is ``arg(I01 * I12 * I20)``.
    """
    if rho.n != 3:
        raise NotImplementedError("collective phase is defined here for three photons only")
    z = rho[(1, 2, 0)]
    if abs(z) <= tol:
        raise UndefinedPhaseError("cyclic element vanishes; collective phase undefined")
    return float(np.angle(z))


@dataclass(frozen=True)
class Diagnostics:
    pairing_residual: float
    involution_imag: float
    trace_deviation: float
    min_eigenvalue: float

    def is_physical(self, tol: float = PSD_TOL) -> bool:
        return (
            self.pairing_residual <= tol
            and self.involution_imag <= tol
            and self.trace_deviation <= tol
            and self.min_eigenvalue >= -tol
        )


def validate_physical(rho: SplitStateDensity) -> Diagnostics:
    """Report how far ``rho`` is from a valid normalized density matrix."""
    row = rho.first_row
    inv = inverse_index(rho.n)
    pairing = float(np.max(np.abs(row[inv] - row.conj())))
    perms = permutations_lex(rho.n)
    invol = [i for i, p in enumerate(perms) if is_involution(p)]
    block = support_block(rho)
    herm = 0.5 * (block + block.conj().T)
    return Diagnostics(
        pairing_residual=pairing,
        involution_imag=float(np.max(np.abs(row[invol].imag))),
        trace_deviation=abs(float(np.trace(block).real) - 1.0),
        min_eigenvalue=float(np.linalg.eigvalsh(herm)[0]),
    )
