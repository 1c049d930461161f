"""Measurement matrix, correlation prediction and state reconstruction.

For input columns ``u_r`` of the circuit transfer matrix and a detector set
``D = (d_0 < ... < d_{N-1})``, the probability of one click on every detector
of ``D`` is linear in the first row of the split-state density matrix:

    Gamma[D] = sum_sigma t[D, sigma] rho[id; sigma]
    t[D, sigma] = N! * perm(M),   M[j, k] = u_r[d_j, sigma(k)] * conj(u_r[d_j, k])

Collecting conjugate pairs turns this into a real map from the free-parameter
vector: involution columns keep ``Re t``, a pair representative contributes
``2 Re t`` (real slot) and ``-2 Im t`` (imaginary slot).
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .combinatorics import MAX_ENUMERATION, combinations_lex, permutations_lex
from .exceptions import PreconditionError, RankWarning, SizeLimitError
from .states import (
    SplitStateDensity,
    density_from_block,
    free_layout,
    support_block,
)

CONVENTION = "free-vector/pair-factor-2"
SINGULAR_RATIO = 1e-14
PINV_RCOND = 1e-12
PSD_TOL = 1e-10


def _permanent_naive(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    cols = np.arange(n)
    total = np.zeros(a.shape[:-2], dtype=np.result_type(a.dtype, complex))
    for tau in permutations_lex(n):
        total = total + np.prod(a[..., tau, cols], axis=-1)
    return total


def _permanent_ryser(a: np.ndarray) -> np.ndarray:
    # Gray-code walk over column subsets: one column enters or leaves per step.
    n = a.shape[-1]
    row_sums = np.zeros(a.shape[:-1], dtype=np.result_type(a.dtype, complex))
    total = np.zeros(a.shape[:-2], dtype=row_sums.dtype)
    gray = 0
    for k in range(1, 2**n):
        bit = (k & -k).bit_length() - 1
        gray ^= 1 << bit
        if gray & (1 << bit):
            row_sums = row_sums + a[..., :, bit]
        else:
            row_sums = row_sums - a[..., :, bit]
        sign = -1.0 if bin(gray).count("1") % 2 else 1.0
        total = total + sign * np.prod(row_sums, axis=-1)
    return (-1) ** n * total


def permanents(a: np.ndarray, method: str = "auto") -> np.ndarray:
    """Permanents of a stack of square matrices (last two axes).

    ``method`` is ``"naive"`` (sum over all permutations), ``"ryser"``, or
    ``"auto"``, which uses Ryser from size 4 upward.
    """
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"permanent needs square matrices, got shape {a.shape}")
    n = a.shape[-1]
    if n > MAX_ENUMERATION:
        raise SizeLimitError(f"permanent limited to size {MAX_ENUMERATION}, got {n}")
    if n == 0:
        return np.ones(a.shape[:-2], dtype=complex)
    if method == "auto":
        method = "ryser" if n >= 4 else "naive"
    if method == "naive":
        return _permanent_naive(a)
    if method == "ryser":
        return _permanent_ryser(a)
    raise ValueError(f"unknown permanent method {method!r}")


def permanent(a, method: str = "auto") -> complex:
    """Permanent ``sum_tau prod_k a[tau(k), k]`` of a single square matrix."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"permanent needs a 2-d square matrix, got shape {a.shape}")
    return complex(permanents(a, method))


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """Linear map from density-matrix parameters to coincidence probabilities.

    Attributes:
        t_complex: ``C(m, n) x n!`` map acting on the complex first row.
        t_real: ``C(m, n) x n!`` map acting on the real free vector.
        m: number of output ports.
        n: number of photons.
        input_ports: input ports the columns of ``u_r`` came from, if known.
    """

    t_complex: np.ndarray
    t_real: np.ndarray
    m: int
    n: int
    input_ports: tuple[int, ...] = ()
    convention: str = CONVENTION

    @property
    def detector_sets(self):
        return combinations_lex(self.m, self.n)

    def metadata(self) -> dict:
        return {"m": self.m, "n": self.n, "input_ports": list(self.input_ports), "convention": self.convention}

    def to_csv(self) -> str:
        labels = []
        perms = permutations_lex(self.n)
        for slot in free_layout(self.n):
            p = "".join(map(str, perms[slot.perm_index]))
            labels.append(p if slot.part == "real" else f"{slot.part}:{p}")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["detectors", *labels])
        for det, row in zip(self.detector_sets, self.t_real):
            writer.writerow([_det_label(det), *(_fmt(x) for x in row)])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _det_label(det) -> str:
    return "-".join(map(str, det))


def real_columns(t_complex: np.ndarray, n: int) -> np.ndarray:
    """Rearrange complex columns into the free-vector convention."""
    cols = []
    for slot in free_layout(n):
        col = t_complex[:, slot.perm_index]
        if slot.part == "real":
            cols.append(col.real)
        elif slot.part == "re":
            cols.append(2.0 * col.real)
        else:
            cols.append(-2.0 * col.imag)
    return np.stack(cols, axis=1)


def build_measurement_matrix(u_r: np.ndarray, n: int, input_ports=()) -> MeasurementMatrix:
    u_r = np.asarray(u_r, dtype=complex)
    if u_r.ndim != 2 or u_r.shape[1] != n:
        raise ValueError(f"u_r must have {n} columns, got shape {u_r.shape}")
    m = u_r.shape[0]
    dets = np.array(combinations_lex(m, n), dtype=np.intp).reshape(-1, n)
    perms = np.array(permutations_lex(n), dtype=np.intp)
    a = u_r[dets]  # (rows, j, k)
    # mats[r, s, j, k] = a[r, j, perms[s, k]] * conj(a[r, j, k])
    mats = a[:, :, perms].transpose(0, 2, 1, 3) * np.conj(a[:, None, :, :])
    t_complex = math.factorial(n) * permanents(mats)
    return MeasurementMatrix(
        t_complex=t_complex,
        t_real=real_columns(t_complex, n),
        m=m,
        n=n,
        input_ports=tuple(int(p) for p in input_ports),
    )


def predict_correlations(t: MeasurementMatrix, v) -> np.ndarray:
    """Coincidence probabilities ``Gamma = T v`` for free vector ``v``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (t.t_real.shape[1],):
        raise ValueError(f"free vector must have length {t.t_real.shape[1]}, got {v.shape}")
    return t.t_real @ v


def singular_values(t: MeasurementMatrix | np.ndarray) -> np.ndarray:
    mat = t.t_real if isinstance(t, MeasurementMatrix) else np.asarray(t)
    return np.linalg.svd(mat, compute_uv=False)


def condition_number(t: MeasurementMatrix | np.ndarray) -> float:
    """``sigma_max / sigma_min``; infinite when the smallest value is numerically zero."""
    s = singular_values(t)
    if s.size == 0 or s[0] == 0 or s[-1] < SINGULAR_RATIO * s[0]:
        return float("inf")
    mat = t.t_real if isinstance(t, MeasurementMatrix) else np.asarray(t)
    if mat.shape[0] < mat.shape[1]:
        return float("inf")
    return float(s[0] / s[-1])


def reconstruct(t: MeasurementMatrix, gamma, normalize: bool = False) -> np.ndarray:
    """Least-squares free vector from measured correlations via the pseudoinverse.

    With ``normalize`` the result is rescaled to unit trace, which makes
    relative coincidence counts usable in place of probabilities.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (t.t_real.shape[0],):
        raise ValueError(f"expected {t.t_real.shape[0]} correlations, got shape {gamma.shape}")
    s = singular_values(t)
    rank = int(np.sum(s > PINV_RCOND * s[0])) if s.size else 0
    if rank < t.t_real.shape[1]:
        warnings.warn(f"measurement matrix has rank {rank} < {t.t_real.shape[1]}", RankWarning, stacklevel=2)
    v = np.linalg.pinv(t.t_real, rcond=PINV_RCOND) @ gamma
    if normalize:
        trace = math.factorial(t.n) * v[0]
        if trace == 0:
            raise PreconditionError("reconstructed trace is zero; cannot normalize")
        v = v / trace
    return v


def project_physical(rho: SplitStateDensity) -> SplitStateDensity:
    """Nearest-in-spectrum physical state: clip negative eigenvalues, renormalize.

    The support block commutes with simultaneous relabeling, so its spectral
    projection keeps the first-row structure and the identity row can be read
    back directly.
    """
    block = support_block(rho)
    block = 0.5 * (block + block.conj().T)
    w, v = np.linalg.eigh(block)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise PreconditionError("state has no positive spectral weight to project onto")
    w = w / w.sum()
    return density_from_block((v * w) @ v.conj().T, rho.n)


def _psd_sqrt(block: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(block)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def matrix_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """``Tr sqrt(sqrt(a) b sqrt(a))`` for Hermitian positive semidefinite matrices."""
    a = 0.5 * (a + np.conj(a).T)
    b = 0.5 * (b + np.conj(b).T)
    for mat in (a, b):
        if np.linalg.eigvalsh(mat)[0] < -PSD_TOL:
            raise PreconditionError("fidelity needs positive semidefinite states; apply project_physical first")
    root = _psd_sqrt(a)
    inner = root @ b @ root
    inner = 0.5 * (inner + inner.conj().T)
    f = float(np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(inner), 0.0, None))))
    return min(max(f, 0.0), 1.0)


def fidelity(a: SplitStateDensity, b: SplitStateDensity) -> float:
    """Fidelity of two physical split states, evaluated on their support blocks.

    Both states live on the same ``n!``-dimensional subspace, so this equals
    the fidelity of the full reduced density matrices.

    Raises:
        PreconditionError: if either state has a negative eigenvalue; run
            :func:`project_physical` first.
    """
    if a.n != b.n:
        raise ValueError(f"photon counts differ: {a.n} vs {b.n}")
    return matrix_fidelity(support_block(a), support_block(b))


def correlations_to_csv(gamma, m: int, n: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["detectors", "probability"])
    for det, g in zip(combinations_lex(m, n), np.asarray(gamma, dtype=float)):
        writer.writerow([_det_label(det), _fmt(g)])
    return buf.getvalue()


def correlations_from_csv(text: str, m: int, n: int) -> np.ndarray:
    """Read a ``detectors,probability`` table back into lex-ordered Gamma."""
    index = {_det_label(d): i for i, d in enumerate(combinations_lex(m, n))}
    gamma = np.full(len(index), np.nan)
    for row in csv.DictReader(io.StringIO(text)):
        gamma[index[row["detectors"]]] = float(row["probability"])
    if np.isnan(gamma).any():
        raise ValueError("correlation table is missing detector sets")
    return gamma
