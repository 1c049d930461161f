"""Monte Carlo robustness studies.

Two questions are asked of a fixed circuit design:

* how faithfully a state is reconstructed when the measured correlations
  carry Gaussian noise (fidelity distribution), and
* how much the condition number degrades when the fabricated phase shifts
  deviate from the designed values (condition-number distribution).

Every trial draws from its own child of the root seed, so results do not
depend on the number of worker threads, and studies at different noise or
perturbation magnitudes reuse the same standardized draws.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .circuit import CircuitSpec, circuit_unitary, input_submatrix
from .exceptions import PreconditionError
from .states import SplitStateDensity, from_free_vector, to_free_vector
from .tomography import (
    PINV_RCOND,
    build_measurement_matrix,
    condition_number,
    fidelity,
    predict_correlations,
    project_physical,
)

HISTOGRAM_BINS = 100


@dataclass
class StudySummary:
    """Distribution of a scored quantity over Monte Carlo trials."""

    values: np.ndarray
    counts: np.ndarray
    bin_edges: np.ndarray
    mean: float
    min: float
    max: float
    std: float

    @classmethod
    def from_values(cls, values, bins: int = HISTOGRAM_BINS) -> "StudySummary":
        values = np.asarray(values, dtype=float)
        lo, hi = float(values.min()), float(values.max())
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
        return cls(
            values=values,
            counts=counts,
            bin_edges=edges,
            mean=float(values.mean()),
            min=float(values.min()),
            max=float(values.max()),
            std=float(values.std()),
        )

    @property
    def trials(self) -> int:
        return int(self.values.size)

    @property
    def density(self) -> np.ndarray:
        """Histogram normalized to unit area."""
        return self.counts / (self.trials * np.diff(self.bin_edges))

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "mean": self.mean,
            "min": self.min,
            "max": self.max,
            "std": self.std,
            "bin_edges": self.bin_edges.tolist(),
            "counts": self.counts.tolist(),
        }


@dataclass(frozen=True)
class NoiseStudyConfig:
    """Reconstruction under noisy correlations.

    ``mode`` is ``"relative"`` (each correlation scaled by ``1 + eps``) or
    ``"absolute"`` (``eps`` added directly), with ``eps ~ N(0, sigma^2)``.
    """

    design: CircuitSpec
    true_state: SplitStateDensity
    relative_sigma: float = 0.05
    trials: int = 5000
    seed: int = 0
    mode: str = "relative"

    def __post_init__(self):
        if self.relative_sigma < 0:
            raise ValueError("noise level must be non-negative")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.mode not in ("relative", "absolute"):
            raise ValueError(f"unknown noise mode {self.mode!r}")


@dataclass(frozen=True)
class ToleranceStudyConfig:
    """Condition number under random phase-shift deviations.

    Each free phase (every phase except the pinned first one of each layer)
    is shifted by an independent draw, uniform on ``[-delta, delta]`` or
    normal with standard deviation ``delta`` when ``distribution`` is
    ``"gaussian"``.
    """

    design: CircuitSpec
    perturbation_magnitudes: tuple[float, ...]
    trials: int = 5000
    seed: int = 0
    distribution: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "perturbation_magnitudes", tuple(float(d) for d in self.perturbation_magnitudes))
        if any(d < 0 for d in self.perturbation_magnitudes):
            raise ValueError("perturbation magnitudes must be non-negative")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.distribution not in ("uniform", "gaussian"):
            raise ValueError(f"unknown distribution {self.distribution!r}")


def _trial_rngs(seed: int, trials: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def measurement_for(design: CircuitSpec, n: int | None = None):
    n = len(design.input_ports) if n is None else n
    u = circuit_unitary(design)
    return build_measurement_matrix(input_submatrix(u, design.input_ports), n, design.input_ports)


def noise_study(cfg: NoiseStudyConfig, workers: int = 1) -> StudySummary:
    """Fidelity of reconstructions from noisy correlations.

    Noisy correlations go to the pseudoinverse unclipped; the reconstruction
    is then projected onto the physical states before scoring.

    Raises:
        PreconditionError: if the design cannot be inverted.
    """
    t = measurement_for(cfg.design, cfg.true_state.n)
    if not np.isfinite(condition_number(t)):
        raise PreconditionError("design has an infinite condition number")
    gamma = predict_correlations(t, to_free_vector(cfg.true_state))
    pinv = np.linalg.pinv(t.t_real, rcond=PINV_RCOND)
    truth = cfg.true_state

    def trial(rng):
        eps = cfg.relative_sigma * rng.standard_normal(gamma.size)
        noisy = gamma * (1.0 + eps) if cfg.mode == "relative" else gamma + eps
        rec = project_physical(from_free_vector(pinv @ noisy, truth.n))
        return fidelity(truth, rec)

    return StudySummary.from_values(_map(trial, _trial_rngs(cfg.seed, cfg.trials), workers))


def free_phase_mask(design: CircuitSpec) -> np.ndarray:
    mask = np.ones((design.sections - 1, design.m), dtype=bool)
    mask[:, 0] = False
    return mask


def tolerance_study(cfg: ToleranceStudyConfig, workers: int = 1) -> dict[float, StudySummary]:
    """Condition-number distribution for each perturbation magnitude."""
    design = cfg.design
    base = np.array(design.phase_layers, dtype=float).reshape(design.sections - 1, design.m)
    mask = free_phase_mask(design)
    n = len(design.input_ports)
    rngs = _trial_rngs(cfg.seed, cfg.trials)
    if cfg.distribution == "uniform":
        draws = [rng.uniform(-1.0, 1.0, mask.sum()) for rng in rngs]
    else:
        draws = [rng.standard_normal(mask.sum()) for rng in rngs]

    out = {}
    for delta in cfg.perturbation_magnitudes:
        def trial(unit):
            phases = base.copy()
            phases[mask] += delta * unit
            spec = CircuitSpec(design.m, design.section_lengths, phases, design.input_ports, design.kappa)
            return condition_number(measurement_for(spec, n))

        out[delta] = StudySummary.from_values(_map(trial, draws, workers))
    return out


def trials_to_csv(summaries: dict[float, StudySummary] | StudySummary, score: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if isinstance(summaries, StudySummary):
        writer.writerow(["trial", score])
        for i, v in enumerate(summaries.values):
            writer.writerow([i, f"{v:.12g}"])
    else:
        writer.writerow(["magnitude", "trial", score])
        for delta, summary in summaries.items():
            for i, v in enumerate(summary.values):
                writer.writerow([f"{delta:.12g}", i, f"{v:.12g}"])
    return buf.getvalue()


def summary_to_csv(summaries: dict[float, StudySummary] | StudySummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    items = {None: summaries} if isinstance(summaries, StudySummary) else summaries
    header = ["trials", "mean", "min", "max", "std"]
    writer.writerow(header if None in items else ["magnitude", *header])
    for key, s in items.items():
        row = [s.trials, *(f"{x:.12g}" for x in (s.mean, s.min, s.max, s.std))]
        writer.writerow(row if key is None else [f"{key:.12g}", *row])
    return buf.getvalue()
