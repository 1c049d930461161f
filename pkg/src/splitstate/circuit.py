"""Segmented coupled-waveguide arrays with phase-shift layers between sections.

Lengths are in units of the inverse coupling coefficient. The transfer
matrix of a circuit with ``S`` sections is

    U = W_S B_{S-1} W_{S-1} ... B_1 W_1,   W_j = exp(i C L_j),  B_j = diag(exp(i phi_j))

so section 1 acts first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def coupling_matrix(m: int, kappa: float = 1.0) -> np.ndarray:
    """Nearest-neighbour coupling matrix of a uniform ``m``-waveguide array."""
    if m < 1:
        raise ValueError(f"need at least one waveguide, got m={m}")
    if kappa <= 0:
        raise ValueError(f"coupling must be positive, got {kappa}")
    off = np.full(m - 1, float(kappa))
    return np.diag(off, 1) + np.diag(off, -1)


def section_propagator(c: np.ndarray, length: float) -> np.ndarray:
    """``exp(i c length)`` for a real symmetric coupling matrix ``c``."""
    if length < 0:
        raise ValueError(f"section length must be non-negative, got {length}")
    w, v = np.linalg.eigh(c)
    return (v * np.exp(1j * w * length)) @ v.T


def phase_layer(phases) -> np.ndarray:
    return np.diag(np.exp(1j * np.asarray(phases, dtype=float)))


def fold_phases(phases) -> np.ndarray:
    """Map phases into ``[0, 2 pi)``."""
    return np.mod(np.asarray(phases, dtype=float), TWO_PI)


@dataclass(frozen=True)
class CircuitSpec:
    """Geometry and phase program of a segmented waveguide circuit.

    Attributes:
        m: number of waveguides.
        section_lengths: length of each of the ``S`` sections.
        phase_layers: ``S - 1`` rows of ``m`` phase shifts, one row per
            interface between sections. Stored folded into ``[0, 2 pi)``.
        input_ports: strictly increasing indices of the occupied inputs.
        kappa: nearest-neighbour coupling.
    """

    m: int
    section_lengths: tuple[float, ...]
    phase_layers: tuple[tuple[float, ...], ...] = ()
    input_ports: tuple[int, ...] = ()
    kappa: float = 1.0

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.section_lengths)
        layers = tuple(tuple(float(p) for p in fold_phases(row)) for row in self.phase_layers)
        ports = tuple(int(p) for p in self.input_ports)
        if self.m < 1:
            raise ValueError(f"need at least one waveguide, got m={self.m}")
        if not lengths:
            raise ValueError("circuit needs at least one section")
        if any(x < 0 for x in lengths):
            raise ValueError("section lengths must be non-negative")
        if len(layers) != len(lengths) - 1:
            raise ValueError(f"{len(lengths)} sections need {len(lengths) - 1} phase layers, got {len(layers)}")
        if any(len(row) != self.m for row in layers):
            raise ValueError(f"each phase layer needs {self.m} entries")
        if any(b <= a for a, b in zip(ports, ports[1:])):
            raise ValueError(f"input ports must be strictly increasing, got {ports}")
        if ports and (ports[0] < 0 or ports[-1] >= self.m):
            raise ValueError(f"input ports {ports} out of range for m={self.m}")
        object.__setattr__(self, "section_lengths", lengths)
        object.__setattr__(self, "phase_layers", layers)
        object.__setattr__(self, "input_ports", ports)

    @classmethod
    def uniform(cls, m: int, total_length: float, phase_layers=(), input_ports=(), kappa: float = 1.0):
        """Circuit whose ``len(phase_layers) + 1`` sections share ``total_length`` equally."""
        s = len(phase_layers) + 1
        return cls(m, (total_length / s,) * s, tuple(phase_layers), tuple(input_ports), kappa)

    @property
    def sections(self) -> int:
        return len(self.section_lengths)

    @property
    def total_length(self) -> float:
        return float(sum(self.section_lengths))

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "kappa": self.kappa,
            "section_lengths": list(self.section_lengths),
            "phase_layers": [list(row) for row in self.phase_layers],
            "input_ports": list(self.input_ports),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CircuitSpec":
        return cls(
            m=int(doc["m"]),
            section_lengths=tuple(doc["section_lengths"]),
            phase_layers=tuple(tuple(row) for row in doc.get("phase_layers", ())),
            input_ports=tuple(doc.get("input_ports", ())),
            kappa=float(doc.get("kappa", 1.0)),
        )


def circuit_unitary(spec: CircuitSpec) -> np.ndarray:
    c = coupling_matrix(spec.m, spec.kappa)
    w, v = np.linalg.eigh(c)
    u = (v * np.exp(1j * w * spec.section_lengths[0])) @ v.T
    for length, phases in zip(spec.section_lengths[1:], spec.phase_layers):
        u = np.exp(1j * np.asarray(phases))[:, None] * u
        u = ((v * np.exp(1j * w * length)) @ v.T) @ u
    return u


def input_submatrix(u: np.ndarray, input_ports) -> np.ndarray:
    """Columns of ``u`` for the occupied input ports (the N-in-M-out matrix)."""
    ports = [int(p) for p in input_ports]
    m = u.shape[1]
    if len(set(ports)) != len(ports):
        raise ValueError(f"duplicate input port in {ports}")
    if any(p < 0 or p >= m for p in ports):
        raise ValueError(f"input ports {ports} out of range for m={m}")
    return u[:, ports]


def unitarity_error(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))
