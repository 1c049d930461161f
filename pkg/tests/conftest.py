import numpy as np
import pytest

from splitstate.circuit import CircuitSpec
from splitstate.states import density_from_overlaps, overlaps_from_pairs

ONE_LAYER_PHASES = [[0, 1.083, 1.167, 0.973, 5.509]]
TWO_LAYER_PHASES = [[0, 4.248, 3.808, 1.442, 5.098], [0, 1.844, 1.948, 2.988, 4.155]]
FOUR_PHOTON_PHASES = [
    [0, 1.126, 0.306, 4.331, 4.990, 1.633, 2.419],
    [0, 1.212, 1.998, 2.246, 0.371, 6.002, 0.894],
]

ACCEPTANCE_LINES: list[str] = []


def reference_overlaps():
    return overlaps_from_pairs(3, {(0, 1): 0.7 * np.exp(-1j * np.pi / 3), (1, 2): 0.65, (2, 0): 0.6})


@pytest.fixture
def reference_state():
    return density_from_overlaps(reference_overlaps())


@pytest.fixture
def one_layer_design():
    return CircuitSpec.uniform(5, 2.5, ONE_LAYER_PHASES, (0, 2, 4))


@pytest.fixture
def two_layer_design():
    return CircuitSpec.uniform(5, 3.0, TWO_LAYER_PHASES, (0, 2, 4))


def random_overlaps(rng, n, r=None):
    """Gram matrix of ``n`` random unit vectors in ``r`` complex dimensions."""
    r = n if r is None else r
    vecs = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    gram = vecs.conj() @ vecs.T
    np.fill_diagonal(gram, 1.0)
    return gram


def random_circuit(rng, m, n, sections=None):
    sections = int(rng.integers(1, 4)) if sections is None else sections
    lengths = rng.uniform(0.1, 2.0, sections)
    phases = rng.uniform(0, 2 * np.pi, (sections - 1, m))
    ports = tuple(sorted(rng.choice(m, n, replace=False).tolist()))
    return CircuitSpec(m, tuple(lengths), phases, ports)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
