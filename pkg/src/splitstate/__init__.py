"""Tomography of multi-photon split states with segmented coupled-waveguide circuits."""

from .circuit import CircuitSpec, circuit_unitary, input_submatrix
from .combinatorics import free_parameter_counts, involution_count, min_output_ports
from .states import (
    SplitStateDensity,
    density_from_overlaps,
    from_free_vector,
    overlaps_from_pairs,
    support_block,
    to_free_vector,
)
from .tomography import (
    build_measurement_matrix,
    condition_number,
    fidelity,
    predict_correlations,
    project_physical,
    reconstruct,
)

__all__ = [
    "CircuitSpec",
    "SplitStateDensity",
    "build_measurement_matrix",
    "circuit_unitary",
    "condition_number",
    "density_from_overlaps",
    "fidelity",
    "free_parameter_counts",
    "from_free_vector",
    "input_submatrix",
    "involution_count",
    "min_output_ports",
    "overlaps_from_pairs",
    "predict_correlations",
    "project_physical",
    "reconstruct",
    "support_block",
    "to_free_vector",
]
