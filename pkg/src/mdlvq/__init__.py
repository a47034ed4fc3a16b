"""n-channel entropy-constrained multiple-description lattice vector quantization.

A central lattice quantizer is paired with K coarser side quantizers built on
a geometrically similar, clean sublattice.  An index assignment maps each
central codeword to a K-tuple of sublattice points so that any subset of
received descriptions reconstructs the source with a quality depending only
on the subset size.
"""

from .errors import AdmissibilityError, ConfigError, InfeasibleLabelingError, MdlvqError
from .lattices import (
    LatticeBasis,
    PointSet,
    SublatticeSpec,
    build_sublattice,
    enumerate_admissible_indices,
    make_lattice,
    nearest_point,
    points_in_cell,
    second_moment,
)
from .labeling import (
    KTuple,
    LabelingFunction,
    alpha,
    alpha_component_inverse,
    build_labeling,
    candidate_tuples,
    tuple_cost_decomposition,
)
from .expansion import (
    beta_coefficient,
    psi_closed_form,
    psi_for_design,
    psi_limit,
    psi_numeric,
    simplex_volume,
    sphere_second_moment,
    unit_sphere_volume,
)
from .design import (
    DesignPoint,
    SourceModel,
    expected_distortion,
    k_hat_coefficients,
    optimal_index,
    optimal_nu,
    optimize_design,
    rates,
    theoretical_subset_distortion,
)
from .simulate import (
    DistortionReport,
    EncodedBlock,
    empirical_entropy,
    encode,
    gaussian_source,
    reconstruct,
    simulate,
    sweep_packet_loss,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "ConfigError",
    "DesignPoint",
    "DistortionReport",
    "EncodedBlock",
    "InfeasibleLabelingError",
    "KTuple",
    "LabelingFunction",
    "LatticeBasis",
    "MdlvqError",
    "PointSet",
    "SourceModel",
    "SublatticeSpec",
    "alpha",
    "alpha_component_inverse",
    "beta_coefficient",
    "build_labeling",
    "build_sublattice",
    "candidate_tuples",
    "empirical_entropy",
    "encode",
    "enumerate_admissible_indices",
    "expected_distortion",
    "gaussian_source",
    "k_hat_coefficients",
    "make_lattice",
    "nearest_point",
    "optimal_index",
    "optimal_nu",
    "optimize_design",
    "points_in_cell",
    "psi_closed_form",
    "psi_for_design",
    "psi_limit",
    "psi_numeric",
    "rates",
    "reconstruct",
    "second_moment",
    "simplex_volume",
    "simulate",
    "sphere_second_moment",
    "sweep_packet_loss",
    "theoretical_subset_distortion",
    "tuple_cost_decomposition",
    "unit_sphere_volume",
]
