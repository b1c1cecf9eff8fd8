"""Simulation toolkit for Gaussian multiplicative chaos on the circle."""
from .chaos import (
    LEBESGUE,
    ChaosMeasure,
    NormalizationKind,
    NormalizationRule,
    build_measure,
    integrate,
    normalization_factor,
    perturb_measure,
    sample_measure,
)
from .decorrelate import (
    PartitionOfUnity,
    build_partition,
    diagonal_strip_mass,
    kahane_gap,
    sample_zeps,
    zeps_cov,
    zeps_matrix,
)
from .kernels import (
    CovarianceSpec,
    DomainKind,
    GridDomain,
    Mollifier,
    Scheme,
    build_cov_matrix,
    covariance,
    covariance_at_distance,
    kernel_matrix,
    matched_spec,
)
from .rng import (
    RngStream,
    replica_streams,
)
from .samplers import (
    FieldSample,
    sample_convolution_field,
    sample_field,
    sample_fourier_field,
)
from .stats import (
    GapCurve,
    MomentReport,
    empirical_moment,
    grid_second_moment,
    kr_distance,
    ks_two_sample,
    mc_covariance_check,
    second_moment_quadrature,
    sup_cov_gap,
)

__version__ = "0.1.0"

__all__ = [
    "ChaosMeasure",
    "CovarianceSpec",
    "DomainKind",
    "FieldSample",
    "GapCurve",
    "GridDomain",
    "LEBESGUE",
    "Mollifier",
    "MomentReport",
    "NormalizationKind",
    "NormalizationRule",
    "PartitionOfUnity",
    "RngStream",
    "Scheme",
    "build_cov_matrix",
    "build_measure",
    "build_partition",
    "covariance",
    "covariance_at_distance",
    "diagonal_strip_mass",
    "empirical_moment",
    "grid_second_moment",
    "integrate",
    "kahane_gap",
    "kernel_matrix",
    "kr_distance",
    "ks_two_sample",
    "matched_spec",
    "mc_covariance_check",
    "normalization_factor",
    "perturb_measure",
    "replica_streams",
    "sample_convolution_field",
    "sample_field",
    "sample_fourier_field",
    "sample_measure",
    "sample_zeps",
    "second_moment_quadrature",
    "sup_cov_gap",
    "zeps_cov",
    "zeps_matrix",
]
