"""etabs: pseudo-Hermitian lattice machinery for Black-Scholes pricing.

The package discretizes the Black-Scholes generator as a non-Hermitian
tridiagonal Hamiltonian, recovers the metric operator that restores symmetry
(in closed form and by an exact detailed-balance recurrence), and builds
eta-orthonormal spectral decompositions, pricing kernels, barrier prices and
a pseudo-supersymmetric factorization on top of it.
"""

from __future__ import annotations

from .hamiltonian import (
    MarketParams,
    PotentialSpec,
    SimilarityMap,
    TridiagonalOperator,
    build_H_BS,
    build_H_eff,
    build_H_generalized,
    build_h_BS,
    build_rho,
    build_rho_generalized,
    conjugate,
    operator_from_dict,
    operator_to_dict,
)
from .lattice import (
    Lattice,
    centered_window,
    cumulative_trapezoid,
    make_lattice,
    trapezoid_weights,
)
from .metric import (
    MetricOperator,
    continuum_metric_BS,
    continuum_metric_generalized,
    detailed_balance_metric,
    eta_exponent,
    pseudo_hermiticity_residual,
)
from .pricing import (
    PayoffSpec,
    PriceSurface,
    closed_form_call,
    closed_form_kernel,
    closed_form_put,
    price,
    price_barrier_down_and_out,
    price_double_knock_out,
)
from .spectral import (
    KernelMatrix,
    SpectralDecomposition,
    decompose,
    eigendecompose,
    eigenvalues_only,
    eta_normalize,
    pricing_kernel,
    pseudo_inner_product,
    symmetrize,
)
from .susy import (
    Superpotential,
    SusyReport,
    SusySystem,
    build_A,
    delta,
    factorized_system,
    potentials_from_W,
    pseudo_adjoint,
    verify_susy,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Lattice",
    "make_lattice",
    "centered_window",
    "trapezoid_weights",
    "cumulative_trapezoid",
    "MarketParams",
    "PotentialSpec",
    "TridiagonalOperator",
    "SimilarityMap",
    "build_H_BS",
    "build_h_BS",
    "build_H_generalized",
    "build_H_eff",
    "build_rho",
    "build_rho_generalized",
    "conjugate",
    "operator_to_dict",
    "operator_from_dict",
    "MetricOperator",
    "eta_exponent",
    "continuum_metric_BS",
    "continuum_metric_generalized",
    "detailed_balance_metric",
    "pseudo_hermiticity_residual",
    "SpectralDecomposition",
    "KernelMatrix",
    "symmetrize",
    "eigendecompose",
    "eigenvalues_only",
    "eta_normalize",
    "decompose",
    "pricing_kernel",
    "pseudo_inner_product",
    "PayoffSpec",
    "PriceSurface",
    "price",
    "closed_form_call",
    "closed_form_put",
    "closed_form_kernel",
    "price_barrier_down_and_out",
    "price_double_knock_out",
    "Superpotential",
    "SusySystem",
    "SusyReport",
    "delta",
    "potentials_from_W",
    "build_A",
    "pseudo_adjoint",
    "factorized_system",
    "verify_susy",
]
