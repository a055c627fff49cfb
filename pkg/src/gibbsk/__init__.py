"""Numerical laboratory for Gibbs stability, quantized Ding functionals and
cscK criteria on (P^1, O(m)) and smooth toric surfaces."""

from .errors import DomainError, GibbskError, InputError, NumericError
from .geometry import (
    Density,
    OneOneForm,
    PolarizedModel,
    Potential,
    SphereQuadrature,
    build_quadrature,
    conic_density,
    eta_form,
    omega_form,
    random_family,
    random_potential,
    ricci_density,
    smooth_density,
    uniform_density,
)
from .gibbs import (
    GammaEstimate,
    MCEstimate,
    gamma_k_exact_p1,
    gamma_k_tail_estimate,
    partition_mc,
    sample_configurations,
)
from .quantization import (
    SectionBasis,
    approx_ding,
    gram_identity_check,
    energy_Ek,
    gram_matrix,
    section_basis,
    slater_det,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "GibbskError",
    "InputError",
    "NumericError",
    "Density",
    "OneOneForm",
    "PolarizedModel",
    "Potential",
    "SphereQuadrature",
    "build_quadrature",
    "conic_density",
    "eta_form",
    "omega_form",
    "random_family",
    "random_potential",
    "ricci_density",
    "smooth_density",
    "uniform_density",
    "GammaEstimate",
    "MCEstimate",
    "gamma_k_exact_p1",
    "gamma_k_tail_estimate",
    "partition_mc",
    "sample_configurations",
    "SectionBasis",
    "approx_ding",
    "gram_identity_check",
    "energy_Ek",
    "gram_matrix",
    "section_basis",
    "slater_det",
]
