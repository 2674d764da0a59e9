"""Spectral toolkit for Baouendi-Grushin operators on the infinite cylinder
and the flat torus, built on separation of variables into the fibered 1D
operators -u'' + k^2 V(x) u."""

__version__ = "0.1.0"

from .core import (
    ExactScalar,
    Perturbation,
    Potential,
    Tolerances,
    eval_potential,
    mollified_indicator,
    parse_potential,
    render_potential,
)
from .schrod1d import EigenPair, Grid, hermite_eigenfunction, solve_eigen
from .exact_family import (
    ExactEigenvalue,
    SpectrumLine,
    counting_function,
    exact_eigenvalue,
    multiplicity_enumeration,
    multiplicity_factorization,
    weyl_residual,
)
from .assembler import AssembledSpectrum, assemble, check_property_p, k_cutoff
from .concentration import (
    ModeCoefficients,
    Strip,
    concentration_certificate,
    kappa_coefficients,
    min_ratio,
    ratio_closed_form,
    ratio_quadrature,
)
from .perturb import (
    Branch,
    check_continuity_bound,
    check_gap_avoidance,
    hellmann_feynman,
    splitting_experiment,
    track_branches,
)

__all__ = [
    "__version__",
    "ExactScalar",
    "Perturbation",
    "Potential",
    "Tolerances",
    "eval_potential",
    "mollified_indicator",
    "parse_potential",
    "render_potential",
    "EigenPair",
    "Grid",
    "hermite_eigenfunction",
    "solve_eigen",
    "ExactEigenvalue",
    "SpectrumLine",
    "counting_function",
    "exact_eigenvalue",
    "multiplicity_enumeration",
    "multiplicity_factorization",
    "weyl_residual",
    "AssembledSpectrum",
    "assemble",
    "check_property_p",
    "k_cutoff",
    "ModeCoefficients",
    "Strip",
    "concentration_certificate",
    "kappa_coefficients",
    "min_ratio",
    "ratio_closed_form",
    "ratio_quadrature",
    "Branch",
    "check_continuity_bound",
    "check_gap_avoidance",
    "hellmann_feynman",
    "splitting_experiment",
    "track_branches",
]
