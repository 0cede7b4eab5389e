"""Dynamical r-matrices from loop algebras and their numerical verification."""

__version__ = "0.1.0"

from . import errors
from .errors import DomainViolation, DynRMatError, PoleProximity, StripViolation
from .liealg import (
    Automorphism,
    CartanData,
    GradedDecomposition,
    LieAlgebra,
    coxeter_automorphism,
    decompose,
    identity_automorphism,
    load_algebra,
    make_sl,
    outer_automorphism_sl,
)
from .matfun import LinOp, ScalarFn, matrix_function, matrix_function_frechet
from .elliptic import ModularParam, chi, chi_a, chi_series, theta1
from .loopalg import AffineDynVariable, AffineElement, AffineRMatrix, make_affine, theorem1_residual
from .rmat import (
    DomainQuery,
    Tensor2,
    felder_gauge_compare,
    felder_S,
    in_domain,
    r_tau,
    rho_q,
    rho_q_shifted,
)
from .cdybe import evaluation_check, residual_finite, residual_loop, residual_spectral
from .settings import DEFAULT, Settings

__all__ = [
    "__version__",
    "Automorphism",
    "CartanData",
    "GradedDecomposition",
    "LieAlgebra",
    "coxeter_automorphism",
    "decompose",
    "identity_automorphism",
    "load_algebra",
    "make_sl",
    "outer_automorphism_sl",
    "DomainQuery",
    "Tensor2",
    "felder_gauge_compare",
    "felder_S",
    "in_domain",
    "r_tau",
    "rho_q",
    "rho_q_shifted",
    "errors",
    "DomainViolation",
    "DynRMatError",
    "PoleProximity",
    "StripViolation",
    "LinOp",
    "ScalarFn",
    "matrix_function",
    "matrix_function_frechet",
    "ModularParam",
    "chi",
    "chi_a",
    "chi_series",
    "theta1",
    "AffineDynVariable",
    "AffineElement",
    "AffineRMatrix",
    "make_affine",
    "theorem1_residual",
    "evaluation_check",
    "residual_finite",
    "residual_loop",
    "residual_spectral",
    "DEFAULT",
    "Settings",
]
