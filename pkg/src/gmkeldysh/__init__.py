"""Least-squares analysis and solution of a first-order mixed elliptic-hyperbolic system.

The system is the symmetric form of the Gellerstedt-Moiseev-Keldysh type
operator on a cap-and-lines domain, with the sign-split boundary conditions
whose admissibility gives an energy estimate.
"""

from .boundary import admissibility_sweep, beta, boundary_condition_rows, check_admissibility, decompose
from .coefficients import CoefficientSet, Polynomial, SmoothField, manufactured_default, preset
from .config import load_config, parse_config
from .errors import GMKError
from .geometry import ArcClass, DomainSpec, boundary_samples, generate_mesh, sample_boundary
from .operator import apply_operator, char_form, check_gbound, classify_type, q_matrix
from .solver import (
    BoundaryData,
    assemble,
    convergence_study,
    energy_identity,
    l2_norm,
    solve,
)
from .verify import VerificationReport, verify

__version__ = "0.1.0"

__all__ = [
    "ArcClass",
    "BoundaryData",
    "CoefficientSet",
    "DomainSpec",
    "GMKError",
    "Polynomial",
    "SmoothField",
    "VerificationReport",
    "admissibility_sweep",
    "apply_operator",
    "assemble",
    "beta",
    "boundary_condition_rows",
    "boundary_samples",
    "char_form",
    "check_admissibility",
    "check_gbound",
    "classify_type",
    "convergence_study",
    "decompose",
    "energy_identity",
    "generate_mesh",
    "l2_norm",
    "load_config",
    "manufactured_default",
    "parse_config",
    "preset",
    "q_matrix",
    "sample_boundary",
    "solve",
    "verify",
]
