"""Numerical toolkit for complete conformal metrics whose Einstein or
modified Schouten curvature eigenvalues satisfy a prescribed
symmetric-function equation on a compact manifold with boundary."""

from .errors import AdmissibilityError, ConeError, DomainError, NonConvergenceError
from .symfun import (
    ConeSpec,
    EllipticityReport,
    OperatorFamily,
    f_gradient,
    f_value,
    kappa_of_cone,
    vartheta_analytic,
    vartheta_best,
    vartheta_empirical,
)
from .geom import Background, Mode, radial_reduction
from .barriers import BarrierProfile, CollarGeometry, verify_lower_barrier, verify_subsolution
from .solver import (
    Grid1D,
    ProblemSpec,
    SolveRecord,
    asymptotic_extract,
    continuation,
    newton_solve,
    uniqueness_band,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "ConeError",
    "DomainError",
    "NonConvergenceError",
    "ConeSpec",
    "EllipticityReport",
    "OperatorFamily",
    "f_gradient",
    "f_value",
    "kappa_of_cone",
    "vartheta_analytic",
    "vartheta_best",
    "vartheta_empirical",
    "Background",
    "Mode",
    "radial_reduction",
    "BarrierProfile",
    "CollarGeometry",
    "verify_lower_barrier",
    "verify_subsolution",
    "Grid1D",
    "ProblemSpec",
    "SolveRecord",
    "asymptotic_extract",
    "continuation",
    "newton_solve",
    "uniqueness_band",
]
