"""Hellinger-Kantorovich barycenters of Dirac collections with certified duality gaps.

The barycenter is represented by free particles (positions and masses) that
are optimised with a preconditioned L-BFGS method, pruned, merged and
inserted where the dual constraint is violated. Every result carries a
certificate: a feasible dual potential whose value bounds the gap to the
optimum.
"""
from .certificate import (
    CertificateReport,
    DualPotential,
    UncoveredInputError,
    certify,
    constraint_F,
    lipschitz_bound,
    psi_eval,
    scan_max_F,
)
from .closed_forms import (
    cd_constant,
    concentration_bound,
    hellinger2_atomic,
    hellinger_barycenter,
    hk2_dirac,
    semicoupling_sigma,
    wasserstein_limit_barycenter,
)
from .kernels import BACKEND
from .linkage import Dendrogram, single_linkage
from .measures import Density1D, DiscreteInput, Domain, ParticleMeasure
from .objective import convexity_probe, evaluate, gradient, objective
from .oracle import GridSolution, solve_on_grid
from .sampling import sample_density
from .solver import SolveReport, SolverConfig, SweepResult, kappa_sweep, solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CertificateReport",
    "Dendrogram",
    "Density1D",
    "DiscreteInput",
    "Domain",
    "DualPotential",
    "GridSolution",
    "ParticleMeasure",
    "SolveReport",
    "SolverConfig",
    "SweepResult",
    "UncoveredInputError",
    "cd_constant",
    "certify",
    "concentration_bound",
    "constraint_F",
    "convexity_probe",
    "evaluate",
    "gradient",
    "hellinger2_atomic",
    "hellinger_barycenter",
    "hk2_dirac",
    "kappa_sweep",
    "lipschitz_bound",
    "objective",
    "psi_eval",
    "sample_density",
    "scan_max_F",
    "semicoupling_sigma",
    "single_linkage",
    "solve",
    "solve_on_grid",
    "wasserstein_limit_barycenter",
]
