"""Coupled-cluster workbench with sub-system embedding sub-algebra (SES) downfolding."""
__version__ = "0.1.0"

from .ccsolver import CCConfig, CCSolution, ExcitationSet, generate_excitation_set, model_excitation_set, solve_cc
from .downfold import DownfoldReport, build_heff, downfold, verify_theorem
from .fcidump import read_fcidump, write_fcidump
from .flow import FlowConfig, FlowProblem, FlowSolution, cluster_analysis, solve_flow
from .fock import Determinant, Excitation, FockBasis, enumerate_basis
from .geometry import Geometry, load_geometry
from .integrals import MOIntegrals, rhf_mo_integrals
from .opmatrix import AmplitudeSet, build_hamiltonian_matrix
from .ses import SESSpec, internal_excitations, internal_space, ses_census_ccsd, validate_ses

__all__ = [
    "AmplitudeSet", "CCConfig", "CCSolution", "Determinant", "DownfoldReport", "Excitation",
    "ExcitationSet", "FlowConfig", "FlowProblem", "FlowSolution", "FockBasis", "Geometry",
    "MOIntegrals", "SESSpec", "build_hamiltonian_matrix", "build_heff", "cluster_analysis",
    "downfold", "enumerate_basis", "generate_excitation_set", "internal_excitations",
    "internal_space", "load_geometry", "model_excitation_set", "read_fcidump", "rhf_mo_integrals",
    "ses_census_ccsd", "solve_cc", "solve_flow", "validate_ses", "verify_theorem", "write_fcidump",
]
