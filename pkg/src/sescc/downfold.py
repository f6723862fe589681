"""SES effective Hamiltonians and the CC-energy-as-eigenvalue check.

For an SES ``h`` the effective Hamiltonian is the block of
``exp(-T_ext) H exp(T_ext)`` over the internal determinants (reference
plus the images of internal excitations).  At a converged CC solution
``exp(T_int)|Phi>`` restricted to that block is a right eigenvector with the
CC energy as eigenvalue.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .ccsolver import CCConfig, CCSolution, ExcitationSet, solve_cc
from .integrals import MOIntegrals
from .opmatrix import AmplitudeSet, ExcitationMap, OperatorMatrix, build_hamiltonian_matrix, exp_action
from .ses import SESSpec, internal_space, partition_amplitudes, validate_ses

AMBIGUITY_TOL = 1e-6


class InvalidSESError(ValueError):
    pass


class EigenSolverError(ArithmeticError):
    pass


@dataclass
class EffectiveHamiltonian:
    matrix: np.ndarray
    space: np.ndarray
    spec: SESSpec

    @property
    def dim(self) -> int:
        return len(self.space)

    @property
    def asymmetry(self) -> float:
        """max |H_eff - H_eff^T|; nonzero values are expected."""
        return float(np.max(np.abs(self.matrix - self.matrix.T))) if self.dim else 0.0


def _cluster_matrix(basis, t: AmplitudeSet):
    excitations = list(t)
    return ExcitationMap(basis, excitations).matrix([t[ex] for ex in excitations])


def build_heff(H: OperatorMatrix, t_ext: AmplitudeSet, spec: SESSpec) -> EffectiveHamiltonian:
    """Effective Hamiltonian of ``spec`` dressed by the external amplitudes.

    Only the columns of ``exp(T_ext)`` and rows of ``exp(-T_ext)`` that touch
    the internal space are formed, each by an exact terminating series.
    """
    inside = [ex for ex in t_ext if spec.contains(ex)]
    if inside:
        raise ValueError(f"t_ext carries internal excitations of {spec}: {inside[0]}")
    basis = H.basis
    space = internal_space(spec, basis)
    unit = np.zeros((len(basis), len(space)))
    unit[space, np.arange(len(space))] = 1.0
    T = _cluster_matrix(basis, t_ext)
    n = basis.n_elec
    right = exp_action(T, unit, max_terms=n)                     # exp(T)[:, space]
    left = exp_action(T.T.tocsr(), unit, sign=-1.0, max_terms=n)  # exp(-T)[space, :]^T
    return EffectiveHamiltonian(left.T @ (H.data @ right), space, spec)


def eig_general(M: np.ndarray, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and right eigenvectors of a real non-symmetric matrix.

    LAPACK ``geev`` (Hessenberg reduction + shifted QR).  Every pair is checked
    against ``|Mv - wv| <= 1e-9 |M|``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("eig_general needs a square matrix")
    try:
        w, V = scipy.linalg.eig(M)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise EigenSolverError(str(err)) from err
    if check and len(w):
        scale = max(np.linalg.norm(M, 2), 1.0)
        res = np.linalg.norm(M @ V - V * w, axis=0)
        if np.max(res) > 1e-9 * scale:
            raise EigenSolverError(f"eigenpair residual {np.max(res):.2e} too large")
    return w, V


def sub_system_vector(H: OperatorMatrix, t_int: AmplitudeSet, space: np.ndarray) -> np.ndarray:
    """``exp(T_int)|Phi>`` restricted to ``space``."""
    phi = np.zeros(len(H.basis))
    phi[0] = 1.0
    return exp_action(_cluster_matrix(H.basis, t_int), phi, max_terms=H.basis.n_elec)[space]


@dataclass
class RootSelection:
    eigenvalue: complex
    vector: np.ndarray
    overlap: float
    ambiguous: bool = False
    candidates: list = field(default_factory=list)


def select_ses_root(w: np.ndarray, V: np.ndarray, target: np.ndarray) -> RootSelection:
    """Pick the eigenpair whose eigenvector best overlaps ``target``.

    ``target`` is the sub-system vector ``exp(T_int)|Phi>`` on the internal
    space.  If the two best normalised overlaps are within 1e-6 of each other
    the selection is flagged ambiguous and both candidates are returned.
    """
    target = np.asarray(target, dtype=complex)
    norms = np.linalg.norm(V, axis=0) * np.linalg.norm(target)
    overlaps = np.abs(target.conj() @ V) / norms
    order = np.argsort(-overlaps, kind="stable")
    best = order[0]
    ambiguous = bool(len(order) > 1 and overlaps[best] - overlaps[order[1]] < AMBIGUITY_TOL)
    candidates = [(w[k], float(overlaps[k])) for k in order[:2]] if ambiguous else []
    return RootSelection(w[best], V[:, best], float(overlaps[best]), ambiguous, candidates)


@dataclass
class DownfoldReport:
    spec: str
    e_cc: float
    e_h: float
    eigvec_residual: float
    overlap: float
    dim: int
    asymmetry: float
    e_h_imag: float = 0.0
    ambiguous: bool = False
    wall_time: float = 0.0

    @property
    def energy_error(self) -> float:
        return abs(self.e_h - self.e_cc)

    def to_dict(self) -> dict:
        return dict(asdict(self), energy_error=self.energy_error)


def downfold(H: OperatorMatrix, solution: CCSolution, spec: SESSpec) -> DownfoldReport:
    """Build, diagonalise and check the SES effective Hamiltonian for a solved CC model."""
    start = time.perf_counter()
    part = partition_amplitudes(solution.amplitudes, spec)
    heff = build_heff(H, part.t_ext, spec)
    w, V = eig_general(heff.matrix)
    vstar = sub_system_vector(H, part.t_int, heff.space)
    root = select_ses_root(w, V, vstar)
    resid = np.linalg.norm(heff.matrix @ vstar - solution.e_total * vstar) / np.linalg.norm(vstar)
    return DownfoldReport(
        spec=str(spec), e_cc=solution.e_total, e_h=float(root.eigenvalue.real),
        eigvec_residual=float(resid), overlap=root.overlap, dim=heff.dim,
        asymmetry=heff.asymmetry, e_h_imag=float(root.eigenvalue.imag),
        ambiguous=root.ambiguous, wall_time=time.perf_counter() - start)


def verify_theorem(mo: MOIntegrals, exset: ExcitationSet, spec: SESSpec, cfg: CCConfig | None = None,
                   H: OperatorMatrix | None = None, solution: CCSolution | None = None) -> DownfoldReport:
    """Solve CC for ``exset`` (unless a solution is given) and downfold onto ``spec``."""
    if not validate_ses(spec, exset):
        raise InvalidSESError(f"{spec} is not a sub-system embedding sub-algebra of {exset!r}")
    spec.check_range(mo.n_orb, mo.n_alpha, mo.n_beta)
    if H is None:
        H = build_hamiltonian_matrix(mo)
    if solution is None:
        solution = solve_cc(mo, exset, cfg, H=H)
    return downfold(H, solution, spec)
