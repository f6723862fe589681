"""Quantum flow: coupled SES eigenproblems solved to self-consistency.

Each SES sub-problem is diagonalised with the current external amplitudes
frozen; its ground root is mapped back to internal amplitudes by cluster
analysis and written into the shared amplitude set (Gauss-Seidel order).
At the fixed point every sub-problem has the same eigenvalue and the
amplitudes solve the CC equations for the union of internal excitations.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .ccsolver import ExcitationSet
from .downfold import build_heff, eig_general, select_ses_root, sub_system_vector
from .fock import FockBasis, apply_excitation, excitation_between
from .integrals import MOIntegrals
from .opmatrix import AmplitudeSet, OperatorMatrix, build_hamiltonian_matrix
from .ses import SESSpec, internal_excitations, internal_space

logger = logging.getLogger(__name__)


class IntermediateNormalizationError(ArithmeticError):
    pass


class FlowConvergenceError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def cluster_analysis(civec: np.ndarray, space: np.ndarray, basis: FockBasis) -> AmplitudeSet:
    """Amplitudes ``T`` with ``exp(T)|Phi> = civec / civec[0]`` on ``space``.

    ``space[0]`` must be the reference.  Writing the normalised vector as
    ``(1 + X)|Phi>`` with ``X`` a combination of excitations, ``T = log(1 + X)``
    is the terminating series ``X - X^2/2 + X^3/3 - ...`` (``X`` is nilpotent
    and all excitations commute).
    """
    civec = np.asarray(civec)
    if space[0] != 0:
        raise ValueError("the first determinant of the space must be the reference")
    if abs(civec[0]) < 1e-12:
        raise IntermediateNormalizationError("reference coefficient vanishes")
    c = civec / civec[0]
    if np.iscomplexobj(c):
        if np.max(np.abs(c.imag)) > 1e-8:
            raise IntermediateNormalizationError("eigenvector is not real up to a phase")
        c = c.real
    ref = basis.reference
    local = {int(k): n for n, k in enumerate(space)}
    excitations, phases = [None], [1]
    for k in space[1:]:
        ex, phase = excitation_between(ref, basis[int(k)])
        excitations.append(ex)
        phases.append(phase)
    phases = np.array(phases, dtype=float)
    x = phases * c
    x[0] = 0.0

    # X as a matrix on the space
    m = len(space)
    X = np.zeros((m, m))
    for n, det_index in enumerate(space):
        det = basis[int(det_index)]
        for mu in range(1, m):
            if x[mu] == 0.0:
                continue
            image = apply_excitation(det, excitations[mu])
            if image is None:
                continue
            target = local.get(basis.index_of(image[0]))
            if target is not None:
                X[target, n] += x[mu] * image[1]

    w = X[:, 0].copy()
    tvec = np.zeros(m)
    for k in range(1, m + 1):
        if not w.any():
            break
        tvec += w * ((-1) ** (k + 1) / k)
        w = X @ w
    else:
        if w.any():
            raise ArithmeticError("logarithm series did not terminate")
    return AmplitudeSet((excitations[n], phases[n] * tvec[n]) for n in range(1, m) if tvec[n] != 0.0)


@dataclass
class FlowConfig:
    flow_tol: float = 1e-9
    max_sweeps: int = 500
    damping: float = 1.0
    reverse: bool = False


@dataclass
class FlowProblem:
    specs: list[SESSpec]
    mo: MOIntegrals
    cfg: FlowConfig = field(default_factory=FlowConfig)


@dataclass
class FlowSolution:
    amplitudes: AmplitudeSet
    eigenvalues: list[float]
    converged: bool
    sweeps: int
    excitations: ExcitationSet
    trace: list = field(default_factory=list, repr=False)

    @property
    def energy(self) -> float:
        return self.eigenvalues[-1]

    @property
    def spread(self) -> float:
        return max(self.eigenvalues) - min(self.eigenvalues)


def union_excitations(specs) -> ExcitationSet:
    out = []
    for spec in specs:
        out.extend(internal_excitations(spec))
    return ExcitationSet(out, "union(" + " | ".join(map(str, specs)) + ")")


def solve_flow(problem: FlowProblem, H: OperatorMatrix | None = None) -> FlowSolution:
    """Gauss-Seidel sweeps over the SES eigenproblems of ``problem``.

    Converged when, within one sweep, the eigenvalues of all sub-problems
    agree and no amplitude moved by more than ``flow_tol``.  Damping drops to
    0.5 if the amplitude change grows for three sweeps in a row.
    """
    if not problem.specs:
        raise ValueError("a flow needs at least one SES")
    cfg = problem.cfg
    mo = problem.mo
    if H is None:
        H = build_hamiltonian_matrix(mo)
    basis = H.basis
    specs = list(reversed(problem.specs)) if cfg.reverse else list(problem.specs)
    for spec in specs:
        spec.check_range(mo.n_orb, mo.n_alpha, mo.n_beta)
    union = union_excitations(problem.specs)
    internals = [list(internal_excitations(spec)) for spec in specs]
    spaces = [internal_space(spec, basis) for spec in specs]

    t = AmplitudeSet((ex, 0.0) for ex in union)
    damping = cfg.damping
    trace = []
    history = []
    eigenvalues = []
    for sweep in range(1, cfg.max_sweeps + 1):
        eigenvalues = []
        max_change = 0.0
        for spec, exs, space in zip(specs, internals, spaces):
            t_ext = t.restrict(lambda ex: not spec.contains(ex))
            heff = build_heff(H, t_ext, spec)
            w, V = eig_general(heff.matrix)
            target = sub_system_vector(H, t.restrict(spec.contains), space)
            root = select_ses_root(w, V, target)
            if root.ambiguous:
                logger.warning("ambiguous root for %s in sweep %d", spec, sweep)
            new = cluster_analysis(root.vector, space, basis)
            change = 0.0
            for ex in exs:
                old = t[ex]
                t[ex] = old + damping * (new.get(ex, 0.0) - old)
                change = max(change, abs(t[ex] - old))
            energy = float(root.eigenvalue.real)
            eigenvalues.append(energy)
            max_change = max(max_change, change)
            trace.append({"sweep": sweep, "spec": str(spec), "eigenvalue": energy,
                          "amplitude_change": change, "ambiguous": root.ambiguous})
        spread = max(eigenvalues) - min(eigenvalues)
        logger.debug("flow sweep %d  spread=%.2e  change=%.2e", sweep, spread, max_change)
        if spread < cfg.flow_tol and max_change < cfg.flow_tol:
            return FlowSolution(t, eigenvalues, True, sweep, union, trace)
        history.append(max_change)
        if damping == 1.0 and len(history) > 3 and history[-1] > history[-2] > history[-3] > history[-4]:
            logger.info("flow oscillating; damping amplitude updates by 0.5")
            damping = 0.5
    raise FlowConvergenceError(f"flow not converged after {cfg.max_sweeps} sweeps", trace)


def write_trace(trace, path):
    """Flow trace as JSON lines, one record per (sweep, SES)."""
    with open(path, "w") as f:
        for record in trace:
            f.write(json.dumps(record, sort_keys=True) + "\n")
