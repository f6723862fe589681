"""Energy-independent coupled-cluster equations over explicit matrices.

The residual for an excitation ``mu`` is ``<mu| exp(-T) H exp(T) |Phi>``,
evaluated by applying terminating exponential series to vectors, so any
excitation set (uniform rank or hand-picked) is handled the same way.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .fock import Excitation, FockBasis, occupied_virtual, sz_conserving_excitations
from .integrals import MOIntegrals
from .opmatrix import AmplitudeSet, ExcitationMap, OperatorMatrix, build_hamiltonian_matrix, exp_action

logger = logging.getLogger(__name__)

MODEL_RANKS = {"ccsd": 2, "ccsdt": 3, "ccsdtq": 4}


class CCConvergenceError(RuntimeError):
    def __init__(self, message, log):
        super().__init__(message)
        self.log = log


class ExcitationSet(Sequence):
    """Ordered, duplicate-free list of excitations with a provenance label."""

    def __init__(self, excitations: Iterable[Excitation], descriptor: str = "custom"):
        seen = {}
        for ex in excitations:
            seen.setdefault(ex, len(seen))
        self._items = tuple(seen)
        self._index = seen
        self.descriptor = descriptor

    def __getitem__(self, k):
        return self._items[k]

    def __len__(self):
        return len(self._items)

    def __iter__(self) -> Iterator[Excitation]:
        return iter(self._items)

    def __contains__(self, ex) -> bool:
        return ex in self._index

    def index(self, ex, *args) -> int:
        return self._index[ex]

    def union(self, other: Iterable[Excitation], descriptor: str | None = None) -> "ExcitationSet":
        return ExcitationSet(list(self) + list(other), descriptor or "union")

    @property
    def max_rank(self) -> int:
        return max((ex.rank for ex in self), default=0)

    def __repr__(self):
        return f"ExcitationSet({self.descriptor}, {len(self)} excitations)"


def generate_excitation_set(rank: int, n_orb: int, n_alpha: int, n_beta: int | None = None) -> ExcitationSet:
    """All S_z-conserving excitations of rank 1..``rank`` from the aufbau reference.

    ``n_alpha``/``n_beta`` are the numbers of occupied spatial orbitals per
    spin; ``n_beta`` defaults to ``n_alpha`` (closed shell).
    """
    n_beta = n_alpha if n_beta is None else n_beta
    n_elec = n_alpha + n_beta
    if not 1 <= rank <= n_elec:
        raise ValueError(f"excitation rank must be in 1..{n_elec}, got {rank}")
    occ, virt = occupied_virtual(n_orb, n_alpha, n_beta)
    return ExcitationSet(sz_conserving_excitations(occ, virt, rank), f"rank={rank}")


def model_excitation_set(model: str, mo: MOIntegrals) -> ExcitationSet:
    """Excitation set for ``ccsd``, ``ccsdt``, ``ccsdtq``, ``rank=k`` or ``fci``."""
    key = model.lower()
    if key in MODEL_RANKS:
        rank = MODEL_RANKS[key]
    elif key == "fci":
        rank = mo.n_elec
    elif key.startswith("rank="):
        rank = int(key[5:])
    else:
        raise ValueError(f"unknown model {model!r}")
    rank = min(rank, mo.n_elec)
    exset = generate_excitation_set(rank, mo.n_orb, mo.n_alpha, mo.n_beta)
    exset.descriptor = key
    return exset


@dataclass
class CCConfig:
    cc_tol: float = 1e-10
    max_iter: int = 500
    diis_depth: int = 8
    diis_start: int = 2
    level_shift: float = 0.0


@dataclass
class CCSolution:
    amplitudes: AmplitudeSet
    e_total: float
    e_ref: float
    residual_norm: float
    iterations: int
    converged: bool
    excitations: ExcitationSet = None
    log: list = field(default_factory=list, repr=False)

    @property
    def e_corr(self) -> float:
        return self.e_total - self.e_ref


def cc_residual(H, emap: ExcitationMap, values) -> tuple[float, np.ndarray]:
    """Energy and residuals ``<mu|exp(-T) H exp(T)|Phi>`` for amplitudes ``values``."""
    H = H.data if isinstance(H, OperatorMatrix) else H
    T = emap.matrix(values)
    n_terms = emap.basis.n_elec
    phi = np.zeros(T.shape[0])
    phi[0] = 1.0
    psi = exp_action(T, phi, max_terms=n_terms)
    w = exp_action(T, H @ psi, sign=-1.0, max_terms=n_terms)
    return float(w[0]), emap.project(w)


def denominators(excitations: Sequence[Excitation], orbital_energies, shift: float = 0.0) -> np.ndarray:
    """``sum(eps_a) - sum(eps_i) + shift`` for each excitation (positive for aufbau)."""
    eps = np.asarray(orbital_energies)
    return np.array([sum(eps[p >> 1] for p in ex.particles) - sum(eps[h >> 1] for h in ex.holes)
                     for ex in excitations]) + shift


class _DIIS:
    def __init__(self, depth):
        self.depth = depth
        self.vectors, self.errors = [], []

    def push(self, vec, err):
        self.vectors.append(vec.copy())
        self.errors.append(err.copy())
        del self.vectors[:-self.depth], self.errors[:-self.depth]

    def extrapolate(self):
        n = len(self.vectors)
        B = -np.ones((n + 1, n + 1))
        B[n, n] = 0.0
        E = np.array(self.errors)
        B[:n, :n] = E @ E.T
        rhs = np.zeros(n + 1)
        rhs[n] = -1.0
        try:
            c = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError:
            c = np.linalg.lstsq(B, rhs, rcond=None)[0]
        return c[:n] @ np.array(self.vectors)


def solve_cc(mo: MOIntegrals, exset: ExcitationSet, cfg: CCConfig | None = None,
             H: OperatorMatrix | None = None, guess: AmplitudeSet | None = None) -> CCSolution:
    """Solve the CC equations for the amplitudes of ``exset``.

    Quasi-Newton (Jacobi) steps ``t -= r / (eps_a - eps_i + shift)`` starting
    from ``t = 0``, accelerated by DIIS on the amplitude vector.  Converged
    when ``max |r| < cfg.cc_tol``.
    """
    cfg = cfg or CCConfig()
    if H is None:
        H = build_hamiltonian_matrix(mo)
    basis = H.basis
    exset = exset if isinstance(exset, ExcitationSet) else ExcitationSet(exset)
    emap = ExcitationMap(basis, exset)
    if np.any(emap.ref_index < 0):
        bad = [str(exset[k]) for k in np.flatnonzero(emap.ref_index < 0)[:5]]
        raise ValueError(f"excitations invalid for the reference: {bad}")
    D = denominators(exset, mo.orbital_energies, cfg.level_shift)
    if len(D) and np.min(np.abs(D)) < 1e-12:
        raise ZeroDivisionError("vanishing orbital-energy denominator; set a level shift")

    e_ref = float(H.data[0, 0])
    t = guess.vector(exset) if guess else np.zeros(len(exset))
    diis = _DIIS(cfg.diis_depth)
    log = []
    for it in range(1, cfg.max_iter + 1):
        energy, r = cc_residual(H, emap, t)
        rmax = float(np.max(np.abs(r))) if len(r) else 0.0
        log.append((it, energy, rmax))
        logger.debug("cc %3d  E=%.12f  max|r|=%.3e", it, energy, rmax)
        if rmax < cfg.cc_tol:
            return CCSolution(AmplitudeSet.from_vector(exset, t), energy, e_ref, rmax, it,
                              True, exset, log)
        t_new = t - r / D
        diis.push(t_new, t_new - t)
        t = diis.extrapolate() if it >= cfg.diis_start and len(diis.vectors) > 1 else t_new
        if not np.all(np.isfinite(t)) or np.max(np.abs(t), initial=0.0) > 1e3:
            raise CCConvergenceError(f"CC iterations diverged at iteration {it} (max|r|={rmax:.2e})", log)
    raise CCConvergenceError(
        f"CC equations not converged after {cfg.max_iter} iterations (max|r|={rmax:.2e})", log)


def cc_energy(H: OperatorMatrix, t: AmplitudeSet) -> float:
    """``<Phi| exp(-T) H exp(T) |Phi>`` for the amplitudes ``t``."""
    excitations = list(t)
    emap = ExcitationMap(H.basis, excitations)
    T = emap.matrix([t[ex] for ex in excitations])
    phi = np.zeros(len(H.basis))
    phi[0] = 1.0
    w = exp_action(T, H @ exp_action(T, phi), sign=-1.0)
    return float(w[0])


def residual_vector(H: OperatorMatrix, t: AmplitudeSet, excitations: Sequence[Excitation]) -> np.ndarray:
    """Residuals over ``excitations`` for amplitudes ``t`` (absent = 0)."""
    excitations = list(excitations)
    allex = list(dict.fromkeys(excitations + list(t)))
    emap = ExcitationMap(H.basis, allex)
    _, r = cc_residual(H, emap, AmplitudeSet(t).vector(allex))
    return r[:len(excitations)]


# --- persistence -------------------------------------------------------------

def write_amplitudes(path, t: AmplitudeSet, fingerprint: str = "", basis: FockBasis | None = None):
    """One record per excitation: ``holes particles value`` (0-based spin orbitals)."""
    with open(path, "w") as f:
        f.write("# sescc amplitudes v1\n")
        f.write(f"# fingerprint {fingerprint or '-'}\n")
        if basis is not None:
            f.write(f"# sector {basis.n_orb} {basis.n_alpha} {basis.n_beta}\n")
        for ex, v in t.items():
            f.write(f"{','.join(map(str, ex.holes))} {','.join(map(str, ex.particles))} {float(v)!r}\n")


def read_amplitudes(path) -> tuple[AmplitudeSet, dict]:
    t = AmplitudeSet()
    header = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if line.startswith("#"):
                fields = line[1:].split()
                if len(fields) >= 2 and fields[0] in ("fingerprint", "sector"):
                    header[fields[0]] = fields[1] if fields[0] == "fingerprint" else tuple(map(int, fields[1:]))
                continue
            if not line.strip():
                continue
            try:
                h, p, v = line.split()
                ex = Excitation(tuple(map(int, h.split(","))), tuple(map(int, p.split(","))))
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: bad amplitude record ({err})") from None
            t[ex] = float(v)
    return t, header


def read_excitation_list(path) -> ExcitationSet:
    """Custom excitation set: lines ``holes particles [value]``; values are ignored."""
    out = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split("#", 1)[0].split()
            if not fields:
                continue
            try:
                out.append(Excitation(tuple(map(int, fields[0].split(","))),
                                      tuple(map(int, fields[1].split(",")))))
            except (ValueError, IndexError) as err:
                raise ValueError(f"{path}:{lineno}: bad excitation ({err})") from None
    return ExcitationSet(out, f"custom:{path}")
