"""Integrals over contracted s-type Gaussians and closed-shell RHF.

Only s shells are supported; anything with higher angular momentum has to
come in through an FCIDUMP file (see :mod:`sescc.fcidump`).
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .geometry import Geometry

logger = logging.getLogger(__name__)

# Standard STO-3G s shells (exponents, contraction coefficients).
STO3G = {
    1: [([3.42525091, 0.62391373, 0.16885540], [0.15432897, 0.53532814, 0.44463454])],
    2: [([6.36242139, 1.15892300, 0.31364979], [0.15432897, 0.53532814, 0.44463454])],
}

BASIS_SETS = {"sto-3g": STO3G}


class UnsupportedBasisError(ValueError):
    """Raised for shells the s-only integral engine cannot handle."""


class SCFConvergenceError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class Shell:
    center: np.ndarray
    exponents: np.ndarray
    coefficients: np.ndarray
    l: int = 0


@dataclass
class GaussianBasis:
    """Contracted shells, one list per atom, with normalised primitives."""

    shells: list[Shell]

    @classmethod
    def build(cls, geometry: Geometry, name: str = "sto-3g") -> "GaussianBasis":
        try:
            table = BASIS_SETS[name.lower()]
        except KeyError:
            raise UnsupportedBasisError(
                f"basis {name!r} is not built in; supply an FCIDUMP instead") from None
        shells = []
        for z, pos in geometry.atoms:
            zi = int(round(z))
            if zi not in table:
                raise UnsupportedBasisError(
                    f"no s-only {name} shells for Z={zi}; supply an FCIDUMP instead")
            for exps, coefs in table[zi]:
                shells.append(Shell(np.array(pos, float), np.array(exps, float),
                                    np.array(coefs, float)))
        return cls(shells)

    def __len__(self):
        return len(self.shells)


@dataclass
class AOIntegrals:
    S: np.ndarray
    T: np.ndarray
    V: np.ndarray
    eri: np.ndarray
    e_nuc: float

    @property
    def hcore(self) -> np.ndarray:
        return self.T + self.V


@dataclass
class MOIntegrals:
    """Molecular-orbital integrals; ``g`` is (pq|rs) in chemist notation."""

    h: np.ndarray
    g: np.ndarray
    e_nuc: float
    n_elec: int
    orbital_energies: np.ndarray = None
    ms2: int = 0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        n = self.h.shape[0]
        if self.h.shape != (n, n) or self.g.shape != (n, n, n, n):
            raise ValueError(f"inconsistent integral shapes {self.h.shape}, {self.g.shape}")
        if (self.n_elec + self.ms2) % 2:
            raise ValueError("n_elec and ms2 must have equal parity")
        if self.orbital_energies is None:
            self.orbital_energies = fock_diagonal(self.h, self.g, self.n_alpha, self.n_beta)
        self.orbital_energies = np.asarray(self.orbital_energies, dtype=float)

    @property
    def n_orb(self) -> int:
        return self.h.shape[0]

    @property
    def n_alpha(self) -> int:
        return (self.n_elec + self.ms2) // 2

    @property
    def n_beta(self) -> int:
        return (self.n_elec - self.ms2) // 2

    def fingerprint(self) -> str:
        """Short hash of the integrals, stable across runs and platforms."""
        sha = hashlib.sha256()
        sha.update(f"{self.n_orb}:{self.n_elec}:{self.ms2}:{self.e_nuc:.12e}".encode())
        for arr in (self.h, self.g):
            sha.update(np.round(arr, 10).astype("<f8").tobytes())
        return sha.hexdigest()[:16]


def fock_diagonal(h, g, n_alpha, n_beta):
    """Diagonal of the alpha Fock matrix for the aufbau determinant."""
    ja = np.einsum("ppii->p", g[:, :, :n_alpha, :n_alpha])
    jb = np.einsum("ppii->p", g[:, :, :n_beta, :n_beta])
    ka = np.einsum("piip->p", g[:, :n_alpha, :n_alpha, :])
    return np.diag(h) + ja + jb - ka


def nuclear_repulsion(geometry: Geometry) -> float:
    e = 0.0
    atoms = geometry.atoms
    for a in range(len(atoms)):
        for b in range(a):
            za, ra = atoms[a]
            zb, rb = atoms[b]
            e += za * zb / np.linalg.norm(np.subtract(ra, rb))
    return e


def boys0(t):
    """Boys function F_0(t) = int_0^1 exp(-t u^2) du."""
    t = np.asarray(t, dtype=float)
    small = t < 1e-8
    ts = np.where(small, 1.0, t)
    big = 0.5 * np.sqrt(np.pi / ts) * erf(np.sqrt(ts))
    return np.where(small, 1.0 - t / 3.0 + t * t / 10.0, big)


def _primitives(basis: GaussianBasis):
    """Flatten contracted shells into primitive arrays plus a contraction map."""
    alphas, centers, coefs, owner = [], [], [], []
    for mu, shell in enumerate(basis.shells):
        if shell.l != 0:
            raise UnsupportedBasisError("only s-type shells are supported; use FCIDUMP input")
        if len(shell.exponents) != len(shell.coefficients) or np.any(shell.exponents <= 0):
            raise UnsupportedBasisError("malformed contraction")
        norm = (2.0 * shell.exponents / np.pi) ** 0.75
        # renormalise the contraction as a whole
        a = shell.exponents
        c = shell.coefficients * norm
        s = np.sum(c[:, None] * c[None, :] * (np.pi / (a[:, None] + a[None, :])) ** 1.5)
        c = c / np.sqrt(s)
        for ai, ci in zip(a, c):
            alphas.append(ai)
            centers.append(shell.center)
            coefs.append(ci)
            owner.append(mu)
    contraction = np.zeros((len(alphas), len(basis.shells)))
    contraction[np.arange(len(alphas)), owner] = coefs
    return np.array(alphas), np.array(centers), contraction


def compute_ao_integrals(geometry: Geometry, basis: GaussianBasis) -> AOIntegrals:
    """Overlap, kinetic, nuclear attraction and ERIs over s-type Gaussians."""
    a, A, C = _primitives(basis)
    p = a[:, None] + a[None, :]
    mu = a[:, None] * a[None, :] / p
    ab2 = np.sum((A[:, None, :] - A[None, :, :]) ** 2, axis=-1)
    P = (a[:, None, None] * A[:, None, :] + a[None, :, None] * A[None, :, :]) / p[..., None]
    kab = np.exp(-mu * ab2)

    s_prim = (np.pi / p) ** 1.5 * kab
    t_prim = mu * (3.0 - 2.0 * mu * ab2) * s_prim
    v_prim = np.zeros_like(s_prim)
    for z, pos in geometry.atoms:
        pc2 = np.sum((P - np.asarray(pos)) ** 2, axis=-1)
        v_prim -= z * 2.0 * np.pi / p * kab * boys0(p * pc2)

    # (ab|cd) over primitive pairs
    pq = p[:, :, None, None] + p[None, None, :, :]
    rho = p[:, :, None, None] * p[None, None, :, :] / pq
    pq2 = np.sum((P[:, :, None, None, :] - P[None, None, :, :, :]) ** 2, axis=-1)
    eri_prim = (2.0 * np.pi ** 2.5 / (p[:, :, None, None] * p[None, None, :, :] * np.sqrt(pq))
                * kab[:, :, None, None] * kab[None, None, :, :] * boys0(rho * pq2))

    S = C.T @ s_prim @ C
    T = C.T @ t_prim @ C
    V = C.T @ v_prim @ C
    eri = np.einsum("ap,bq,cr,ds,abcd->pqrs", C, C, C, C, eri_prim, optimize=True)
    return AOIntegrals(S=S, T=T, V=V, eri=eri, e_nuc=nuclear_repulsion(geometry))


@dataclass
class SCFConfig:
    scf_tol: float = 1e-10
    max_iter: int = 200
    diis_depth: int = 8
    lindep_cutoff: float = 1e-10


@dataclass
class RHFResult:
    C: np.ndarray
    orbital_energies: np.ndarray
    e_rhf: float
    iterations: int
    trace: list = field(default_factory=list)


def _orthogonalizer(S, cutoff):
    s, U = np.linalg.eigh(S)
    keep = s > cutoff
    return U[:, keep] / np.sqrt(s[keep])


def _fock(hcore, eri, D):
    J = np.einsum("pqrs,rs->pq", eri, D)
    K = np.einsum("prqs,rs->pq", eri, D)
    return hcore + J - 0.5 * K


def solve_rhf(ao: AOIntegrals, n_elec: int, cfg: SCFConfig | None = None) -> RHFResult:
    """Closed-shell RHF with a core-Hamiltonian guess and DIIS.

    ``D`` is the total (spin-summed) density matrix.  Raises
    :class:`SCFConvergenceError` if the commutator ``FDS - SDF`` does not drop
    below ``cfg.scf_tol`` within ``cfg.max_iter`` iterations.
    """
    cfg = cfg or SCFConfig()
    if n_elec % 2:
        raise ValueError("RHF needs an even number of electrons")
    nocc = n_elec // 2
    X = _orthogonalizer(ao.S, cfg.lindep_cutoff)
    if nocc > X.shape[1]:
        raise ValueError(f"{nocc} doubly occupied orbitals exceed the basis size")
    hcore = ao.hcore

    def diagonalize(F):
        e, Cp = np.linalg.eigh(X.T @ F @ X)
        return e, X @ Cp

    eps, C = diagonalize(hcore)
    focks, errors, trace = [], [], []
    for it in range(1, cfg.max_iter + 1):
        D = 2.0 * C[:, :nocc] @ C[:, :nocc].T
        F = _fock(hcore, ao.eri, D)
        e_elec = 0.5 * np.sum(D * (hcore + F))
        err = F @ D @ ao.S - ao.S @ D @ F
        err_max = float(np.max(np.abs(err)))
        trace.append((it, e_elec + ao.e_nuc, err_max))
        logger.debug("scf %3d  E=%.12f  |[F,D]|=%.2e", it, e_elec + ao.e_nuc, err_max)
        if err_max < cfg.scf_tol:
            eps, C = diagonalize(F)
            return RHFResult(C, eps, e_elec + ao.e_nuc, it, trace)
        focks.append(F)
        errors.append(X.T @ err @ X)
        focks, errors = focks[-cfg.diis_depth:], errors[-cfg.diis_depth:]
        if len(focks) > 1:
            F = _diis_extrapolate(focks, errors)
        eps, C = diagonalize(F)
    raise SCFConvergenceError(f"RHF did not converge in {cfg.max_iter} iterations", trace)


def _diis_extrapolate(vectors, errors):
    n = len(vectors)
    B = -np.ones((n + 1, n + 1))
    B[n, n] = 0.0
    for i in range(n):
        for j in range(n):
            B[i, j] = np.vdot(errors[i], errors[j])
    rhs = np.zeros(n + 1)
    rhs[n] = -1.0
    try:
        c = np.linalg.solve(B, rhs)
    except np.linalg.LinAlgError:
        c = np.linalg.lstsq(B, rhs, rcond=None)[0]
    return sum(ci * v for ci, v in zip(c[:n], vectors))


def transform_to_mo(ao: AOIntegrals, C: np.ndarray, n_elec: int,
                    orbital_energies=None) -> MOIntegrals:
    """Quarter-transform the AO integrals into the orbital basis ``C``."""
    if C.shape[0] != ao.S.shape[0]:
        raise ValueError(f"C has {C.shape[0]} rows for {ao.S.shape[0]} AOs")
    h = C.T @ ao.hcore @ C
    g = np.einsum("pqrs,pi->iqrs", ao.eri, C, optimize=True)
    g = np.einsum("iqrs,qj->ijrs", g, C, optimize=True)
    g = np.einsum("ijrs,rk->ijks", g, C, optimize=True)
    g = np.einsum("ijks,sl->ijkl", g, C, optimize=True)
    return MOIntegrals(h=0.5 * (h + h.T), g=g, e_nuc=ao.e_nuc, n_elec=n_elec,
                       orbital_energies=orbital_energies, ms2=n_elec % 2)


def rhf_mo_integrals(geometry: Geometry, basis: str = "sto-3g",
                     cfg: SCFConfig | None = None) -> tuple[MOIntegrals, RHFResult]:
    """Geometry -> AO integrals -> RHF -> MO integrals."""
    ao = compute_ao_integrals(geometry, GaussianBasis.build(geometry, basis))
    rhf = solve_rhf(ao, geometry.n_elec, cfg)
    return transform_to_mo(ao, rhf.C, geometry.n_elec, rhf.orbital_energies), rhf


def direct_sum_mo_integrals(fragments: list[Geometry], basis: str = "sto-3g",
                            cfg: SCFConfig | None = None) -> MOIntegrals:
    """MO integrals of a super-system built from per-fragment RHF orbitals.

    The orbital coefficient matrix is block diagonal over fragments, with
    columns sorted by fragment orbital energy (occupied orbitals first).  This
    keeps orbitals localised on fragments for widely separated systems where a
    supersystem RHF would mix degenerate orbitals.
    """
    blocks, energies, nocc_flags = [], [], []
    for frag in fragments:
        ao = compute_ao_integrals(frag, GaussianBasis.build(frag, basis))
        rhf = solve_rhf(ao, frag.n_elec, cfg)
        blocks.append(rhf.C)
        energies.append(rhf.orbital_energies)
        nocc = frag.n_elec // 2
        nocc_flags.append(np.arange(len(rhf.orbital_energies)) >= nocc)
    n_ao = sum(b.shape[0] for b in blocks)
    C = np.zeros((n_ao, sum(b.shape[1] for b in blocks)))
    r = c = 0
    for b in blocks:
        C[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    eps = np.concatenate(energies)
    virt = np.concatenate(nocc_flags)
    order = np.lexsort((eps, virt))
    supersystem = Geometry([atom for frag in fragments for atom in frag.atoms])
    ao = compute_ao_integrals(supersystem, GaussianBasis.build(supersystem, basis))
    return transform_to_mo(ao, C[:, order], supersystem.n_elec, eps[order])
