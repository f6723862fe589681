"""Matrix representations of second-quantized operators over a FockBasis.

Cluster operators are strictly excitation-rank increasing, so their
matrices are nilpotent and ``exp(T)`` is a terminating Taylor series.  All
exponentials here are evaluated that way, never by scaling and squaring.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .fock import Determinant, Excitation, FockBasis, apply_excitation_array, enumerate_basis
from .integrals import MOIntegrals

# Hamiltonians above this dimension are kept sparse unless asked otherwise.
DENSE_LIMIT = 5000


class NilpotencyError(RuntimeError):
    """A supposedly nilpotent matrix survived more powers than allowed."""


class AmplitudeSet(dict):
    """Cluster amplitudes keyed by :class:`~sescc.fock.Excitation`.

    Absent excitations have amplitude zero.
    """

    def restrict(self, keep: Callable[[Excitation], bool]) -> "AmplitudeSet":
        return AmplitudeSet((ex, t) for ex, t in self.items() if keep(ex))

    def vector(self, excitations: Sequence[Excitation]) -> np.ndarray:
        return np.array([self.get(ex, 0.0) for ex in excitations], dtype=float)

    @classmethod
    def from_vector(cls, excitations: Sequence[Excitation], values) -> "AmplitudeSet":
        return cls((ex, float(v)) for ex, v in zip(excitations, values))

    def max_abs(self) -> float:
        return max((abs(v) for v in self.values()), default=0.0)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense (or, for large spaces, CSR) matrix over a :class:`FockBasis`."""

    data: object
    basis: FockBasis

    def __post_init__(self):
        n = len(self.basis)
        if self.data.shape != (n, n):
            raise ValueError(f"matrix shape {self.data.shape} does not match basis size {n}")

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.data)

    @property
    def shape(self):
        return self.data.shape

    def dense(self) -> np.ndarray:
        return self.data.toarray() if self.is_sparse else np.asarray(self.data)

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            _check_same_basis(self, other)
            return OperatorMatrix(self.data @ other.data, self.basis)
        return self.data @ other


def _check_same_basis(a: OperatorMatrix, b: OperatorMatrix):
    if a.basis is not b.basis and not a.basis.same_sector(b.basis):
        raise ValueError("operator matrices live on different bases")


# --- Hamiltonian -------------------------------------------------------------

def _string_excitation_ops(strings: np.ndarray, n_orb: int) -> np.ndarray:
    """Dense E_pq = a+_p a_q on one spin's string space, shape (n, n, ns, ns)."""
    ns = len(strings)
    index = {int(s): k for k, s in enumerate(strings)}
    ops = np.zeros((n_orb, n_orb, ns, ns))
    for k, s in enumerate(strings):
        s = int(s)
        for q in range(n_orb):
            if not s >> q & 1:
                continue
            sign_q = (s & ((1 << q) - 1)).bit_count()
            s1 = s ^ (1 << q)
            for p in range(n_orb):
                if s1 >> p & 1:
                    continue
                sign = sign_q + (s1 & ((1 << p) - 1)).bit_count()
                ops[p, q, index[s1 | 1 << p], k] = -1.0 if sign & 1 else 1.0
    return ops


def _same_spin_hamiltonian(E, h, g):
    """One-spin part sum h E + 1/2 sum (pq|rs) (E_pq E_rs - d_qr E_ps)."""
    k = h - 0.5 * np.einsum("pqqs->ps", g)
    W = np.einsum("pqrs,rsab->pqab", g, E, optimize=True)
    two = np.einsum("pqab,pqbc->ac", E, W, optimize=True)
    return np.einsum("pq,pqab->ab", k, E) + 0.5 * two


def blocked_to_interleaved_signs(basis: FockBasis) -> np.ndarray:
    """Sign relating alpha-then-beta ordered determinants to interleaved ones.

    Moving every beta creator left past the alpha creators of higher spatial
    index turns the blocked creation string into the interleaved one.
    """
    nb = len(basis.beta_strings)
    a = np.repeat(basis.alpha_strings, nb)
    b = np.tile(basis.beta_strings, len(basis.alpha_strings))
    swaps = np.zeros(len(a), dtype=np.int64)
    for q in range(basis.n_orb):
        has_beta = (b >> np.uint64(q)) & np.uint64(1)
        above = np.bitwise_count(a >> np.uint64(q + 1)).astype(np.int64)
        swaps += has_beta.astype(np.int64) * above
    return np.where(swaps & 1, -1.0, 1.0)


def build_hamiltonian_matrix(mo: MOIntegrals, basis: FockBasis | None = None,
                             sparse: bool | None = None) -> OperatorMatrix:
    """Matrix of the electronic Hamiltonian (plus ``e_nuc`` on the diagonal).

    Same-spin parts are built densely on the string spaces and the
    opposite-spin coupling as a sum of Kronecker products, all in the
    alpha-then-beta ordering; the result is then converted to the global
    interleaved sign convention.
    """
    if basis is None:
        basis = enumerate_basis(mo.n_orb, mo.n_alpha, mo.n_beta)
    if basis.n_orb != mo.n_orb or basis.n_elec != mo.n_elec:
        raise ValueError("basis sector does not match the integrals")
    n = mo.n_orb
    Ea = _string_excitation_ops(basis.alpha_strings, n)
    Eb = _string_excitation_ops(basis.beta_strings, n)
    na, nb = Ea.shape[-1], Eb.shape[-1]
    Ha = _same_spin_hamiltonian(Ea, mo.h, mo.g)
    Hb = _same_spin_hamiltonian(Eb, mo.h, mo.g)

    parts = [sp.kron(sp.csr_matrix(Ha), sp.identity(nb), format="coo"),
             sp.kron(sp.identity(na), sp.csr_matrix(Hb), format="coo")]
    Wb = np.einsum("pqrs,rsab->pqab", mo.g, Eb, optimize=True)
    for p in range(n):
        for q in range(n):
            Epq = sp.csr_matrix(Ea[p, q])
            if Epq.nnz:
                parts.append(sp.kron(Epq, sp.csr_matrix(Wb[p, q]), format="coo"))
    rows = np.concatenate([m.row for m in parts])
    cols = np.concatenate([m.col for m in parts])
    vals = np.concatenate([m.data for m in parts])
    signs = blocked_to_interleaved_signs(basis)
    vals = vals * signs[rows] * signs[cols]
    dim = len(basis)
    H = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    H = H + mo.e_nuc * sp.identity(dim, format="csr")
    if sparse is None:
        sparse = dim > DENSE_LIMIT
    if sparse:
        H.eliminate_zeros()
        return OperatorMatrix(H, basis)
    return OperatorMatrix(H.toarray(), basis)


# --- cluster operators -------------------------------------------------------

class ExcitationMap:
    """Where a fixed list of excitations sends each determinant of a basis.

    Holds the sparse pattern ``(row, col, phase, owner)`` so that cluster
    matrices for new amplitude values are cheap to rebuild.
    """

    def __init__(self, basis: FockBasis, excitations: Sequence[Excitation]):
        self.basis = basis
        self.excitations = list(excitations)
        rows, cols, phases, owner = [], [], [], []
        occ = basis.occupations
        for k, ex in enumerate(self.excitations):
            where, new, phase = apply_excitation_array(occ, ex)
            target = basis.lookup(new)
            if np.any(target < 0):
                raise ValueError(f"excitation {ex} leaves the basis sector")
            rows.append(target)
            cols.append(where)
            phases.append(phase)
            owner.append(np.full(len(where), k))
        cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt))
        self.rows = cat(rows, np.int64)
        self.cols = cat(cols, np.int64)
        self.phases = cat(phases, float)
        self.owner = cat(owner, np.int64)
        # image of the reference (column 0) under each excitation
        self.ref_index = np.full(len(self.excitations), -1, dtype=np.int64)
        self.ref_phase = np.zeros(len(self.excitations))
        at_ref = self.cols == 0
        self.ref_index[self.owner[at_ref]] = self.rows[at_ref]
        self.ref_phase[self.owner[at_ref]] = self.phases[at_ref]

    def __len__(self):
        return len(self.excitations)

    def matrix(self, values, sparse: bool = True):
        values = np.asarray(values, dtype=float)
        dim = len(self.basis)
        M = sp.csr_matrix((values[self.owner] * self.phases, (self.rows, self.cols)),
                          shape=(dim, dim))
        return M if sparse else M.toarray()

    def project(self, vector: np.ndarray) -> np.ndarray:
        """Components <mu|v> = <Phi| E_mu^+ |v> for every excitation."""
        if np.any(self.ref_index < 0):
            raise ValueError("some excitations annihilate the reference")
        return self.ref_phase * vector[self.ref_index]


def build_cluster_matrix(t: AmplitudeSet, basis: FockBasis,
                         sparse: bool = False) -> OperatorMatrix:
    """Matrix of ``T = sum_mu t_mu E_mu`` on ``basis``."""
    excitations = list(t)
    emap = ExcitationMap(basis, excitations)
    return OperatorMatrix(emap.matrix([t[ex] for ex in excitations], sparse=sparse), basis)


def exp_action(T, V, sign: float = 1.0, max_terms: int | None = None):
    """``exp(sign * T) @ V`` by the terminating series for nilpotent ``T``.

    ``T`` may be dense or sparse, ``V`` a vector or a block of columns.
    """
    if isinstance(T, OperatorMatrix):
        T = T.data
    if max_terms is None:
        max_terms = T.shape[0]
    out = np.array(V, dtype=float, copy=True)
    term = out.copy()
    for k in range(1, max_terms + 2):
        term = (T @ term) * (sign / k)
        if not np.any(term):
            return out
        out += term
    raise NilpotencyError(f"series did not terminate within {max_terms + 1} terms")


def exp_nilpotent(T: OperatorMatrix, sign: float = 1.0) -> OperatorMatrix:
    """Dense ``exp(sign * T)`` for a cluster matrix; exact for nilpotent ``T``.

    Raises :class:`NilpotencyError` if more than ``n_elec + 1`` powers of
    ``T`` are nonzero.
    """
    n = len(T.basis)
    A = T.dense() * sign
    out = np.eye(n)
    term = np.eye(n)
    for k in range(1, T.basis.n_elec + 2):
        term = term @ A / k
        if not term.any():
            return OperatorMatrix(out, T.basis)
        out += term
    raise NilpotencyError(f"T^{T.basis.n_elec + 1} is nonzero; T is not a cluster matrix")


def similarity_transform(H: OperatorMatrix, T: OperatorMatrix) -> OperatorMatrix:
    """Dense ``exp(-T) H exp(T)``."""
    _check_same_basis(H, T)
    return OperatorMatrix(exp_nilpotent(T, -1.0).data @ (H.dense() @ exp_nilpotent(T).data),
                          H.basis)


def _indices(basis: FockBasis, subset: Iterable) -> np.ndarray:
    idx = []
    for item in subset:
        if isinstance(item, Determinant):
            idx.append(basis.index_of(item))
        else:
            k = int(item)
            if not 0 <= k < len(basis):
                raise KeyError(f"index {k} outside the basis")
            idx.append(k)
    return np.array(idx, dtype=np.int64)


def extract_subblock(M: OperatorMatrix, rows: Iterable, cols: Iterable | None = None) -> np.ndarray:
    """Dense sub-block of ``M`` over determinants (or basis positions)."""
    r = _indices(M.basis, rows)
    c = r if cols is None else _indices(M.basis, cols)
    if M.is_sparse:
        return M.data[r][:, c].toarray()
    return np.asarray(M.data)[np.ix_(r, c)]


def dump_matrix(M, path, tol: float = 0.0):
    """Write nonzero entries as ``row col value`` lines (0-based indices)."""
    A = M.data if isinstance(M, OperatorMatrix) else M
    coo = sp.coo_matrix(A)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as f:
        f.write(f"# dim {coo.shape[0]} {coo.shape[1]}\n")
        for k in order:
            if abs(coo.data[k]) > tol:
                f.write(f"{coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}\n")


def load_matrix(path) -> np.ndarray:
    with open(path) as f:
        header = f.readline().split()
        A = np.zeros((int(header[2]), int(header[3])))
        for line in f:
            i, j, v = line.split()
            A[int(i), int(j)] = float(v)
    return A
