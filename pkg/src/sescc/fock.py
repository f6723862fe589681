"""Occupation-number representation of Slater determinants.

A determinant is stored as a pair of bit strings over spatial orbitals, one
for each spin.  For phases the spin orbitals are ordered by the interleaved
linear index ``2 * spatial + spin`` (alpha = 0, beta = 1), and a determinant
is the ordered creation string

    |D> = a+_{p1} a+_{p2} ... a+_{pN} |vac>,   p1 < p2 < ... < pN.

Every sign produced by this module follows that single global convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Iterable, Optional

import numpy as np

ALPHA = 0
BETA = 1
MAX_ORB = 32

_SPIN_LABEL = {ALPHA: "a", BETA: "b"}


class FockSpaceError(ValueError):
    """Invalid electron counts, orbital indices or excitation definitions."""


@dataclass(frozen=True, order=True)
class SpinOrbital:
    """A spin orbital given by its spatial index (0-based) and spin."""

    spatial: int
    spin: int

    def __post_init__(self):
        if self.spin not in (ALPHA, BETA):
            raise FockSpaceError(f"spin must be ALPHA or BETA, got {self.spin!r}")
        if not 0 <= self.spatial < MAX_ORB:
            raise FockSpaceError(f"spatial index {self.spatial} out of range")

    @property
    def linear(self) -> int:
        return 2 * self.spatial + self.spin

    @classmethod
    def from_linear(cls, index: int) -> "SpinOrbital":
        return cls(index >> 1, index & 1)

    def __str__(self):
        return f"{self.spatial + 1}{_SPIN_LABEL[self.spin]}"


@dataclass(frozen=True, order=True)
class Determinant:
    """Slater determinant as (alpha, beta) occupation bit strings."""

    alpha: int
    beta: int

    @property
    def occupation(self) -> int:
        """Occupation bit mask over interleaved spin orbitals."""
        return interleave(self.alpha, self.beta)

    @classmethod
    def from_occupation(cls, occ: int) -> "Determinant":
        return cls(*deinterleave(occ))

    def occupied(self) -> list[int]:
        """Occupied spin orbitals as ascending linear indices."""
        occ = self.occupation
        return [p for p in range(2 * MAX_ORB) if occ >> p & 1]

    def __str__(self):
        return f"|{self.alpha:b}, {self.beta:b}>"


def interleave(alpha: int, beta: int) -> int:
    occ = 0
    p = 0
    while alpha or beta:
        occ |= (alpha & 1) << (2 * p) | (beta & 1) << (2 * p + 1)
        alpha >>= 1
        beta >>= 1
        p += 1
    return occ


def deinterleave(occ: int) -> tuple[int, int]:
    alpha = beta = 0
    p = 0
    while occ:
        alpha |= (occ & 1) << p
        beta |= (occ >> 1 & 1) << p
        occ >>= 2
        p += 1
    return alpha, beta


def interleave_array(alpha: np.ndarray, beta: np.ndarray, n_orb: int) -> np.ndarray:
    """Vectorised :func:`interleave` over uint64 arrays."""
    alpha = np.asarray(alpha, dtype=np.uint64)
    beta = np.asarray(beta, dtype=np.uint64)
    occ = np.zeros(alpha.shape, dtype=np.uint64)
    one = np.uint64(1)
    for p in range(n_orb):
        occ |= ((alpha >> np.uint64(p)) & one) << np.uint64(2 * p)
        occ |= ((beta >> np.uint64(p)) & one) << np.uint64(2 * p + 1)
    return occ


@dataclass(frozen=True, order=True)
class Excitation:
    """Particle-hole excitation ``a+_{a1}...a+_{ak} a_{ik}...a_{i1}``.

    ``holes`` and ``particles`` hold ascending linear spin-orbital indices.
    """

    holes: tuple[int, ...]
    particles: tuple[int, ...]

    def __post_init__(self):
        holes = tuple(int(h) for h in self.holes)
        particles = tuple(int(p) for p in self.particles)
        object.__setattr__(self, "holes", holes)
        object.__setattr__(self, "particles", particles)
        if len(holes) != len(particles):
            raise FockSpaceError(f"unbalanced excitation {holes} -> {particles}")
        for idx in (holes, particles):
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise FockSpaceError(f"indices must be strictly ascending: {idx}")
        if set(holes) & set(particles):
            raise FockSpaceError(f"holes and particles overlap: {holes} -> {particles}")

    @property
    def rank(self) -> int:
        return len(self.holes)

    @property
    def hole_mask(self) -> int:
        return sum(1 << h for h in self.holes)

    @property
    def particle_mask(self) -> int:
        return sum(1 << p for p in self.particles)

    @property
    def spin_change(self) -> int:
        """Change in the number of beta electrons minus alpha electrons."""
        return sum(1 if p & 1 else -1 for p in self.particles) - sum(
            1 if h & 1 else -1 for h in self.holes)

    @classmethod
    def from_spin_orbitals(cls, holes: Iterable[SpinOrbital],
                           particles: Iterable[SpinOrbital]) -> "Excitation":
        return cls(tuple(sorted(h.linear for h in holes)),
                   tuple(sorted(p.linear for p in particles)))

    def __str__(self):
        h = ",".join(str(SpinOrbital.from_linear(i)) for i in self.holes)
        p = ",".join(str(SpinOrbital.from_linear(a)) for a in self.particles)
        return f"{h}->{p}"


def _parity_below(occ: int, p: int) -> int:
    return (occ & ((1 << p) - 1)).bit_count() & 1


def apply_excitation(det: Determinant, ex: Excitation) -> Optional[tuple[Determinant, int]]:
    """Apply ``ex`` to ``det``.

    Returns ``None`` when an annihilated spin orbital is empty or a created
    one is already filled, otherwise the new determinant and its sign.
    Operators act right to left: ``a_{i1}`` first, ``a+_{a1}`` last.
    """
    occ = det.occupation
    parity = 0
    for h in ex.holes:
        if not occ >> h & 1:
            return None
        parity ^= _parity_below(occ, h)
        occ ^= 1 << h
    for p in reversed(ex.particles):
        if occ >> p & 1:
            return None
        parity ^= _parity_below(occ, p)
        occ |= 1 << p
    return Determinant.from_occupation(occ), -1 if parity else 1


def apply_excitation_array(occ: np.ndarray, ex: Excitation):
    """Vectorised :func:`apply_excitation` on interleaved occupation masks.

    Returns ``(where, new_occ, phase)``: positions of ``occ`` on which the
    excitation acts, the resulting masks and the +/-1 signs.
    """
    hmask = np.uint64(ex.hole_mask)
    pmask = np.uint64(ex.particle_mask)
    where = np.flatnonzero(((occ & hmask) == hmask) & ((occ & pmask) == 0))
    cur = occ[where].copy()
    parity = np.zeros(len(where), dtype=np.uint8)
    for h in ex.holes:
        bit = np.uint64(1 << h)
        parity ^= np.bitwise_count(cur & (bit - np.uint64(1))) & 1
        cur ^= bit
    for p in reversed(ex.particles):
        bit = np.uint64(1 << p)
        parity ^= np.bitwise_count(cur & (bit - np.uint64(1))) & 1
        cur |= bit
    return where, cur, 1 - 2 * parity.astype(np.int8)


def reference_determinant(n_orb: int, n_alpha: int, n_beta: int) -> Determinant:
    """Aufbau determinant: lowest spatial orbitals filled in each spin string."""
    _check_counts(n_orb, n_alpha, n_beta)
    return Determinant((1 << n_alpha) - 1, (1 << n_beta) - 1)


def excitation_between(ref: Determinant, det: Determinant) -> tuple[Excitation, int]:
    """The unique particle-hole excitation with ``E |ref> = phase |det>``."""
    r, d = ref.occupation, det.occupation
    holes = tuple(p for p in range(2 * MAX_ORB) if (r & ~d) >> p & 1)
    particles = tuple(p for p in range(2 * MAX_ORB) if (d & ~r) >> p & 1)
    ex = Excitation(holes, particles)
    _, phase = apply_excitation(ref, ex)
    return ex, phase


def _check_counts(n_orb, n_alpha, n_beta):
    if not 0 < n_orb <= MAX_ORB:
        raise FockSpaceError(f"n_orb must be in 1..{MAX_ORB}, got {n_orb}")
    for n in (n_alpha, n_beta):
        if not 0 <= n <= n_orb:
            raise FockSpaceError(
                f"electron count {n} incompatible with {n_orb} spatial orbitals")


def string_list(n_orb: int, n_elec: int) -> np.ndarray:
    """All bit strings of ``n_elec`` electrons in ``n_orb`` orbitals, ascending."""
    strings = [sum(1 << p for p in c) for c in combinations(range(n_orb), n_elec)]
    return np.array(sorted(strings), dtype=np.uint64)


@dataclass(frozen=True, eq=False)
class FockBasis:
    """All determinants of a fixed (n_alpha, n_beta) sector.

    Determinants are ordered lexicographically on (alpha, beta) integer
    values, so position ``k = ia * len(beta_strings) + ib``.  The aufbau
    reference has the smallest strings and therefore sits at position 0.
    """

    n_orb: int
    n_alpha: int
    n_beta: int
    alpha_strings: np.ndarray = field(repr=False)
    beta_strings: np.ndarray = field(repr=False)
    occupations: np.ndarray = field(repr=False)
    _sorted_occ: np.ndarray = field(repr=False)
    _occ_order: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.occupations)

    @property
    def size(self) -> int:
        return len(self)

    @property
    def n_elec(self) -> int:
        return self.n_alpha + self.n_beta

    @property
    def reference(self) -> Determinant:
        return self[0]

    @property
    def determinants(self) -> list[Determinant]:
        return [self[k] for k in range(len(self))]

    def __getitem__(self, k: int) -> Determinant:
        nb = len(self.beta_strings)
        return Determinant(int(self.alpha_strings[k // nb]), int(self.beta_strings[k % nb]))

    def index_of(self, det: Determinant) -> int:
        idx = self.lookup(np.array([det.occupation], dtype=np.uint64))[0]
        if idx < 0:
            raise KeyError(f"{det} is not in this basis")
        return int(idx)

    def __contains__(self, det: Determinant) -> bool:
        try:
            self.index_of(det)
        except KeyError:
            return False
        return True

    def lookup(self, occ: np.ndarray) -> np.ndarray:
        """Basis positions of interleaved occupation masks (-1 if absent)."""
        pos = np.searchsorted(self._sorted_occ, occ)
        pos = np.minimum(pos, len(self._sorted_occ) - 1)
        found = self._sorted_occ[pos] == occ
        return np.where(found, self._occ_order[pos], -1)

    def same_sector(self, other: "FockBasis") -> bool:
        return (self.n_orb, self.n_alpha, self.n_beta) == (other.n_orb, other.n_alpha, other.n_beta)


def enumerate_basis(n_orb: int, n_alpha: int, n_beta: int) -> FockBasis:
    """Enumerate every determinant of the sector, reference first.

    >>> len(enumerate_basis(6, 3, 3))
    400
    """
    _check_counts(n_orb, n_alpha, n_beta)
    alpha = string_list(n_orb, n_alpha)
    beta = string_list(n_orb, n_beta)
    a = np.repeat(alpha, len(beta))
    b = np.tile(beta, len(alpha))
    occ = interleave_array(a, b, n_orb)
    order = np.argsort(occ, kind="stable")
    assert len(occ) == comb(n_orb, n_alpha) * comb(n_orb, n_beta)
    return FockBasis(n_orb, n_alpha, n_beta, alpha, beta, occ, occ[order], order)


def occupied_virtual(n_orb: int, n_alpha: int, n_beta: int) -> tuple[list[int], list[int]]:
    """Linear spin-orbital indices occupied/empty in the aufbau reference."""
    occ = [2 * p for p in range(n_alpha)] + [2 * p + 1 for p in range(n_beta)]
    virt = [2 * p for p in range(n_alpha, n_orb)] + [2 * p + 1 for p in range(n_beta, n_orb)]
    return sorted(occ), sorted(virt)


def sz_conserving_excitations(holes: Iterable[int], particles: Iterable[int],
                              max_rank: int, min_rank: int = 1) -> list[Excitation]:
    """All S_z-conserving excitations from ``holes`` into ``particles``.

    Ordered by rank, then hole tuple, then particle tuple.
    """
    holes = sorted(set(holes))
    particles = sorted(set(particles))
    out = []
    for k in range(min_rank, max_rank + 1):
        by_alpha: dict[int, list[tuple[int, ...]]] = {}
        for ps in combinations(particles, k):
            by_alpha.setdefault(sum(1 for p in ps if not p & 1), []).append(ps)
        for hs in combinations(holes, k):
            n_a = sum(1 for h in hs if not h & 1)
            for ps in by_alpha.get(n_a, ()):
                out.append(Excitation(hs, ps))
    return out
