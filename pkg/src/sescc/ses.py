"""Sub-system embedding sub-algebras (SES) defined by active orbital sets.

An SES is given by active occupied indices ``R`` and active virtual indices
``S``, either as spatial orbitals (both spins active) or as individual spin
orbitals.  Its internal excitations are all S_z-conserving excitations with
holes in ``R`` and particles in ``S``; everything else in a cluster operator
is external.

Text syntax uses 1-based orbital numbers, e.g. ``R=2;S=3,4`` or
``R=1a;S=3a`` (``a``/``b`` for alpha/beta spin orbitals).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator

import numpy as np

from .ccsolver import ExcitationSet
from .fock import (ALPHA, BETA, Excitation, FockBasis, SpinOrbital, apply_excitation,
                   sz_conserving_excitations)
from .opmatrix import AmplitudeSet

ORBITAL = "orbital"
SPIN_ORBITAL = "spin_orbital"


class SESError(ValueError):
    pass


@dataclass(frozen=True)
class SESSpec:
    """Active occupied set ``R`` and active virtual set ``S`` (0-based).

    In ``orbital`` mode the indices are spatial orbitals; in ``spin_orbital``
    mode they are linear spin-orbital indices ``2 * spatial + spin``.
    """

    R: tuple[int, ...] = ()
    S: tuple[int, ...] = ()
    mode: str = ORBITAL

    def __post_init__(self):
        if self.mode not in (ORBITAL, SPIN_ORBITAL):
            raise SESError(f"unknown SES mode {self.mode!r}")
        object.__setattr__(self, "R", tuple(sorted(set(int(r) for r in self.R))))
        object.__setattr__(self, "S", tuple(sorted(set(int(s) for s in self.S))))
        if set(self.R) & set(self.S):
            raise SESError(f"R and S overlap in {self}")
        if any(i < 0 for i in self.R + self.S):
            raise SESError("negative orbital index")

    @property
    def is_trivial(self) -> bool:
        return not self.R and not self.S

    def occupied_spin_orbitals(self) -> list[int]:
        return _expand(self.R, self.mode)

    def virtual_spin_orbitals(self) -> list[int]:
        return _expand(self.S, self.mode)

    def contains(self, ex: Excitation) -> bool:
        """True if ``ex`` is internal to this SES."""
        occ, virt = self._masks
        return (ex.hole_mask & ~occ) == 0 and (ex.particle_mask & ~virt) == 0

    @property
    def _masks(self):
        occ = sum(1 << p for p in self.occupied_spin_orbitals())
        virt = sum(1 << p for p in self.virtual_spin_orbitals())
        return occ, virt

    def check_range(self, n_orb: int, n_alpha: int, n_beta: int | None = None):
        n_beta = n_alpha if n_beta is None else n_beta
        nocc = {ALPHA: n_alpha, BETA: n_beta}
        for p in self.occupied_spin_orbitals():
            if (p >> 1) >= nocc[p & 1]:
                raise SESError(f"{SpinOrbital.from_linear(p)} in R is not occupied in the reference")
        for p in self.virtual_spin_orbitals():
            if not nocc[p & 1] <= (p >> 1) < n_orb:
                raise SESError(f"{SpinOrbital.from_linear(p)} in S is not a virtual orbital")

    @classmethod
    def parse(cls, text: str) -> "SESSpec":
        """Parse ``R=2;S=3,4`` / ``R=1a;S=3a``; an empty string is the trivial SES."""
        text = text.strip()
        if text in ("", "trivial", "R=;S="):
            return cls()
        parts = {}
        for chunk in re.split(r"[;\s]+", text):
            if not chunk:
                continue
            key, _, values = chunk.partition("=")
            key = key.strip().upper()
            if key not in ("R", "S") or key in parts:
                raise SESError(f"bad SES text {text!r}")
            parts[key] = [v for v in values.replace("{", "").replace("}", "").split(",") if v]
        tokens = parts.get("R", []) + parts.get("S", [])
        spin = any(tok[-1].lower() in "ab" for tok in tokens)
        if spin and not all(tok[-1].lower() in "ab" for tok in tokens):
            raise SESError(f"mixed orbital and spin-orbital labels in {text!r}")

        def conv(tok):
            try:
                if spin:
                    p = int(tok[:-1]) - 1
                    return 2 * p + (ALPHA if tok[-1].lower() == "a" else BETA)
                return int(tok) - 1
            except ValueError:
                raise SESError(f"bad orbital label {tok!r} in {text!r}") from None

        return cls(tuple(conv(t) for t in parts.get("R", [])),
                   tuple(conv(t) for t in parts.get("S", [])),
                   SPIN_ORBITAL if spin else ORBITAL)

    def __str__(self):
        if self.mode == ORBITAL:
            fmt = lambda i: str(i + 1)
        else:
            fmt = lambda i: str(SpinOrbital.from_linear(i))
        return f"R={','.join(map(fmt, self.R))};S={','.join(map(fmt, self.S))}"


def _expand(indices, mode):
    if mode == SPIN_ORBITAL:
        return sorted(indices)
    return sorted(2 * i + s for i in indices for s in (ALPHA, BETA))


@dataclass
class Partition:
    t_int: AmplitudeSet
    t_ext: AmplitudeSet


def internal_excitations(spec: SESSpec, n_orb: int | None = None, n_occ: int | None = None) -> ExcitationSet:
    """Every S_z-conserving excitation from R-derived into S-derived spin orbitals."""
    if n_orb is not None and n_occ is not None:
        spec.check_range(n_orb, n_occ)
    occ = spec.occupied_spin_orbitals()
    virt = spec.virtual_spin_orbitals()
    return ExcitationSet(sz_conserving_excitations(occ, virt, min(len(occ), len(virt))),
                         f"internal({spec})")


def validate_ses(spec: SESSpec, exset: Iterable[Excitation]) -> bool:
    """True iff ``exset`` contains every internal excitation of ``spec``.

    Only then does ``exp(T_int)|Phi>`` span the complete active space.
    """
    members = exset if isinstance(exset, (ExcitationSet, set, frozenset, dict)) else set(exset)
    # cheap rejection: the highest-rank internal excitation must be present
    occ = spec.occupied_spin_orbitals()
    virt = spec.virtual_spin_orbitals()
    top_h, top_p = [], []
    for spin in (ALPHA, BETA):
        o = [p for p in occ if p & 1 == spin]
        v = [p for p in virt if p & 1 == spin]
        k = min(len(o), len(v))
        top_h += o[:k]
        top_p += v[:k]
    if top_h and Excitation(tuple(sorted(top_h)), tuple(sorted(top_p))) not in members:
        return False
    return all(ex in members for ex in internal_excitations(spec))


def partition_amplitudes(t: AmplitudeSet, spec: SESSpec) -> Partition:
    return Partition(t.restrict(spec.contains), t.restrict(lambda ex: not spec.contains(ex)))


def internal_space(spec: SESSpec, basis: FockBasis) -> np.ndarray:
    """Basis positions of the reference and all internal excitations of it.

    The reference comes first, then images in internal-excitation order.
    """
    ref = basis.reference
    out = {0: None}
    for ex in internal_excitations(spec):
        image = apply_excitation(ref, ex)
        if image is None:
            raise SESError(f"internal excitation {ex} does not act on the reference")
        out.setdefault(basis.index_of(image[0]), None)
    return np.array(list(out), dtype=np.int64)


def ses_census_ccsd(n_o: int, n_v: int, convention: str = "formula") -> int:
    """Number of CCSD SESs for ``n_o`` occupied and ``n_v`` virtual orbitals.

    ``formula`` counts ``n_o (2^n_v - 1) + n_v (2^n_o - 1)``, which lists every
    single-orbital pair (|R| = |S| = 1) once in each branch.  ``distinct``
    counts each (R, S) pair once, i.e. ``formula - n_o * n_v``.
    """
    if n_o < 1 or n_v < 1:
        raise ValueError("need at least one occupied and one virtual orbital")
    total = n_o * (2 ** n_v - 1) + n_v * (2 ** n_o - 1)
    if convention == "formula":
        return total
    if convention == "distinct":
        return total - n_o * n_v
    raise ValueError(f"unknown census convention {convention!r}")


def _nonempty_subsets(items) -> Iterator[tuple[int, ...]]:
    for k in range(1, len(items) + 1):
        yield from combinations(items, k)


def valid_orbital_ses(n_occ: int, n_orb: int, exset: Iterable[Excitation]) -> list[SESSpec]:
    """All non-trivial orbital-mode SESs valid for ``exset`` (exhaustive search)."""
    members = exset if isinstance(exset, ExcitationSet) else ExcitationSet(exset)
    out = []
    for R in _nonempty_subsets(range(n_occ)):
        for S in _nonempty_subsets(range(n_occ, n_orb)):
            spec = SESSpec(R, S)
            if validate_ses(spec, members):
                out.append(spec)
    return out
