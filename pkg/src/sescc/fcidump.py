"""FCIDUMP reading and writing.

Records after the ``&END`` (or ``/``) line are ``value i j k l`` with 1-based
orbital indices in chemist notation:

* ``i j k l`` all nonzero: two-electron integral (ij|kl)
* ``i j 0 0``: one-electron integral h_ij
* ``i 0 0 0``: orbital energy (optional)
* ``0 0 0 0``: core / nuclear repulsion energy
"""
from __future__ import annotations

import re

import numpy as np

from .integrals import MOIntegrals


class FCIDUMPError(ValueError):
    pass


_HEADER_KEY = re.compile(r"(NORB|NELEC|MS2)\s*=\s*(-?\d+)", re.IGNORECASE)


def read_fcidump(path) -> MOIntegrals:
    with open(path) as f:
        lines = f.readlines()
    header = []
    body_start = None
    for lineno, line in enumerate(lines):
        stripped = line.strip()
        header.append(stripped)
        if stripped.upper().startswith("&END") or stripped.endswith("/"):
            body_start = lineno + 1
            break
    if body_start is None:
        raise FCIDUMPError(f"{path}: no '&END' terminating the header")
    keys = {k.upper(): int(v) for k, v in _HEADER_KEY.findall(" ".join(header))}
    for key in ("NORB", "NELEC"):
        if key not in keys:
            raise FCIDUMPError(f"{path}: header lacks {key}")
    n = keys["NORB"]
    h = np.zeros((n, n))
    g = np.zeros((n, n, n, n))
    eps = np.zeros(n)
    have_eps = False
    e_nuc = 0.0
    for lineno in range(body_start, len(lines)):
        fields = lines[lineno].split()
        if not fields:
            continue
        if len(fields) != 5:
            raise FCIDUMPError(f"{path}:{lineno + 1}: expected 'value i j k l'")
        try:
            value = float(fields[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(x) for x in fields[1:])
        except ValueError:
            raise FCIDUMPError(f"{path}:{lineno + 1}: cannot parse {lines[lineno]!r}") from None
        if max(i, j, k, l) > n or min(i, j, k, l) < 0:
            raise FCIDUMPError(f"{path}:{lineno + 1}: index exceeds NORB={n}")
        if i and j and k and l:
            i, j, k, l = i - 1, j - 1, k - 1, l - 1
            for a, b, c, d in ((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k)):
                g[a, b, c, d] = value
                g[c, d, a, b] = value
        elif i and j and not (k or l):
            h[i - 1, j - 1] = h[j - 1, i - 1] = value
        elif i and not (j or k or l):
            eps[i - 1] = value
            have_eps = True
        elif not (i or j or k or l):
            e_nuc = value
        else:
            raise FCIDUMPError(f"{path}:{lineno + 1}: unrecognised index pattern")
    return MOIntegrals(h=h, g=g, e_nuc=e_nuc, n_elec=keys["NELEC"], ms2=keys.get("MS2", 0),
                       orbital_energies=eps if have_eps else None)


def write_fcidump(mo: MOIntegrals, path, tol: float = 0.0, orbital_energies: bool = False):
    """Write the unique integrals of ``mo`` (8-fold symmetry) with full precision."""
    n = mo.n_orb
    with open(path, "w") as f:
        f.write(f" &FCI NORB={n:4d},NELEC={mo.n_elec:3d},MS2={mo.ms2},\n")
        f.write("  ORBSYM=" + "1," * n + "\n  ISYM=1,\n &END\n")
        for i in range(n):
            for j in range(i + 1):
                ij = i * (i + 1) // 2 + j
                for k in range(n):
                    for l in range(k + 1):
                        if k * (k + 1) // 2 + l > ij:
                            continue
                        v = mo.g[i, j, k, l]
                        if abs(v) > tol:
                            f.write(f"{float(v)!r:>24} {i + 1:4d} {j + 1:4d} {k + 1:4d} {l + 1:4d}\n")
        for i in range(n):
            for j in range(i + 1):
                v = mo.h[i, j]
                if abs(v) > tol:
                    f.write(f"{float(v)!r:>24} {i + 1:4d} {j + 1:4d}    0    0\n")
        if orbital_energies:
            for i, e in enumerate(mo.orbital_energies):
                f.write(f"{float(e)!r:>24} {i + 1:4d}    0    0    0\n")
        f.write(f"{float(mo.e_nuc)!r:>24}    0    0    0    0\n")
