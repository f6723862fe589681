"""Molecular geometries: text input and the built-in hydrogen models.

Geometry files are XYZ-like and must declare their units::

    units bohr
    H  0.0 0.0 0.0
    H  0.0 0.0 1.4

Lines starting with ``#`` are comments.  The atom label may be an element
symbol or a nuclear charge.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ANGSTROM_TO_BOHR = 1.0 / 0.52917721092

ELEMENTS = {"H": 1, "He": 2, "Li": 3, "Be": 4, "B": 5, "C": 6, "N": 7, "O": 8, "F": 9, "Ne": 10}


class GeometryError(ValueError):
    pass


@dataclass
class Geometry:
    """Atoms as (nuclear charge, position in bohr)."""

    atoms: list[tuple[float, tuple[float, float, float]]]

    def __post_init__(self):
        if not self.atoms:
            raise GeometryError("a geometry needs at least one atom")
        atoms = []
        for z, pos in self.atoms:
            pos = tuple(float(x) for x in pos)
            if len(pos) != 3 or not all(math.isfinite(x) for x in pos):
                raise GeometryError(f"bad coordinates {pos}")
            atoms.append((float(z), pos))
        self.atoms = atoms

    @property
    def n_elec(self) -> int:
        return int(round(sum(z for z, _ in self.atoms)))

    def translated(self, shift) -> "Geometry":
        return Geometry([(z, tuple(np.add(pos, shift))) for z, pos in self.atoms])

    def to_text(self) -> str:
        lines = ["units bohr"]
        for z, (x, y, w) in self.atoms:
            lines.append(f"{_symbol(z)} {x:.12f} {y:.12f} {w:.12f}")
        return "\n".join(lines) + "\n"


def _symbol(z):
    for sym, zz in ELEMENTS.items():
        if zz == z:
            return sym
    return repr(z)


def parse_geometry(text: str) -> Geometry:
    units = None
    atoms = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0].lower() in ("units", "unit"):
            if len(fields) != 2 or fields[1].lower() not in ("bohr", "angstrom"):
                raise GeometryError(f"line {lineno}: expected 'units bohr|angstrom'")
            units = fields[1].lower()
            continue
        if len(fields) != 4:
            raise GeometryError(f"line {lineno}: expected 'label x y z', got {raw!r}")
        label = fields[0]
        if label in ELEMENTS:
            z = ELEMENTS[label]
        else:
            try:
                z = float(label)
            except ValueError:
                raise GeometryError(f"line {lineno}: unknown element {label!r}") from None
        try:
            xyz = tuple(float(v) for v in fields[1:])
        except ValueError:
            raise GeometryError(f"line {lineno}: bad coordinate in {raw!r}") from None
        atoms.append((z, xyz))
    if units is None:
        raise GeometryError("geometry text must declare 'units bohr' or 'units angstrom'")
    if not atoms:
        raise GeometryError("no atoms found")
    scale = ANGSTROM_TO_BOHR if units == "angstrom" else 1.0
    return Geometry([(z, tuple(scale * x for x in pos)) for z, pos in atoms])


def read_geometry(path) -> Geometry:
    with open(path) as f:
        return parse_geometry(f.read())


def hydrogen_chain(n: int, r: float) -> Geometry:
    """Linear chain of ``n`` H atoms with spacing ``r`` bohr along z."""
    return Geometry([(1.0, (0.0, 0.0, i * r)) for i in range(n)])


def h4_model(alpha: float, a: float = 2.0) -> Geometry:
    """The trapezoidal H4 model.

    Two H2 units with bond length ``a`` sit on parallel lines; the inner
    atoms are ``a`` apart and the outer ones are rotated by ``alpha * pi``.
    ``alpha = 0`` gives a square, ``alpha = 0.5`` a linear chain.
    """
    s, c = math.sin(alpha * math.pi), math.cos(alpha * math.pi)
    return Geometry([
        (1.0, (-a / 2 - a * s, a * c, 0.0)),
        (1.0, (-a / 2, 0.0, 0.0)),
        (1.0, (a / 2, 0.0, 0.0)),
        (1.0, (a / 2 + a * s, a * c, 0.0)),
    ])


_NAMED = [
    (re.compile(r"^h4_a(?P<v>[0-9.]+)$"), lambda m: h4_model(float(m["v"]))),
    (re.compile(r"^h(?P<n>\d+)_r(?P<v>[0-9.]+)$"),
     lambda m: hydrogen_chain(int(m["n"]), float(m["v"]))),
]


def named_geometry(name: str) -> Geometry:
    """Built-in systems: ``h4_a<alpha>`` (H4 model), ``h<n>_r<R>`` (chain)."""
    for pattern, make in _NAMED:
        m = pattern.match(name.lower())
        if m:
            return make(m)
    raise GeometryError(f"unknown built-in geometry {name!r}")


def load_geometry(spec: str) -> Geometry:
    """Resolve a built-in name or a geometry file path."""
    try:
        return named_geometry(spec)
    except GeometryError:
        pass
    if not Path(spec).is_file():
        raise GeometryError(f"{spec!r} is neither a built-in geometry nor a geometry file")
    return read_geometry(spec)
