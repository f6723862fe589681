"""Benchmark presets: system, CC model, reference energy and SES columns.

Used by ``sescc verify-all --table NAME`` and the acceptance tests.  FCIDUMP
systems name a file that must be supplied with ``--fcidump``.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TablePreset:
    name: str
    system: str            # named geometry or "fcidump"
    model: str
    reference: float       # benchmark energy, 6 decimals
    specs: tuple[str, ...]


_CCSD_H4 = ("R=2;S=3", "R=1;S=3", "R=2;S=4", "R=2;S=3,4", "R=1,2;S=3")
_CCSD_H6 = ("R=3;S=4", "R=2;S=4", "R=1;S=6", "R=1;S=4,5", "R=3;S=4,5,6")

PRESETS = {p.name: p for p in [
    TablePreset("h4_a0.005", "h4_a0.005", "ccsd", -1.946325, _CCSD_H4),
    TablePreset("h4_a0.5", "h4_a0.5", "ccsd", -2.151004, _CCSD_H4),
    TablePreset("h6_r2.0", "h6_r2.0", "ccsd", -3.217277, _CCSD_H6),
    TablePreset("h6_r3.0", "h6_r3.0", "ccsd", -2.967326, _CCSD_H6),
    TablePreset("spin_h4", "h4_a0.005", "ccsd", -1.946325, ("R=1a;S=3a",)),
    TablePreset("spin_h6", "h6_r2.0", "ccsd", -3.217277, ("R=3a;S=5a",)),
    TablePreset("spin_li2", "fcidump", "ccsd", -14.667260, ("R=1a;S=4a",)),
    TablePreset("be", "fcidump", "ccsd", -14.613518, ("R=2;S=3", "R=2;S=3,4", "R=2;S=3,4,5", "R=2;S=3,9")),
    TablePreset("h6_ccsdtq", "h6_r2.0", "ccsdtq", -3.217699, ("R=2,3;S=4,5", "R=1,2;S=5,6", "R=3;S=4", "R=3;S=4,5")),
    TablePreset("h8_ccsdtq", "h8_r2.0", "ccsdtq", -4.286013, ("R=3,4;S=5,6", "R=1,2;S=7,8", "R=4;S=5", "R=4;S=5,6")),
]}
