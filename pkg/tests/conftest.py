import functools
from pathlib import Path

import numpy as np
import pytest

from sescc.ccsolver import model_excitation_set, solve_cc
from sescc.fcidump import read_fcidump
from sescc.geometry import named_geometry
from sescc.integrals import MOIntegrals, rhf_mo_integrals
from sescc.opmatrix import build_hamiltonian_matrix

DATA = Path(__file__).parent / "data"


@functools.lru_cache(maxsize=None)
def system(name):
    """(mo, rhf, H) for a built-in geometry name or an FCIDUMP in tests/data."""
    if name.endswith(".fcidump"):
        mo, rhf = read_fcidump(DATA / name), None
    else:
        mo, rhf = rhf_mo_integrals(named_geometry(name))
    return mo, rhf, build_hamiltonian_matrix(mo)


@functools.lru_cache(maxsize=None)
def cc(name, model="ccsd"):
    mo, _, H = system(name)
    return solve_cc(mo, model_excitation_set(model, mo), H=H)


def random_mo(n_orb, n_elec, seed, ms2=0):
    """Random real integrals with full 8-fold symmetry."""
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n_orb, n_orb))
    h = h + h.T
    g = np.zeros((n_orb,) * 4)
    values = {}
    for idx in np.ndindex(*g.shape):
        p, q, r, s = idx
        pq, rs = (max(p, q), min(p, q)), (max(r, s), min(r, s))
        key = max(pq, rs) + min(pq, rs)
        if key not in values:
            values[key] = 0.2 * rng.normal()
        g[idx] = values[key]
    return MOIntegrals(h=h, g=g, e_nuc=rng.uniform(0, 2), n_elec=n_elec, ms2=ms2,
                       orbital_energies=np.arange(n_orb, dtype=float))


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)
