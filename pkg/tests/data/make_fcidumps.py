"""Regenerate the third-party FCIDUMP fixtures used by the FCIDUMP-path tests.

Requires pyscf (not a dependency of the package). Run from this directory:

    python make_fcidumps.py
"""
from pyscf import gto, scf
from pyscf.tools import fcidump


def dump(atom, basis, unit, path):
    mol = gto.M(atom=atom, basis=basis, unit=unit, verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    fcidump.from_scf(mf, path)
    print(path, mf.e_tot)


if __name__ == "__main__":
    dump("Li 0 0 0; Li 0 0 2.673", "sto-3g", "A", "li2_sto3g.fcidump")
    dump("Be 0 0 0", "6-31g", "A", "be_631g.fcidump")
