"""Acceptance criteria.

Each test prints one ``PASS``/``FAIL`` line for its criterion; the lines are
collected again in the terminal summary (see ``conftest.py``).  Tolerances
are absolute, in hartree.  Run standalone with ``pytest tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest

from sescc.ccsolver import generate_excitation_set, model_excitation_set, residual_vector, solve_cc
from sescc.downfold import downfold, verify_theorem
from sescc.fcidump import read_fcidump, write_fcidump
from sescc.fock import apply_excitation, enumerate_basis
from sescc.flow import FlowProblem, solve_flow, union_excitations
from sescc.geometry import hydrogen_chain, named_geometry
from sescc.integrals import direct_sum_mo_integrals, rhf_mo_integrals
from sescc.opmatrix import (AmplitudeSet, build_cluster_matrix, build_hamiltonian_matrix, exp_nilpotent,
                            similarity_transform)
from sescc.ses import SESSpec, ses_census_ccsd, valid_orbital_ses
from sescc.tables import PRESETS

from conftest import DATA, random_mo
from test_fock import oracle_excitation
from test_opmatrix import oracle_hamiltonian
from test_ses import _branch_enumeration

REFERENCE_TOL = 1e-6
THEOREM_TOL = 1e-8

RESULTS = []


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _theorem(mo, H, model, specs):
    """Solve CC and downfold every spec; worst |e_h - e_cc| and residual."""
    sol = solve_cc(mo, model_excitation_set(model, mo), H=H)
    reports = [downfold(H, sol, SESSpec.parse(s)) for s in specs]
    err = max(r.energy_error for r in reports)
    res = max(r.eigvec_residual for r in reports)
    return sol, err, res


def _table(name, mo=None):
    """Run a preset from scratch; (energy, worst err, worst residual, seconds)."""
    preset = PRESETS[name]
    start = time.perf_counter()
    if mo is None:
        mo, _ = rhf_mo_integrals(named_geometry(preset.system))
    H = build_hamiltonian_matrix(mo)
    sol, err, res = _theorem(mo, H, preset.model, preset.specs)
    return preset, sol.e_total, err, res, time.perf_counter() - start


def _benchmark_check(n, name, mo=None, limit=None):
    preset, e, err, res, wall = _table(name, mo)
    ok = abs(e - preset.reference) <= REFERENCE_TOL and err <= THEOREM_TOL and res <= THEOREM_TOL
    detail = (f"{name} E={e:.7f} (ref {preset.reference:.6f}, dev {e - preset.reference:+.1e}); "
              f"{len(preset.specs)} SESs max|e_h-e_cc|={err:.1e} max residual={res:.1e}")
    if limit is not None:
        ok = ok and wall < limit
        detail += f"; {wall:.1f} s (limit {limit:.0f} s)"
    report(n, ok, detail)


def test_criterion_01_h6_ccsd_r2():
    _benchmark_check(1, "h6_r2.0", limit=60.0)


def test_criterion_02_h6_ccsd_r3():
    _benchmark_check(2, "h6_r3.0")


def test_criterion_03_h6_ccsdtq():
    _benchmark_check(3, "h6_ccsdtq")


@pytest.mark.slow
def test_criterion_04_h8_ccsdtq():
    _benchmark_check(4, "h8_ccsdtq", limit=600.0)


def test_criterion_05_one_electron_spin_orbital_ses():
    preset, e, err, res, _ = _table("spin_h6")
    ok = err <= THEOREM_TOL and abs(e - preset.reference) <= REFERENCE_TOL
    report(5, ok, f"H6 R=3a;S=5a |e_h-e_cc|={err:.1e} (E_CCSD {e:.7f})")


def test_criterion_06_h4_model():
    lines, ok = [], True
    for name in ("h4_a0.005", "h4_a0.5"):
        preset = PRESETS[name]
        mo, _ = rhf_mo_integrals(named_geometry(name))
        H = build_hamiltonian_matrix(mo)
        sol, err, res = _theorem(mo, H, "ccsd", preset.specs + PRESETS["spin_h4"].specs)
        ok = ok and err <= THEOREM_TOL and res <= THEOREM_TOL
        match = abs(sol.e_total - preset.reference) <= REFERENCE_TOL
        lines.append(f"{name} max|e_h-e_cc|={err:.1e}, E={sol.e_total:.7f} "
                     f"({'matches' if match else 'differs from'} {preset.reference:.6f})")
    report(6, ok, "; ".join(lines))


def test_criterion_07_fcidump(tmp_path):
    li2 = read_fcidump(DATA / "li2_sto3g.fcidump")
    be = read_fcidump(DATA / "be_631g.fcidump")
    _, e_li, err_li, res_li, _ = _table("spin_li2", li2)
    _, e_be, err_be, res_be, _ = _table("be", be)
    # the theorem needs no reference energy: every valid orbital SES of each file,
    # plus an FCIDUMP written here for a geometry outside the presets
    mo, _ = rhf_mo_integrals(hydrogen_chain(6, 2.5))
    write_fcidump(mo, tmp_path / "h6_r2.5.fcidump")
    n_ses, err_all = 0, 0.0
    for mo, sample in ((li2, 40), (be, None), (read_fcidump(tmp_path / "h6_r2.5.fcidump"), None)):
        specs = [str(s) for s in valid_orbital_ses(mo.n_alpha, mo.n_orb, model_excitation_set("ccsd", mo))]
        if sample:
            # Li2 has 409 SESs on a 14400-determinant space; the full sweep is a slow test
            specs = list(np.random.default_rng(0).choice(specs, sample, replace=False))
        _, err, res = _theorem(mo, build_hamiltonian_matrix(mo), "ccsd", specs)
        n_ses += len(specs)
        err_all = max(err_all, err, res)
    ok = (abs(e_li - PRESETS["spin_li2"].reference) <= REFERENCE_TOL and abs(e_be - PRESETS["be"].reference) <= REFERENCE_TOL
          and max(err_li, err_be, res_li, res_be, err_all) <= THEOREM_TOL)
    report(7, ok, f"Li2 E={e_li:.7f} err={err_li:.1e}; Be E={e_be:.7f} max err={err_be:.1e}; "
                  f"{n_ses} orbital SESs of three FCIDUMPs max err/residual={err_all:.1e}")


def test_criterion_08_census():
    bad = []
    for n_o in range(1, 7):
        for n_v in range(1, 7):
            distinct = len(valid_orbital_ses(n_o, n_o + n_v, generate_excitation_set(2, n_o + n_v, n_o)))
            if (ses_census_ccsd(n_o, n_v) != _branch_enumeration(n_o, n_v)
                    or distinct != ses_census_ccsd(n_o, n_v) - n_o * n_v):
                bad.append((n_o, n_v))
    ok = not bad and ses_census_ccsd(3, 3) == 42
    report(8, ok, f"formula vs enumeration over 36 (n_o, n_v) pairs, mismatches {bad}; (3,3) -> {ses_census_ccsd(3, 3)}")


def test_criterion_09_full_rank_cc_is_fci():
    worst = 0.0
    for name in ("h2_r1.4", "h4_a0.005", "h4_a0.5"):
        mo, _ = rhf_mo_integrals(named_geometry(name))
        H = build_hamiltonian_matrix(mo)
        sol = solve_cc(mo, model_excitation_set("fci", mo), H=H)
        worst = max(worst, abs(sol.e_total - np.linalg.eigvalsh(H.dense())[0]))
    report(9, worst <= 1e-9, f"H2, H4 (two geometries) max|E_CC(full rank) - E_FCI|={worst:.1e}")


def test_criterion_10_non_interacting_limit():
    a = hydrogen_chain(2, 1.4)
    mono, _ = rhf_mo_integrals(a)
    e_mono = solve_cc(mono, model_excitation_set("ccsd", mono)).e_total
    dimer = direct_sum_mo_integrals([a, a.translated((1000.0, 0.0, 0.0))])
    H = build_hamiltonian_matrix(dimer)
    sol = solve_cc(dimer, model_excitation_set("ccsd", dimer), H=H)
    frag = [0 if abs(dimer.g[p, 0, 0, p]) > 1e-6 else 1 for p in range(dimer.n_orb)]

    def owner(ex):
        owners = {frag[p >> 1] for p in ex.holes + ex.particles}
        return owners.pop() if len(owners) == 1 else None

    local = AmplitudeSet((ex, v) for ex, v in sol.amplitudes.items() if owner(ex) is not None)
    cross = 0.0
    for f in (0, 1):
        mine = [ex for ex in sol.excitations if owner(ex) == f]
        t_f = AmplitudeSet((ex, v) for ex, v in local.items() if owner(ex) == f)
        cross = max(cross, np.max(np.abs(residual_vector(H, t_f, mine) - residual_vector(H, local, mine))))
    additivity = abs(sol.e_total - 2 * e_mono)
    report(10, additivity <= 1e-8 and cross <= 1e-10,
           f"|E(dimer) - 2 E(H2)|={additivity:.1e}; other-fragment contribution to local residuals {cross:.1e}")


def test_criterion_11_flow():
    mo, _ = rhf_mo_integrals(named_geometry("h4_a0.005"))
    H = build_hamiltonian_matrix(mo)
    specs = [SESSpec.parse("R=2;S=3"), SESSpec.parse("R=1;S=4")]
    flow = solve_flow(FlowProblem(specs, mo), H=H)
    union = solve_cc(mo, union_excitations(specs), H=H)
    dev = abs(flow.energy - union.e_total)
    single = SESSpec.parse("R=1,2;S=3")
    one = solve_flow(FlowProblem([single], mo), H=H)
    rep = verify_theorem(mo, union_excitations([single]), single, H=H)
    report(11, dev <= 1e-7 and one.energy == rep.e_h,
           f"two-SES flow vs union CC {dev:.1e} ({flow.sweeps} sweeps); single-SES flow "
           f"{'==' if one.energy == rep.e_h else '!='} verify_theorem ({one.energy:.12f})")


def test_criterion_12_property_suites():
    rng = np.random.default_rng(12)
    # exponential round trip
    round_trip = 0.0
    for n_orb, n_el, rank in [(4, 2, 2), (4, 2, 4), (3, 1, 2)]:
        basis = enumerate_basis(n_orb, n_el, n_el)
        exs = generate_excitation_set(rank, n_orb, n_el)
        for _ in range(5):
            T = build_cluster_matrix(AmplitudeSet((ex, 0.3 * rng.normal()) for ex in exs), basis)
            prod = exp_nilpotent(T).data @ exp_nilpotent(T, -1.0).data
            round_trip = max(round_trip, np.max(np.abs(prod - np.eye(len(basis)))))
    # similarity transform keeps the spectrum
    mo, _ = rhf_mo_integrals(named_geometry("h4_a0.5"))
    H = build_hamiltonian_matrix(mo)
    exs = generate_excitation_set(2, 4, 2)
    T = build_cluster_matrix(AmplitudeSet((ex, 0.1 * rng.normal()) for ex in exs), H.basis)
    w = np.linalg.eigvals(similarity_transform(H, T).data)
    spectrum = max(np.max(np.abs(w.imag)),
                   np.max(np.abs(np.sort(w.real) - np.linalg.eigvalsh(H.dense()))))
    # phases against the creation-string oracle, every determinant and excitation on <= 4 orbitals
    phase_bad = 0
    for n_orb, n_a, n_b in [(2, 1, 1), (3, 2, 1), (4, 2, 2), (4, 1, 3)]:
        basis = enumerate_basis(n_orb, n_a, n_b)
        for ex in generate_excitation_set(min(n_a + n_b, 4), n_orb, n_a, n_b):
            for det in basis.determinants:
                got = apply_excitation(det, ex)
                want = oracle_excitation(det.occupied(), ex)
                if (got is None) != (want is None) or (got and (list(got[0].occupied()), got[1]) != tuple(want)):
                    phase_bad += 1
    # Hamiltonian against the literal second-quantised sum
    ham = 0.0
    for n_orb, n_el, ms2, seed in [(2, 2, 0, 0), (3, 3, 1, 1), (4, 4, 0, 3)]:
        m = random_mo(n_orb, n_el, seed, ms2)
        basis = enumerate_basis(n_orb, m.n_alpha, m.n_beta)
        ham = max(ham, np.max(np.abs(build_hamiltonian_matrix(m, basis).dense() - oracle_hamiltonian(m, basis))))
    ok = round_trip <= 1e-12 and spectrum <= 1e-9 and phase_bad == 0 and ham <= 1e-12
    report(12, ok, f"e^T e^-T - I {round_trip:.1e}; spectrum {spectrum:.1e}; "
                   f"phase mismatches {phase_bad}; Hamiltonian oracle {ham:.1e}")
