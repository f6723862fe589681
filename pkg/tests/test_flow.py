import json

import numpy as np
import pytest

from sescc.ccsolver import model_excitation_set, residual_vector, solve_cc
from sescc.downfold import sub_system_vector, verify_theorem
from sescc.flow import (FlowConfig, FlowProblem, IntermediateNormalizationError, cluster_analysis, solve_flow,
                        union_excitations, write_trace)
from sescc.geometry import hydrogen_chain
from sescc.integrals import direct_sum_mo_integrals, rhf_mo_integrals
from sescc.opmatrix import AmplitudeSet, build_hamiltonian_matrix
from sescc.ses import SESSpec, internal_excitations, internal_space

from conftest import system

PAIRS = [("R=2;S=3", "R=1;S=4"), ("R=1,2;S=3", "R=2;S=4"), ("R=2;S=3,4", "R=1;S=3")]


def test_reference_only_vector_gives_no_amplitudes():
    mo, _, H = system("h4_a0.5")
    space = internal_space(SESSpec.parse("R=2;S=3"), H.basis)
    c = np.zeros(len(space))
    c[0] = 2.5
    assert len(cluster_analysis(c, space, H.basis)) == 0


@pytest.mark.parametrize("text", ["R=2;S=3", "R=1,2;S=3", "R=2;S=3,4", "R=1a,2b;S=3a,4b"])
def test_cluster_analysis_inverts_exponential(text):
    mo, _, H = system("h4_a0.5")
    spec = SESSpec.parse(text)
    space = internal_space(spec, H.basis)
    rng = np.random.default_rng(len(text))
    t = AmplitudeSet((ex, 0.3 * rng.normal()) for ex in internal_excitations(spec))
    c = sub_system_vector(H, t, space)
    back = cluster_analysis(-1.7 * c, space, H.basis)
    assert set(back) <= set(t)
    assert max(abs(back.get(ex, 0.0) - v) for ex, v in t.items()) < 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_cluster_analysis_of_arbitrary_vector(seed):
    """Any vector with a reference component is exp(T)|Phi> for some internal T."""
    mo, _, H = system("h4_a0.5")
    spec = SESSpec.parse("R=1,2;S=3,4")
    space = internal_space(spec, H.basis)
    c = np.random.default_rng(seed).normal(size=len(space))
    c[0] = 1.0 + abs(c[0])
    t = cluster_analysis(c, space, H.basis)
    np.testing.assert_allclose(sub_system_vector(H, t, space), c / c[0], atol=1e-10)


def test_cluster_analysis_errors():
    mo, _, H = system("h4_a0.5")
    space = internal_space(SESSpec.parse("R=2;S=3"), H.basis)
    with pytest.raises(IntermediateNormalizationError):
        cluster_analysis(np.array([0.0, 1.0, 0.0, 0.0]), space, H.basis)
    with pytest.raises(IntermediateNormalizationError):
        cluster_analysis(np.array([1.0, 0.5j, 0.0, 0.0]), space, H.basis)
    with pytest.raises(ValueError):
        cluster_analysis(np.ones(4), space[::-1], H.basis)


@pytest.mark.parametrize("pair", PAIRS)
def test_two_ses_flow_solves_union_cc(pair):
    mo, _, H = system("h4_a0.005")
    specs = [SESSpec.parse(s) for s in pair]
    sol = solve_flow(FlowProblem(specs, mo), H=H)
    assert sol.converged and sol.spread < 1e-9
    union = union_excitations(specs)
    ref = solve_cc(mo, union, H=H)
    assert abs(sol.energy - ref.e_total) < 1e-7
    # the flow fixed point satisfies the union CC equations itself
    assert np.max(np.abs(residual_vector(H, sol.amplitudes, union))) < 10 * 1e-9


def test_flow_order_does_not_matter():
    mo, _, H = system("h4_a0.005")
    specs = [SESSpec.parse(s) for s in PAIRS[0]]
    fwd = solve_flow(FlowProblem(specs, mo), H=H)
    rev = solve_flow(FlowProblem(specs, mo, FlowConfig(reverse=True)), H=H)
    assert abs(fwd.energy - rev.energy) < 1e-9


@pytest.mark.parametrize("name,text", [("h4_a0.005", "R=1,2;S=3"), ("h4_a0.5", "R=2;S=3,4"),
                                       ("h6_r2.0", "R=3;S=4,5")])
def test_single_ses_flow_is_the_sub_system_eigenvalue(name, text):
    """One SES, no external amplitudes: the flow is a single diagonalisation."""
    mo, _, H = system(name)
    spec = SESSpec.parse(text)
    sol = solve_flow(FlowProblem([spec], mo), H=H)
    exset = union_excitations([spec])
    rep = verify_theorem(mo, exset, spec, H=H)
    assert sol.energy == rep.e_h
    assert abs(sol.energy - rep.e_cc) < 1e-8


def test_flow_separates_non_interacting_fragments():
    a = hydrogen_chain(2, 1.4)
    mono, _ = rhf_mo_integrals(a)
    e_mono = solve_cc(mono, model_excitation_set("ccsd", mono)).e_total
    dimer = direct_sum_mo_integrals([a, a.translated((1000.0, 0.0, 0.0))])
    frag = [0 if abs(dimer.g[p, 0, 0, p]) > 1e-6 else 1 for p in range(dimer.n_orb)]
    specs = []
    for f in (0, 1):
        occ = [p for p in range(dimer.n_alpha) if frag[p] == f]
        virt = [p for p in range(dimer.n_alpha, dimer.n_orb) if frag[p] == f]
        specs.append(SESSpec(tuple(occ), tuple(virt)))
    sol = solve_flow(FlowProblem(specs, dimer), H=build_hamiltonian_matrix(dimer))
    assert abs(sol.energy - 2 * e_mono) < 1e-8


def test_trace_written_as_json_lines(tmp_path):
    mo, _, H = system("h4_a0.005")
    sol = solve_flow(FlowProblem([SESSpec.parse(s) for s in PAIRS[0]], mo), H=H)
    write_trace(sol.trace, tmp_path / "trace.jsonl")
    records = [json.loads(line) for line in (tmp_path / "trace.jsonl").read_text().splitlines()]
    assert len(records) == 2 * sol.sweeps
    assert set(records[0]) == {"sweep", "spec", "eigenvalue", "amplitude_change", "ambiguous"}
    assert records[-1]["eigenvalue"] == sol.energy


def test_empty_flow_rejected():
    mo, _, H = system("h4_a0.5")
    with pytest.raises(ValueError):
        solve_flow(FlowProblem([], mo), H=H)
