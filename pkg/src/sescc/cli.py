"""Command-line front end.

Every command builds a :class:`RunConfig`, runs, and returns an exit code
plus a result document (JSON).  The document embeds the config, so
``sescc rerun doc.json`` repeats the calculation and compares energies.

Exit codes: 0 success, 1 convergence failure or failed check, 2 input error.
"""
from __future__ import annotations

import argparse
import functools
import json
import logging
import platform
import random
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .ccsolver import CCConfig, CCConvergenceError, model_excitation_set, read_excitation_list, solve_cc, write_amplitudes
from .downfold import EigenSolverError, InvalidSESError, build_heff, downfold
from .fcidump import FCIDUMPError, read_fcidump, write_fcidump
from .flow import FlowConfig, FlowConvergenceError, FlowProblem, IntermediateNormalizationError, solve_flow, write_trace
from .geometry import GeometryError, load_geometry
from .integrals import SCFConfig, SCFConvergenceError, UnsupportedBasisError, rhf_mo_integrals
from .opmatrix import build_hamiltonian_matrix, dump_matrix
from .ses import SESError, SESSpec, partition_amplitudes, ses_census_ccsd, valid_orbital_ses, validate_ses
from .tables import PRESETS

logger = logging.getLogger("sescc")

SCHEMA = "sescc.result/1"
RERUN_TOL = 1e-12

INPUT_ERRORS = (GeometryError, FCIDUMPError, SESError, InvalidSESError, UnsupportedBasisError,
                FileNotFoundError, IsADirectoryError, KeyError, ValueError)
CONVERGENCE_ERRORS = (SCFConvergenceError, CCConvergenceError, FlowConvergenceError,
                      EigenSolverError, IntermediateNormalizationError, ZeroDivisionError)


@dataclass
class RunConfig:
    command: str
    geometry: str | None = None
    fcidump: str | None = None
    basis: str = "sto-3g"
    model: str = "ccsd"
    ses: list[str] = field(default_factory=list)
    table: str | None = None
    scf_tol: float = 1e-10
    cc_tol: float = 1e-10
    flow_tol: float = 1e-9
    max_iter: int = 500
    diis_depth: int = 8
    tol: float = 1e-8
    sample: int | None = None
    seed: int = 0
    n_o: int | None = None
    n_v: int | None = None
    enumerate: bool = False

    def validate(self):
        for name in ("scf_tol", "cc_tol", "flow_tol", "tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1 or self.diis_depth < 1:
            raise ValueError("max_iter and diis_depth must be at least 1")
        if self.table is not None and self.table not in PRESETS:
            raise ValueError(f"unknown table {self.table!r}; choose from {', '.join(PRESETS)}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        return cls(**data)


# --- system setup -------------------------------------------------------------

def _apply_table(cfg: RunConfig):
    preset = PRESETS[cfg.table]
    if preset.system == "fcidump":
        if not cfg.fcidump:
            raise ValueError(f"table {preset.name} needs --fcidump")
    elif not cfg.geometry and not cfg.fcidump:
        cfg.geometry = preset.system
    cfg.model = preset.model
    if not cfg.ses:
        cfg.ses = list(preset.specs)
    return preset


def _load_system(cfg: RunConfig):
    """MO integrals plus a description of their origin."""
    if bool(cfg.geometry) == bool(cfg.fcidump):
        raise ValueError("give exactly one of --geom or --fcidump")
    if cfg.fcidump:
        mo = read_fcidump(cfg.fcidump)
        return mo, None, {"source": "fcidump", "path": cfg.fcidump}
    geom = load_geometry(cfg.geometry)
    scf = SCFConfig(scf_tol=cfg.scf_tol, max_iter=cfg.max_iter, diis_depth=cfg.diis_depth)
    mo, rhf = rhf_mo_integrals(geom, cfg.basis, scf)
    return mo, rhf, {"source": "geometry", "geometry": cfg.geometry, "basis": cfg.basis}


def _exset(cfg: RunConfig, mo):
    if cfg.model.startswith("custom:"):
        return read_excitation_list(cfg.model[len("custom:"):])
    return model_excitation_set(cfg.model, mo)


def _cc_config(cfg: RunConfig) -> CCConfig:
    return CCConfig(cc_tol=cfg.cc_tol, max_iter=cfg.max_iter, diis_depth=cfg.diis_depth)


def _system_block(mo, info):
    return dict(info, fingerprint=mo.fingerprint(), n_orb=mo.n_orb, n_elec=mo.n_elec, ms2=mo.ms2)


def _report_dict(rep):
    d = rep.to_dict()
    d.pop("wall_time")
    return d


# --- commands -----------------------------------------------------------------

def run_scf(cfg, timings, jobs=1):
    if not cfg.geometry:
        raise ValueError("scf needs --geom")
    t0 = time.perf_counter()
    mo, rhf, info = _load_system(cfg)
    timings["scf"] = time.perf_counter() - t0
    print(f"E(RHF) = {rhf.e_rhf:.10f}  ({rhf.iterations} iterations)")
    return 0, {"system": _system_block(mo, info),
               "energies": {"e_rhf": rhf.e_rhf, "e_nuc": mo.e_nuc},
               "orbital_energies": [float(e) for e in rhf.orbital_energies],
               "iterations": rhf.iterations}


def _solve(cfg, timings):
    t0 = time.perf_counter()
    mo, rhf, info = _load_system(cfg)
    timings["integrals"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    H = build_hamiltonian_matrix(mo)
    timings["hamiltonian"] = time.perf_counter() - t0
    exset = _exset(cfg, mo)
    t0 = time.perf_counter()
    sol = solve_cc(mo, exset, _cc_config(cfg), H=H)
    timings["cc"] = time.perf_counter() - t0
    print(f"{exset.descriptor}: {len(exset)} excitations, Fock-space dimension {len(H.basis)}")
    if rhf is not None:
        print(f"E(RHF) = {rhf.e_rhf:.10f}")
    print(f"E(CC)  = {sol.e_total:.10f}  ({sol.iterations} iterations, max|r| {sol.residual_norm:.1e})")
    energies = {"e_ref": sol.e_ref, "e_cc": sol.e_total, "e_corr": sol.e_corr}
    if rhf is not None:
        energies["e_rhf"] = rhf.e_rhf
    doc = {"system": _system_block(mo, info), "energies": energies,
           "cc": {"model": exset.descriptor, "n_amplitudes": len(exset),
                  "iterations": sol.iterations, "residual": sol.residual_norm}}
    return mo, H, exset, sol, doc


def run_cc(cfg, timings, jobs=1, amplitudes=None):
    mo, H, exset, sol, doc = _solve(cfg, timings)
    if amplitudes:
        write_amplitudes(amplitudes, sol.amplitudes, mo.fingerprint(), H.basis)
    return 0, doc


def _specs(cfg, mo, exset):
    if cfg.ses:
        specs = [SESSpec.parse(s) for s in cfg.ses]
    else:
        if mo.n_alpha != mo.n_beta:
            raise ValueError("automatic SES enumeration needs a closed-shell reference; pass --ses")
        specs = [SESSpec()] + valid_orbital_ses(mo.n_alpha, mo.n_orb, exset)
    for spec in specs:
        spec.check_range(mo.n_orb, mo.n_alpha, mo.n_beta)
        if not validate_ses(spec, exset):
            raise InvalidSESError(f"{spec} is not a valid SES for {exset.descriptor}")
    if cfg.sample is not None and cfg.sample < len(specs):
        keep = sorted(random.Random(cfg.seed).sample(range(len(specs)), cfg.sample))
        specs = [specs[k] for k in keep]
    return specs


def _downfold_all(H, sol, specs, jobs, timings):
    t0 = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(lambda s: downfold(H, sol, s), specs))
    else:
        reports = [downfold(H, sol, s) for s in specs]
    timings["downfold"] = time.perf_counter() - t0
    timings["downfold_per_ses"] = {r.spec: r.wall_time for r in reports}
    return reports


def _print_table(title, e_cc, reports, tol):
    print(f"\n{title}   E_CC = {e_cc:.6f}")
    print(f"{'SES':<24}{'dim':>6}{'E(h)':>16}{'|E(h)-E_CC|':>14}{'residual':>11}  ok")
    for r in reports:
        ok = r.energy_error <= tol and r.eigvec_residual <= tol
        print(f"{r.spec:<24}{r.dim:>6}{r.e_h:>16.8f}{r.energy_error:>14.1e}{r.eigvec_residual:>11.1e}  "
              f"{'yes' if ok else 'NO'}")


def run_downfold(cfg, timings, jobs=1, dump_dir=None):
    if not cfg.ses:
        raise ValueError("downfold needs at least one --ses")
    mo, H, exset, sol, doc = _solve(cfg, timings)
    specs = _specs(cfg, mo, exset)
    reports = _downfold_all(H, sol, specs, jobs, timings)
    _print_table(exset.descriptor, sol.e_total, reports, cfg.tol)
    if dump_dir:
        Path(dump_dir).mkdir(parents=True, exist_ok=True)
        for n, spec in enumerate(specs):
            heff = build_heff(H, partition_amplitudes(sol.amplitudes, spec).t_ext, spec)
            dump_matrix(heff.matrix, Path(dump_dir) / f"heff_{n}.txt")
    doc["downfold"] = [_report_dict(r) for r in reports]
    return 0, doc


def run_verify_all(cfg, timings, jobs=1):
    preset = _apply_table(cfg) if cfg.table else None
    mo, H, exset, sol, doc = _solve(cfg, timings)
    specs = _specs(cfg, mo, exset)
    reports = _downfold_all(H, sol, specs, jobs, timings)
    _print_table(preset.name if preset else exset.descriptor, sol.e_total, reports, cfg.tol)
    failed = [r.spec for r in reports if not (r.energy_error <= cfg.tol and r.eigvec_residual <= cfg.tol)]
    doc["downfold"] = [_report_dict(r) for r in reports]
    doc["verify"] = {"n_ses": len(reports), "n_failed": len(failed), "failed": failed, "tol": cfg.tol}
    if preset:
        doc["verify"]["reference_energy"] = preset.reference
        doc["verify"]["reference_deviation"] = sol.e_total - preset.reference
        print(f"reference {preset.reference:.6f}, deviation {sol.e_total - preset.reference:+.1e}")
    print(f"{len(reports) - len(failed)}/{len(reports)} SESs pass")
    if failed:
        print("failing SESs: " + ", ".join(failed), file=sys.stderr)
        return 1, doc
    return 0, doc


def run_census(cfg, timings, jobs=1):
    if cfg.n_o is None or cfg.n_v is None:
        raise ValueError("census needs --no and --nv")
    formula = ses_census_ccsd(cfg.n_o, cfg.n_v)
    distinct = ses_census_ccsd(cfg.n_o, cfg.n_v, "distinct")
    print(formula)
    out = {"formula": formula, "distinct": distinct}
    if cfg.enumerate:
        # orbital SESs of CCSD: |R| = 1 or |S| = 1
        from itertools import combinations
        occ, virt = range(cfg.n_o), range(cfg.n_o, cfg.n_o + cfg.n_v)
        subsets = lambda xs: [c for k in range(1, len(xs) + 1) for c in combinations(xs, k)]
        out["enumerated"] = sum(1 for R in subsets(occ) for S in subsets(virt) if len(R) == 1 or len(S) == 1)
        print(f"distinct (R, S) pairs by enumeration: {out['enumerated']}")
    return 0, {"census": out}


def run_flow(cfg, timings, jobs=1, trace_path=None):
    if not cfg.ses:
        raise ValueError("flow needs at least one --ses")
    t0 = time.perf_counter()
    mo, rhf, info = _load_system(cfg)
    H = build_hamiltonian_matrix(mo)
    specs = [SESSpec.parse(s) for s in cfg.ses]
    timings["setup"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    sol = solve_flow(FlowProblem(specs, mo, FlowConfig(flow_tol=cfg.flow_tol, max_sweeps=cfg.max_iter)), H=H)
    timings["flow"] = time.perf_counter() - t0
    if trace_path:
        write_trace(sol.trace, trace_path)
    print(f"flow converged in {sol.sweeps} sweeps: E = {sol.energy:.10f} (spread {sol.spread:.1e})")
    for spec, e in zip(cfg.ses, sol.eigenvalues):
        print(f"  {spec:<22}{e:.10f}")
    return 0, {"system": _system_block(mo, info),
               "energies": {"e_flow": sol.energy},
               "flow": {"specs": [str(s) for s in specs], "eigenvalues": sol.eigenvalues,
                        "sweeps": sol.sweeps, "n_amplitudes": len(sol.amplitudes), "trace": sol.trace}}


def run_fcidump(cfg, timings, jobs=1, out=None):
    t0 = time.perf_counter()
    mo, rhf, info = _load_system(cfg)
    timings["integrals"] = time.perf_counter() - t0
    if out:
        write_fcidump(mo, out)
        print(f"wrote {out}")
    print(f"n_orb = {mo.n_orb}, n_elec = {mo.n_elec}, ms2 = {mo.ms2}, e_nuc = {mo.e_nuc:.10f}")
    doc = {"system": _system_block(mo, info), "energies": {"e_nuc": mo.e_nuc}}
    if rhf is not None:
        doc["energies"]["e_rhf"] = rhf.e_rhf
    return 0, doc


COMMANDS = {"scf": run_scf, "cc": run_cc, "downfold": run_downfold, "census": run_census,
            "flow": run_flow, "fcidump": run_fcidump, "verify-all": run_verify_all}


def execute(cfg: RunConfig, jobs: int = 1, **extra) -> tuple[int, dict]:
    """Run one command and assemble its result document."""
    cfg.validate()
    timings = {}
    start = time.perf_counter()
    code, body = COMMANDS[cfg.command](cfg, timings, jobs, **extra)
    timings["total"] = time.perf_counter() - start
    doc = {"schema": SCHEMA, "command": cfg.command, "config": asdict(cfg),
           "status": "ok" if code == 0 else "failed",
           "versions": {"sescc": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                        "python": platform.python_version()},
           "timings": timings}
    doc.update(body)
    return code, doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _energies(doc):
    out = dict(doc.get("energies", {}))
    for rep in doc.get("downfold", []):
        out[f"e_h[{rep['spec']}]"] = rep["e_h"]
    for n, e in enumerate(doc.get("flow", {}).get("eigenvalues", [])):
        out[f"flow[{n}]"] = e
    return out


def rerun(path, jobs=1) -> tuple[int, dict, float]:
    """Repeat the calculation embedded in a result document; max energy deviation."""
    with open(path) as f:
        old = json.load(f)
    if old.get("schema") != SCHEMA:
        raise ValueError(f"{path} is not a sescc result document")
    code, new = execute(RunConfig.from_dict(old["config"]), jobs)
    a, b = _energies(old), _energies(new)
    if set(a) != set(b):
        raise ValueError("rerun produced a different set of energies")
    dev = max((abs(a[k] - b[k]) for k in a), default=0.0)
    return code, new, dev


# --- argument parsing ---------------------------------------------------------

def _add_system(p, model=True):
    p.add_argument("--geom", dest="geometry", help="built-in name (h6_r2.0, h4_a0.005) or geometry file")
    p.add_argument("--fcidump", help="FCIDUMP file with MO integrals")
    p.add_argument("--basis", default="sto-3g")
    p.add_argument("--scf-tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--diis-depth", type=int, default=8)
    if model:
        p.add_argument("--model", default="ccsd", help="ccsd|ccsdt|ccsdtq|fci|rank=k|custom:FILE")
        p.add_argument("--cc-tol", type=float, default=1e-10)


def build_parser() -> argparse.ArgumentParser:
    def common(suppress):
        p = argparse.ArgumentParser(add_help=False)
        kw = {"default": argparse.SUPPRESS} if suppress else {}
        p.add_argument("-v", "--verbose", action="count", **(kw or {"default": 0}))
        p.add_argument("-o", "--output", help="write the result document here ('-' for stdout)", **kw)
        p.add_argument("--jobs", type=int, help="parallel SES evaluations", **(kw or {"default": 1}))
        return p

    ap = argparse.ArgumentParser(prog="sescc", description="Coupled cluster and SES downfolding workbench",
                                 parents=[common(False)])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser = functools.partial(sub.add_parser, parents=[common(True)])

    p = sub.add_parser("scf", help="RHF for a geometry")
    _add_system(p, model=False)

    p = sub.add_parser("cc", help="solve the CC equations")
    _add_system(p)
    p.add_argument("--write-amplitudes", metavar="FILE")

    p = sub.add_parser("downfold", help="SES effective Hamiltonians for a CC solution")
    _add_system(p)
    p.add_argument("--ses", action="append", default=[], help='e.g. "R=2;S=3,4" or "R=1a;S=3a"')
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--dump-heff", metavar="DIR", help="write each effective Hamiltonian as triplets")

    p = sub.add_parser("verify-all", help="check the CC energy against every SES eigenvalue")
    _add_system(p)
    p.add_argument("--ses", action="append", default=[], help="restrict to these SESs")
    p.add_argument("--table", choices=sorted(PRESETS), help="benchmark preset")
    p.add_argument("--sample", type=int, help="random subset of this many SESs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("census", help="count CCSD SESs")
    p.add_argument("--no", dest="n_o", type=int, required=True)
    p.add_argument("--nv", dest="n_v", type=int, required=True)
    p.add_argument("--enumerate", action="store_true")

    p = sub.add_parser("flow", help="solve coupled SES eigenproblems")
    _add_system(p, model=False)
    p.add_argument("--ses", action="append", default=[])
    p.add_argument("--flow-tol", type=float, default=1e-9)
    p.add_argument("--trace", metavar="FILE", help="JSON-lines sweep trace")

    p = sub.add_parser("fcidump", help="write or inspect an FCIDUMP")
    _add_system(p, model=False)
    p.add_argument("--out", metavar="FILE")

    p = sub.add_parser("rerun", help="repeat a result document's calculation")
    p.add_argument("document")
    return ap


_EXTRA = {"cc": {"write_amplitudes": "amplitudes"}, "downfold": {"dump_heff": "dump_dir"},
          "flow": {"trace": "trace_path"}, "fcidump": {"out": "out"}}


def _config_from_args(args) -> tuple[RunConfig, dict]:
    names = {f.name for f in fields(RunConfig)}
    values = {k: v for k, v in vars(args).items() if k in names}
    extra = {dst: getattr(args, src) for src, dst in _EXTRA.get(args.command, {}).items()}
    return RunConfig(**values), extra


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        ap.error("--jobs must be at least 1")
    try:
        if args.command == "rerun":
            code, doc, dev = rerun(args.document, args.jobs)
            ok = dev <= RERUN_TOL
            print(f"max energy deviation {dev:.1e} ({'reproduced' if ok else 'NOT reproduced'})")
            code = code or (0 if ok else 1)
        else:
            cfg, extra = _config_from_args(args)
            code, doc = execute(cfg, args.jobs, **extra)
    except CONVERGENCE_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except INPUT_ERRORS as err:
        msg = err.args[0] if isinstance(err, KeyError) and err.args else err
        print(f"error: {msg}", file=sys.stderr)
        return 2
    if args.output == "-":
        sys.stdout.write(dumps(doc))
    elif args.output:
        Path(args.output).write_text(dumps(doc))
    return code


if __name__ == "__main__":
    sys.exit(main())
