"""Orchestration shared by the CLI subcommands: load, solve, analyze, scan."""

from __future__ import annotations

import json
import os
import re
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import (
    NEAR_DEGENERATE_GAP,
    AnalysisReport,
    DegenerateEigenpairError,
    alpha_continuity,
    infsup_gamma,
    lipschitz_estimate,
    locality_radius,
    monotonicity_gamma,
    sigma_min_jacobian,
    spectral_gap_bound,
    theta,
    verify_sandwich,
)
from .cluster import build_norm_metric, ci_to_cc, get_excitation_table
from .config import RunConfig
from .determinants import enumerate_determinants
from .equations import (
    SolverOptions,
    amplitude_vnorm,
    cc_jacobian,
    cc_residual,
    newton_solve,
    similarity_transform,
)
from .hamiltonian import assemble, hf_energy, lowest_eigenvalues, solve_eigenpair
from .integrals import parse_fcidump, reorder_orbitals, spinify


@dataclass
class Problem:
    label: str
    path: str
    table_int: object
    ints: object
    space: object
    table: object
    hmat: object
    metadata: dict

    @property
    def n_electrons(self) -> int:
        return self.space.N


def load_problem(path: str, cfg: RunConfig) -> Problem:
    """Parse an FCIDUMP file and assemble everything the commands need."""
    table_int = parse_fcidump(path)
    if cfg.occupation:
        table_int = reorder_orbitals(table_int, list(cfg.occupation))
    ints = spinify(table_int)
    ms2 = cfg.resolved_sector(table_int.ms2)
    space = enumerate_determinants(ints.K, table_int.nelec, ms2)
    table = get_excitation_table(space, cfg.resolved_convention())
    hmat = assemble(space, ints)
    metadata = {}
    meta_path = os.path.splitext(path)[0] + ".json"
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            metadata = json.load(fh)
    label = metadata.get("label") or os.path.splitext(os.path.basename(path))[0]
    return Problem(label=label, path=path, table_int=table_int, ints=ints,
                   space=space, table=table, hmat=hmat, metadata=metadata)


def active_set(problem: Problem, rank: int | None):
    table = problem.table
    if rank is None:
        return table.excitations
    return tuple(table.excitations[i] for i in table.rank_positions(rank))


def _solver_options(cfg: RunConfig) -> SolverOptions:
    return SolverOptions(tol=cfg.tol, max_iter=cfg.max_iter,
                         seed=cfg.seed_mode, shift=cfg.shift)


def _finite(x) -> float:
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("refusing to emit a non-finite number")
    return x


def _fmt(x) -> str:
    return f"{_finite(x):.12e}"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def solve_problem(problem: Problem, cfg: RunConfig) -> dict:
    """Newton solve over the configured index set; returns the artifact dict."""
    eig = solve_eigenpair(problem.hmat, which=cfg.resolved_eigenpair())
    metric = build_norm_metric(problem.hmat, eig.energy, cfg.shift)
    active = active_set(problem, cfg.rank)
    t0 = None
    which = cfg.resolved_eigenpair()
    if which != "lowest" and which != 0:
        # excited zeros: oracle-seeded from the selected eigenvector
        # (verification mode; requires the full index set)
        seed = ci_to_cc(eig.vector, problem.table)
        t0 = seed
        active = problem.table.excitations
    tstar, trace = newton_solve(problem.hmat, problem.table, active,
                                t0=t0, opts=_solver_options(cfg), metric=metric)
    res = cc_residual(tstar, problem.hmat, problem.table)
    e_hf = hf_energy(problem.hmat)
    e_fci = eig.total
    e_cc = res.energy + problem.hmat.e_core
    # zeros are not globally unique, so also report the distance to the
    # nearest eigenvalue among the lowest few instead of presuming the
    # targeted one was reached
    spectrum = lowest_eigenvalues(problem.hmat, n=6)
    nearest = float(np.min(np.abs(spectrum - res.energy)))
    return {
        "label": problem.label,
        "rank": cfg.rank,
        "amplitudes": tstar,
        "trace": trace,
        "metric_weights": metric,
        "energies": {
            "e_hf_total": e_hf,
            "e_fci_total": e_fci,
            "e_cc_total": e_cc,
            "hf_error": e_hf - e_fci,
            "cc_error": e_cc - e_fci,
            "nearest_eigenvalue_error": nearest,
        },
    }


def write_solve_artifacts(result: dict, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    label = result["label"]
    paths = []
    amp_path = os.path.join(out_dir, f"{label}_amplitudes.json")
    _atomic_write(amp_path, result["amplitudes"].to_json())
    paths.append(amp_path)
    trace_path = os.path.join(out_dir, f"{label}_trace.json")
    _atomic_write(trace_path, json.dumps(result["trace"].to_dict(), indent=1, sort_keys=True))
    paths.append(trace_path)
    e = result["energies"]
    rank = result["rank"]
    header = ["label", "rank", "e_hf_total", "e_fci_total", "e_cc_total",
              "hf_error", "cc_error", "nearest_eigenvalue_error", "ccsd_error"]
    ccsd_err = e["cc_error"] if rank == 2 else ""
    row = [label, "full" if rank is None else str(rank),
           _fmt(e["e_hf_total"]), _fmt(e["e_fci_total"]), _fmt(e["e_cc_total"]),
           _fmt(e["hf_error"]), _fmt(e["cc_error"]),
           _fmt(e["nearest_eigenvalue_error"]),
           _fmt(ccsd_err) if ccsd_err != "" else ""]
    csv_path = os.path.join(out_dir, f"{label}_energies.csv")
    _atomic_write(csv_path, ",".join(header) + "\n" + ",".join(row) + "\n")
    paths.append(csv_path)
    return paths


def analyze_problem(problem: Problem, cfg: RunConfig) -> AnalysisReport:
    """Full constant/bound computation for one eigenpair of one input."""
    hmat, table = problem.hmat, problem.table
    eig = solve_eigenpair(hmat, which=cfg.resolved_eigenpair())
    if eig.degenerate:
        raise DegenerateEigenpairError(
            f"{problem.label}: gap {eig.gap:.3e} flags a non-simple eigenvalue")
    metric = build_norm_metric(hmat, eig.energy, cfg.shift)
    mu_w = metric.mu_weights(table)

    seed = ci_to_cc(eig.vector, table)
    tstar, _ = newton_solve(hmat, table, table.excitations, t0=seed,
                            opts=_solver_options(cfg), metric=metric)
    transform = similarity_transform(tstar, hmat, table)
    jac = cc_jacobian(tstar, hmat, table, transform=transform)
    res = cc_residual(tstar, hmat, table)

    gamma = infsup_gamma(hmat, eig, metric, cfg.dense_limit)
    th, th_adj, th_proj = theta(tstar, table, metric, cfg.dense_limit)
    al = alpha_continuity(tstar, hmat, eig.energy, table, metric,
                          transform=transform, dense_limit=cfg.dense_limit)
    sm = sigma_min_jacobian(jac.matrix, mu_w, cfg.dense_limit)
    gm, gm_parts = monotonicity_gamma(tstar, hmat, eig.energy, table, metric,
                                      cfg.omega, gamma, cfg.dense_limit)
    z_total = cfg.z_total
    if z_total is None:
        z_total = float(problem.metadata.get("z_total", problem.n_electrons))
    gapb = spectral_gap_bound(eig, problem.n_electrons, z_total)

    if cfg.lipschitz_samples > 0 and table.n_amplitudes <= cfg.lipschitz_max_dim:
        lip = lipschitz_estimate(tstar, hmat, table, metric, cfg.lipschitz_deltas,
                                 samples=cfg.lipschitz_samples,
                                 rng_seed=cfg.sample_seed,
                                 dense_limit=cfg.dense_limit)
    else:
        lip = []
    radius = locality_radius(gamma, th, al, lip) if lip else 0.0

    sandwich = None
    if cfg.sandwich_samples > 0:
        sandwich = verify_sandwich(tstar, hmat, table, metric, al, th, gamma,
                                   radii=cfg.sandwich_radii,
                                   samples=cfg.sandwich_samples,
                                   rng_seed=cfg.sample_seed)

    ccsd_error = None
    max_rank = max(mu.rank for mu in table.excitations)
    if max_rank >= 2:
        ccsd_active = active_set(problem, min(2, problem.space.N))
        t2, _ = newton_solve(hmat, table, ccsd_active,
                             opts=_solver_options(cfg), metric=metric)
        res2 = cc_residual(t2, hmat, table)
        ccsd_error = res2.energy - eig.energy

    jac_min_real = None
    if jac.matrix.shape[0] <= 600:
        jac_min_real = float(np.min(np.real(
            np.linalg.eigvals(np.diag(1 / np.sqrt(mu_w)) @ jac.matrix
                              @ np.diag(1 / np.sqrt(mu_w))))))

    e_hf = hf_energy(hmat)
    notes = []
    if sm < gamma / th - 1e-8:
        notes.append(
            f"noteworthy: sigma_min_jac {sm:.6f} below gamma/theta {gamma / th:.6f}")
    if eig.gap < NEAR_DEGENERATE_GAP:
        notes.append(f"near-degenerate: spectral gap {eig.gap:.3e} Hartree")
    return AnalysisReport(
        label=problem.label,
        space={"K": problem.space.K, "N": problem.space.N,
               "ms2": problem.space.ms2, "dim": problem.space.size},
        convention=cfg.resolved_convention(),
        metric={"kind": "diagonal_shifted_hamiltonian", "shift": cfg.shift,
                "e_star": eig.energy},
        eigen_index=eig.index,
        e_hf_total=e_hf,
        e_fci_total=eig.total,
        e_cc_total=res.energy + hmat.e_core,
        hf_error=e_hf - eig.total,
        ccsd_error=ccsd_error,
        gamma=gamma,
        theta=th,
        theta_parts=(th_adj, th_proj),
        alpha=al,
        sigma_min_jac=sm,
        gamma_over_theta=gamma / th,
        monotonicity_gamma=gm,
        monotonicity_parts=gm_parts,
        omega_used=cfg.omega,
        t_norm=amplitude_vnorm(tstar, metric, table),
        spectral_gap=gapb.spectral_gap,
        q_factor=gapb.q_factor,
        continuity_bound=gapb.continuity_bound,
        ellipticity_offset=gapb.ellipticity_offset,
        radius=radius,
        lipschitz=[list(pair) for pair in lip],
        sandwich=sandwich,
        degenerate=eig.degenerate,
        sigma_vs_gamma_theta_flag=bool(sm < gamma / th - 1e-8),
        jacobian_min_real_part=jac_min_real,
        notes=notes,
    )


def write_report_artifacts(report: AnalysisReport, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, f"{report.label}_report.json")
    _atomic_write(json_path, json.dumps(report.to_dict(), indent=1, sort_keys=True))
    csv_path = os.path.join(out_dir, f"{report.label}_analysis.csv")
    _atomic_write(csv_path, ",".join(AnalysisReport.CSV_COLUMNS) + "\n"
                  + ",".join(report.csv_row()) + "\n")
    return [json_path, csv_path]


_BOND_RE = re.compile(r"_r(\d+(?:\.\d+)?)")


def bond_length_of(problem: Problem) -> float | None:
    if "bond_length_angstrom" in problem.metadata:
        return float(problem.metadata["bond_length_angstrom"])
    match = _BOND_RE.search(os.path.basename(problem.path))
    return float(match.group(1)) if match else None


SCAN_CONSTANTS = ("gamma", "theta", "alpha", "sigma_min_jac", "gamma_over_theta",
                  "monotonicity_gamma", "t_norm", "spectral_gap", "hf_error")


def scan_problems(paths: list[str], cfg: RunConfig) -> list[tuple[str, float, AnalysisReport]]:
    """Analyze each input, ordered by bond length; labels must be unique."""
    def run_one(path):
        problem = load_problem(path, cfg)
        return problem, analyze_problem(problem, cfg)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_one, paths))
    else:
        results = [run_one(p) for p in paths]

    series = []
    for problem, report in results:
        length = bond_length_of(problem)
        if length is None:
            raise ValueError(f"{problem.path}: no bond length in metadata or filename")
        series.append((problem.label, length, report))
    series.sort(key=lambda item: item[1])
    labels = [label for label, _, _ in series]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate scan labels: {labels}")
    lengths = [length for _, length, _ in series]
    if any(a >= b for a, b in zip(lengths, lengths[1:])):
        raise ValueError(f"bond lengths not strictly monotone: {lengths}")
    return series


def write_scan_artifacts(series, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    lines = ["bond_length,constant_name,value"]
    for label, length, report in series:
        values = report.to_dict()
        for name in SCAN_CONSTANTS:
            lines.append(f"{length:.6f},{name},{_fmt(values[name])}")
    long_path = os.path.join(out_dir, "scan_long.csv")
    _atomic_write(long_path, "\n".join(lines) + "\n")

    table_lines = [",".join(AnalysisReport.CSV_COLUMNS)]
    for _, _, report in series:
        table_lines.append(",".join(report.csv_row()))
    table_path = os.path.join(out_dir, "scan_table.csv")
    _atomic_write(table_path, "\n".join(table_lines) + "\n")

    plot_spec = {
        "data": "scan_long.csv",
        "x": "bond_length",
        "y": "value",
        "series_by": "constant_name",
        "axes": [{"yscale": "linear"}, {"yscale": "log"}],
        "flags": [
            {"label": label,
             "near_degenerate": bool(report.spectral_gap < NEAR_DEGENERATE_GAP)}
            for label, _, report in series
        ],
    }
    plot_path = os.path.join(out_dir, "scan_plot.json")
    _atomic_write(plot_path, json.dumps(plot_spec, indent=1, sort_keys=True))
    reports = []
    for label, _, report in series:
        reports.extend(write_report_artifacts(report, out_dir))
    return [long_path, table_path, plot_path] + reports
