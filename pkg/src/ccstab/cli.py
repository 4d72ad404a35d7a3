"""Command-line driver: solve, analyze, scan, check.

Exit codes: 0 success, 1 input error, 2 solver non-convergence,
3 theory-precondition failure (degenerate eigenvalue or a reference
coefficient too small for the exponential ansatz).
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
import tempfile

from .analysis import DegenerateEigenpairError
from .cluster import InvalidShiftError, NotIntermediatelyNormalizableError
from .config import ConfigError, RunConfig, fixture_root, load_config_file
from .equations import NearSingularJacobianError, NonConvergenceError
from .integrals import FcidumpError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_CONVERGENCE = 2
EXIT_PRECONDITION = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccstab",
        description="Full-CI / Full-CC solver with residual-based error bounds")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("solve", "solve the CC equations and report energies"),
        ("analyze", "compute well-posedness constants and bounds"),
        ("scan", "analyze a family of inputs along a bond scan"),
        ("check", "run the built-in oracle and property suites"),
    ):
        cmd = sub.add_parser(name, help=desc)
        cmd.add_argument("--input", action="append", default=[],
                         help="FCIDUMP file (repeatable for scan)")
        cmd.add_argument("--config", help="key = value config file")
        cmd.add_argument("--rank", help="truncation rank or 'full'")
        cmd.add_argument("--eigenpair", help="'lowest' or an eigenpair index")
        cmd.add_argument("--convention", choices=["paper", "second-quantized"],
                         help="excitation phase convention")
        cmd.add_argument("--shift", type=float, help="norm metric shift")
        cmd.add_argument("--tol", type=float, help="solver residual tolerance")
        cmd.add_argument("--seed", type=int, help="sampling seed")
        cmd.add_argument("--out", help="output directory")
        cmd.add_argument("--workers", type=int, help="parallel scan workers")
        cmd.add_argument("--sector", help="'file', 'full' or an MS2 value")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = load_config_file(args.config, cfg)
    if args.input:
        cfg.inputs = list(args.input)
    if args.rank is not None:
        cfg.rank = None if args.rank.lower() in ("full", "none") else int(args.rank)
    if args.eigenpair is not None:
        cfg.eigenpair = args.eigenpair if args.eigenpair == "lowest" else int(args.eigenpair)
    if args.convention is not None:
        cfg.convention = args.convention
    if args.shift is not None:
        cfg.shift = args.shift
    if args.tol is not None:
        cfg.tol = args.tol
    if args.seed is not None:
        cfg.sample_seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    if args.sector is not None:
        cfg.sector = args.sector
    return cfg.validate()


def _resolve_inputs(cfg: RunConfig) -> list[str]:
    root = fixture_root()
    resolved = []
    for path in cfg.inputs:
        if os.path.exists(path):
            resolved.append(path)
        elif root and os.path.exists(os.path.join(root, path)):
            resolved.append(os.path.join(root, path))
        else:
            raise FileNotFoundError(path)
    if not resolved:
        raise FileNotFoundError("no --input given")
    return resolved


def cmd_solve(cfg: RunConfig) -> int:
    from .workflows import load_problem, solve_problem, write_solve_artifacts
    paths = _resolve_inputs(cfg)
    for path in paths:
        problem = load_problem(path, cfg)
        result = solve_problem(problem, cfg)
        artifacts = write_solve_artifacts(result, cfg.out_dir)
        e = result["energies"]
        print(f"{problem.label}: E_CC = {e['e_cc_total']:.10f} Ha "
              f"(FCI {e['e_fci_total']:.10f}, HF {e['e_hf_total']:.10f})")
        for artifact in artifacts:
            print(f"  wrote {artifact}")
    return EXIT_OK


def cmd_analyze(cfg: RunConfig) -> int:
    from .workflows import analyze_problem, load_problem, write_report_artifacts
    paths = _resolve_inputs(cfg)
    for path in paths:
        problem = load_problem(path, cfg)
        report = analyze_problem(problem, cfg)
        artifacts = write_report_artifacts(report, cfg.out_dir)
        print(f"{report.label}: gamma={report.gamma:.4f} theta={report.theta:.4f} "
              f"alpha={report.alpha:.4f} |Df^-1|^-1={report.sigma_min_jac:.4f} "
              f"gamma/theta={report.gamma_over_theta:.4f} Gamma={report.monotonicity_gamma:+.4f}")
        for note in report.notes:
            print(f"  {note}")
        for artifact in artifacts:
            print(f"  wrote {artifact}")
    return EXIT_OK


def cmd_scan(cfg: RunConfig) -> int:
    from .workflows import scan_problems, write_scan_artifacts
    paths = _resolve_inputs(cfg)
    if len(paths) < 2:
        print("scan needs at least two inputs", file=sys.stderr)
        return EXIT_INPUT
    series = scan_problems(paths, cfg)
    artifacts = write_scan_artifacts(series, cfg.out_dir)
    for label, length, report in series:
        flag = " [near-degenerate]" if report.degenerate else ""
        print(f"{label} (R={length:.4f} A): gamma={report.gamma:.4f} "
              f"gamma/theta={report.gamma_over_theta:.4f}{flag}")
    for artifact in artifacts[:3]:
        print(f"  wrote {artifact}")
    return EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    from .selfcheck import run_all
    root = fixture_root()
    if root is not None:
        fixtures = glob.glob(os.path.join(root, "**", "*.fcidump"), recursive=True)
        if not fixtures:
            print(f"fixture root {root} contains no FCIDUMP files", file=sys.stderr)
            return EXIT_INPUT
    with tempfile.TemporaryDirectory() as tmp:
        results = run_all(tmp)
    os.makedirs(cfg.out_dir, exist_ok=True)
    summary_path = os.path.join(cfg.out_dir, "check_summary.json")
    with open(summary_path, "w") as fh:
        json.dump({"passed": all(r["passed"] for r in results), "suites": results},
                  fh, indent=1, sort_keys=True)
    for r in results:
        print(f"[{'PASS' if r['passed'] else 'FAIL'}] {r['name']}: {r['detail']}")
    print(f"wrote {summary_path}")
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_INPUT


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "scan":
            return cmd_scan(cfg)
        return cmd_check(cfg)
    except (FileNotFoundError, FcidumpError, ConfigError, ValueError) as exc:
        if isinstance(exc, (DegenerateEigenpairError, NotIntermediatelyNormalizableError,
                            InvalidShiftError)):
            print(f"theory precondition failed: {exc}", file=sys.stderr)
            return EXIT_PRECONDITION
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NonConvergenceError, NearSingularJacobianError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
