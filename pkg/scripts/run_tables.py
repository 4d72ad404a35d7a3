#!/usr/bin/env python3
"""Analyze every bundled fixture and collect one constants table.

Produces runs/tables/constants.csv with one row per fixture (the same
columns the `analyze` subcommand emits) plus per-fixture report JSON.

Usage: python scripts/run_tables.py [--out runs/tables] [--skip-scan]
"""

import argparse
import glob
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ccstab.analysis import AnalysisReport
from ccstab.config import RunConfig
from ccstab.workflows import analyze_problem, load_problem, write_report_artifacts


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="runs/tables")
    parser.add_argument("--fixtures", default=os.path.join(
        os.path.dirname(__file__), "..", "fixtures"))
    parser.add_argument("--skip-scan", action="store_true",
                        help="leave out the bond-scan family")
    parser.add_argument("--convention", default="paper",
                        choices=["paper", "second-quantized"])
    args = parser.parse_args()

    pattern = "*.fcidump" if args.skip_scan else "**/*.fcidump"
    paths = sorted(glob.glob(os.path.join(args.fixtures, pattern), recursive=True))
    cfg = RunConfig(convention=args.convention, sandwich_samples=50)
    os.makedirs(args.out, exist_ok=True)
    rows = [",".join(AnalysisReport.CSV_COLUMNS)]
    for path in paths:
        problem = load_problem(path, cfg)
        report = analyze_problem(problem, cfg)
        write_report_artifacts(report, args.out)
        rows.append(",".join(report.csv_row()))
        print(f"{report.label}: gamma={report.gamma:.4f} "
              f"t_norm={report.t_norm:.4f} Gamma={report.monotonicity_gamma:+.4f} "
              f"|Df^-1|^-1={report.sigma_min_jac:.4f} "
              f"gamma/theta={report.gamma_over_theta:.4f}")
    table = os.path.join(args.out, "constants.csv")
    with open(table, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {table}")


if __name__ == "__main__":
    main()
