#!/usr/bin/env python3
"""Render bond-scan constants from a scan_long.csv (linear and log panels).

The scan subcommand itself only emits data plus a plot-description JSON;
this script is the optional renderer (requires matplotlib).

Usage: python scripts/plot_scan.py runs/scan/scan_long.csv [-o scan.png]
"""

import argparse
import csv
from collections import defaultdict


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("csv_path")
    parser.add_argument("-o", "--output", default="scan.png")
    args = parser.parse_args()

    series = defaultdict(list)
    with open(args.csv_path) as fh:
        for row in csv.DictReader(fh):
            series[row["constant_name"]].append(
                (float(row["bond_length"]), float(row["value"])))

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2), sharex=True)
    for name, points in sorted(series.items()):
        points.sort()
        xs = [x for x, _ in points]
        ys = [y for _, y in points]
        for ax in axes:
            ax.plot(xs, ys, marker="o", markersize=3, label=name)
    axes[0].set_ylabel("constant value")
    axes[1].set_yscale("log")
    for ax in axes:
        ax.set_xlabel("bond length (Angstrom)")
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
