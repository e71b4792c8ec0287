#!/usr/bin/env python3
"""Developer utility: render flow and convergence figures from report CSVs.

    python3 scripts/plot_reports.py out/bcs-selfconsistent_flow.csv
    python3 scripts/plot_reports.py out/bcs-converge_converge.csv

Figures land next to the CSV (same stem, .png).  Not a product surface;
review aid only.
"""

import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    return header, rows


def plot_flow(path, header, rows):
    ts = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    n_scalars = (len(header) - 2) // 2
    for k in range(n_scalars):
        label = header[1 + 2 * k][3:]
        ax.plot(ts, [r[1 + 2 * k] for r in rows], label=f"Re {label}")
        ax.plot(ts, [r[2 + 2 * k] for r in rows], "--", label=f"Im {label}")
    ax.set_xlabel("t")
    ax.set_ylabel("flow scalar")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return fig


def plot_converge(path, header, rows):
    ls = [int(r[0]) for r in rows]
    deltas = [r[5] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(ls, deltas, "o-")
    ax.set_xlabel("box radius L")
    ax.set_ylabel("|full - effective| matrix element gap")
    ax.set_xticks(ls)
    ax.grid(alpha=0.3)
    return fig


def main(argv):
    if len(argv) != 2:
        print(__doc__)
        return 2
    path = Path(argv[1])
    header, rows = load(path)
    if header[:1] == ["t"]:
        fig = plot_flow(path, header, rows)
    elif header[:1] == ["L"] and "delta" in header:
        fig = plot_converge(path, header, rows)
    else:
        print(f"unrecognized CSV header: {header}")
        return 2
    out = path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
